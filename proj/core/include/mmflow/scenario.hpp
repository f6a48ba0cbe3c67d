#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "mmflow/cost.hpp"
#include "mmflow/energy.hpp"
#include "mmflow/flow.hpp"
#include "mmflow/geometry.hpp"

namespace mmflow {

enum class ProfileKind { uniform, cosine, gaussian, barenblatt, grid, csv };

/**
 * Named initial density. Only the fields of the selected kind are read:
 *   cosine      1 + amplitude cos(pi frequency (x - lower) / L), |amplitude| < 1
 *   gaussian    truncated normal (mean, std_dev)
 *   barenblatt  porous-medium self-similar profile (exponent, time, center)
 *   grid        explicit cell edges and values (unit mass)
 *   csv         "edge_left,edge_right,value" rows at `path`, relative to the scenario file
 */
struct InitialProfile {
    ProfileKind kind = ProfileKind::uniform;
    double amplitude = 0.5;
    double frequency = 1.0;
    double mean = 0.5;
    double std_dev = 0.1;
    double exponent = 2.0;
    double time = 0.01;
    double center = 0.0;
    std::vector<double> edges;
    std::vector<double> values;
    std::string path;

    friend bool operator==(const InitialProfile&, const InitialProfile&) = default;
};

struct PopulationScenario {
    InitialProfile initial;
    InternalEnergy energy;
    CostFunction cost;

    friend bool operator==(const PopulationScenario&, const PopulationScenario&) = default;
};

enum class ProbeType { estimate_report, contraction_probe, convexity_probe, weak_form_residual };

struct ProbeSpec {
    ProbeType type = ProbeType::estimate_report;
    // contraction_probe: second initial tuple and additive slack.
    std::vector<InitialProfile> initial;
    double slack = 1e-3;
    // convexity_probe: random endpoint pairs per population cost.
    std::size_t pairs = 100;
    std::uint64_t seed = 1;
    std::vector<double> t_samples{0.25, 0.5, 0.75};
    // weak_form_residual: "constant" or "bump".
    std::string test_function = "bump";

    friend bool operator==(const ProbeSpec&, const ProbeSpec&) = default;
};

struct Scenario {
    std::string name;
    Domain domain;
    double h = 0.01;
    double T = 1.0;
    std::size_t n_particles = 128;
    double tol = 0.0;
    std::size_t max_iterations = 100000;
    std::size_t record_every = 1;
    std::vector<PopulationScenario> populations;
    std::vector<ProbeSpec> probes;
    std::string output_dir = "output";

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Parses a JSON scenario. Syntax errors report line and column; schema errors
// name the field path. Unknown keys are rejected. Throws InvalidInput.
Scenario parse_scenario(const std::string& text);
// JSON text that parse_scenario maps back to an equal Scenario. Throws
// InvalidInput for custom energies or costs, which have no serialized form.
std::string serialize_scenario(const Scenario& s);

const std::vector<std::string>& preset_names();
// Throws InvalidInput for unknown names.
Scenario preset(const std::string& name);

// Grid density from CSV rows "edge_left,edge_right,value"; an optional header
// line is skipped. Cells must be contiguous and carry unit mass.
GridDensity load_grid_csv(std::istream& in, Domain domain);
GridDensity load_grid_csv(const std::filesystem::path& path, Domain domain);

// Grid view of a profile. Analytic profiles are cell-averaged on `cells`
// uniform cells and normalized; `base_dir` resolves csv paths.
GridDensity profile_density(const InitialProfile& profile, Domain domain, const std::filesystem::path& base_dir = {},
                            std::size_t cells = 2048);

// Resolves profiles and checks every FlowConfig invariant.
FlowConfig build_flow_config(const Scenario& s, const std::filesystem::path& base_dir = {});

struct RunOptions {
    std::filesystem::path output_dir;  // empty: the scenario's output_dir
    std::filesystem::path base_dir;    // for csv profiles
    bool quiet = false;
};

struct RunResult {
    int exit_code = 0;  // 0 ok, 1 probe failure, 2 input error, 3 numerical failure
    std::string message;
    std::vector<std::string> files;
};

// Runs the flow and every probe, writing trajectory_pop<i>.csv,
// diagnostics.csv, one probe_<type>.txt per probe and a MANIFEST.
RunResult run_scenario(const Scenario& s, const RunOptions& options = {});

}  // namespace mmflow
