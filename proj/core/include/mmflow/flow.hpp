#pragma once

#include <cstddef>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mmflow/cost.hpp"
#include "mmflow/energy.hpp"
#include "mmflow/geometry.hpp"
#include "mmflow/jko.hpp"
#include "mmflow/transport.hpp"

namespace mmflow {

// Either a density to be quantized or an explicit particle set of size N.
using InitialData = std::variant<GridDensity, ParticleDensity>;

struct PopulationSpec {
    InitialData initial;
    InternalEnergy energy;
    CostFunction cost;  // c_i, arity l; population i occupies slot i
};

struct FlowConfig {
    Domain domain;
    std::vector<PopulationSpec> populations;
    double h = 0.01;
    double T = 1.0;
    std::size_t n_particles = 128;
    double tol = 0.0;  // 0 selects default_tolerance(n_particles)
    std::size_t max_iterations = 100000;
    std::size_t record_every = 1;

    // floor(T / h), robust to T being a decimal multiple of h.
    std::size_t steps() const;
    double tolerance() const;
    // Throws InvalidInput naming the offending field.
    void validate() const;
};

// Particle discretization of every initial datum. Throws InvalidInput when
// an initial energy is not finite.
std::vector<ParticleDensity> discretize_initial(const FlowConfig& cfg);

struct StepDiagnostics {
    std::size_t k = 0;  // step index; the state is rho^{k+1}
    double t = 0.0;     // h (k + 1)
    std::size_t i = 0;
    double energy = 0.0;
    double step_w2_sq = 0.0;
    double el_residual = 0.0;
    double objective = 0.0;
    double objective_at_previous = 0.0;
    double objective_change = 0.0;
    double first_order_residual = 0.0;
    std::size_t iterations = 0;
    std::size_t collisions = 0;
};

struct FlowRecord {
    std::size_t k = 0;
    double t = 0.0;
    std::vector<ParticleDensity> states;
    // Plan of (rho_1^{k-1}, ..., rho_i^k, ..., rho_l^{k-1}) per population; empty at k = 0.
    std::vector<MultiMarginalPlan> plans;
};

struct FlowTrajectory {
    double h = 0.0;
    double tol = 0.0;
    std::vector<InternalEnergy> energies;
    std::vector<CostFunction> costs;
    // states[k][i] for every k = 0..K, unthinned.
    std::vector<std::vector<ParticleDensity>> states;
    // Thinned by record_every; the final state is always recorded.
    std::vector<FlowRecord> records;
    // k-major, population-minor.
    std::vector<StepDiagnostics> diagnostics;

    std::size_t populations() const { return energies.size(); }
    std::size_t steps() const { return states.empty() ? 0 : states.size() - 1; }
};

// Semi-implicit scheme: at step k every population solves its JKO step with
// the step-k tuple frozen. Solver failures are rethrown with (i, k) context.
FlowTrajectory run_flow(const FlowConfig& cfg);
// Same, from an explicit initial tuple.
FlowTrajectory run_flow(const FlowConfig& cfg, std::vector<ParticleDensity> initial);

struct PopulationEstimates {
    double initial_energy = 0.0;
    double max_energy = 0.0;
    double min_energy = 0.0;
    double sum_w2_sq = 0.0;
    double ratio = 0.0;  // sum_w2_sq / h
    double lipschitz = 0.0;
    // sum_k W2^2 <= 4h (F_0 - min_k F_k + C^2 T)
    double telescoping_bound = 0.0;
    bool telescoping_ok = true;
    // max_k F_k <= F_0 + C^2 T / 2
    double energy_bound = 0.0;
    bool energy_ok = true;
    // max_k J(rho^{k+1}) - J(rho^k), allowed up to 10 tol
    double max_descent_violation = 0.0;
    bool descent_ok = true;
};

struct EstimateReport {
    std::vector<PopulationEstimates> populations;
    bool passed = true;
};

EstimateReport estimate_report(const FlowTrajectory& tr);

struct ContractionReport {
    bool skipped = false;
    std::string reason;
    std::vector<double> t;
    std::vector<double> distance;  // product W2 between the runs
    double max_violation = 0.0;    // largest increase between consecutive steps
    double slack = 1e-3;
    double c_probe = 0.0;          // max_violation / (h + 1/N)
    bool passed = true;
};

// Runs cfg from two initial tuples and tracks the product distance. Skipped
// when an energy fails the McCann check or a cost is not certified.
ContractionReport contraction_probe(const FlowConfig& cfg, const std::vector<ParticleDensity>& init_a,
                                    const std::vector<ParticleDensity>& init_b, double slack = 1e-3);

// Phi(t, x) with its x-derivative and sup-norm bounds on Phi_x and Phi_xx.
struct TestFunction {
    std::string name;
    std::function<double(double, double)> phi;
    std::function<double(double, double)> phi_x;
    double phi_x_bound = 0.0;
    double phi_xx_bound = 0.0;

    // Phi = 1.
    static TestFunction constant();
    // exp(1 - 1/(1 - r^2)) / (1 + t) with r = (x - center) / radius.
    static TestFunction bump(double center, double radius);
};

struct WeakFormReport {
    std::vector<double> residual;  // per population
    std::vector<double> bound;     // (1/2) |Phi_xx| sum W2^2 + K max EL |Phi_x|
    bool passed = true;
};

// Discrete weak formulation tested against Phi. Needs every step (record
// thinning does not matter; states are kept unthinned).
WeakFormReport weak_form_residual(const FlowTrajectory& tr, const TestFunction& phi);

// Self-similar solution of rho_t = (P(rho))_xx for F = x^m, P = (m - 1) x^m,
// with unit mass centred at `center`.
double barenblatt(double m, double t, double x, double center = 0.0);
double barenblatt_radius(double m, double t);

// CSV artifacts. Values use the shortest round-trip decimal form.
void write_trajectory_csv(const FlowTrajectory& tr, std::size_t i, std::ostream& out);
void write_diagnostics_csv(const FlowTrajectory& tr, std::ostream& out);
std::string format_number(double v);

}  // namespace mmflow
