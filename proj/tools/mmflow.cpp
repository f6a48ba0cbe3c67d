#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mmflow/errors.hpp"
#include "mmflow/scenario.hpp"

namespace {

constexpr int kInputError = 2;
constexpr int kNumericalFailure = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-implicit JKO flows of populations coupled by multi-marginal transport"};
    std::string scenario_path;
    std::string output_dir;
    bool quiet = false;
    bool validate_only = false;
    std::string preset_name;
    app.add_option("scenario", scenario_path, "Scenario JSON file");
    app.add_option("--print-preset", preset_name, "Write a built-in scenario as JSON to stdout and exit");
    app.add_option("--output-dir", output_dir, "Override the scenario's output directory");
    app.add_flag("--quiet", quiet, "Print nothing on success");
    app.add_flag("--validate-only", validate_only, "Parse and check the scenario without running it");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kInputError;
    }
    if (!preset_name.empty()) {
        try {
            std::cout << mmflow::serialize_scenario(mmflow::preset(preset_name));
        } catch (const mmflow::Error& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kInputError;
        }
        return 0;
    }
    if (scenario_path.empty()) {
        std::cerr << "error: a scenario file is required\n" << app.help();
        return kInputError;
    }

    std::ifstream in(scenario_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read scenario '" << scenario_path << "'\n";
        return kInputError;
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::filesystem::path base_dir = std::filesystem::path(scenario_path).parent_path();

    mmflow::Scenario scenario;
    try {
        scenario = mmflow::parse_scenario(buffer.str());
        if (validate_only) {
            mmflow::build_flow_config(scenario, base_dir);
            if (!quiet) {
                std::cout << "scenario '" << scenario.name << "' is valid\n";
            }
            return 0;
        }
    } catch (const mmflow::NumericalFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const mmflow::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInputError;
    }

    mmflow::RunOptions options;
    options.output_dir = output_dir;
    options.base_dir = base_dir;
    const mmflow::RunResult result = mmflow::run_scenario(scenario, options);
    if (result.exit_code != 0) {
        std::cerr << "error: " << result.message << '\n';
    } else if (!quiet) {
        const auto dir = output_dir.empty() ? scenario.output_dir : output_dir;
        std::cout << "scenario '" << scenario.name << "': all probes passed; wrote " << result.files.size()
                  << " files and MANIFEST to " << dir << '\n';
    }
    return result.exit_code;
}
