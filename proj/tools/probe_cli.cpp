// Command-line front end for the pulse-compression probing pipeline.
//
// Exit codes: 0 success, 2 validation failure, 3 stage failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pcprobe/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const std::string& scenario_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed, std::optional<int> periods, bool no_notch,
            std::optional<int> force_order) {
    pcprobe::ScenarioConfig scenario = pcprobe::load_scenario(scenario_path);
    if (seed) scenario.noise.rng_seed = *seed;
    if (periods) scenario.probe.periods = *periods;
    if (no_notch) scenario.notch.enabled = false;
    if (force_order) scenario.ident.force_order = *force_order;

    const pcprobe::ProbeRun run = pcprobe::run_probe(scenario);
    pcprobe::emit_report({run}, out_dir);
    const fs::path run_path = fs::path(out_dir) / (run.scenario_id + "_run.json");
    std::ofstream out(run_path);
    out << pcprobe::run_to_json(run).dump(2) << "\n";

    if (!run.complete()) {
        std::cerr << "stage failure: " << run.failed_stage << ": " << run.failure_message
                  << "\n";
        return 3;
    }
    std::cout << "run " << run.scenario_id << " complete";
    if (run.circuit)
        std::cout << ": L=" << run.circuit->L * 1e3 << " mH, R1=" << run.circuit->R1
                  << " ohm, R2=" << run.circuit->R2 << " ohm, C=" << run.circuit->C * 1e6
                  << " uF";
    std::cout << "\n";
    return 0;
}

int cmd_oracle(const std::string& scenario_path, const std::string& out_dir) {
    pcprobe::ScenarioConfig scenario = pcprobe::load_scenario(scenario_path);
    const pcprobe::Waveform h = pcprobe::run_oracle(scenario);
    const fs::path path = fs::path(out_dir) / (scenario.id + "_oracle.csv");
    fs::create_directories(out_dir);
    pcprobe::write_csv(h, path);
    std::cout << "wrote " << path.string() << " (" << h.samples.size() << " samples)\n";
    return 0;
}

int cmd_compare(const std::string& baseline_path, const std::string& candidate_path) {
    auto load = [](const std::string& p) {
        std::ifstream in(p);
        if (!in) throw pcprobe::Error("cannot open " + p);
        nlohmann::json j;
        in >> j;
        return pcprobe::run_from_json(j);
    };
    const pcprobe::ProbeRun baseline = load(baseline_path);
    const pcprobe::ProbeRun candidate = load(candidate_path);
    const pcprobe::RunComparison cmp = pcprobe::compare_runs(baseline, candidate);
    nlohmann::json j = pcprobe::to_json(cmp.delta);
    j["zp_nrmse"] = cmp.zp_nrmse;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_validate(const std::string& scenario_path) {
    pcprobe::ScenarioConfig scenario = pcprobe::load_scenario(scenario_path);
    const double bandwidth = 2.0 * M_PI * scenario.validation_bandwidth_hz;
    const pcprobe::ValidationReport report =
        pcprobe::validate_config(scenario.probe, bandwidth, scenario.ident.memory_length);
    bool ok = report.pass;
    for (const std::string& v : report.violations) std::cout << "violation: " << v << "\n";
    const pcprobe::StateSpaceModel plant = pcprobe::build_scenario_plant(scenario);
    if (plant.domain == pcprobe::StateSpaceModel::Domain::Continuous && !plant.is_stable()) {
        std::cout << "violation: scenario plant is unstable\n";
        ok = false;
    }
    std::cout << (ok ? "valid" : "invalid: binding constraint '" +
                                     report.binding_constraint + "'")
              << "\n";
    return ok ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pulse-compression probing toolkit for feeder equivalent models"};
    app.require_subcommand(1);

    std::string scenario_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> periods, force_order;
    bool no_notch = false;

    CLI::App* run = app.add_subcommand("run", "Probe a scenario and emit a report");
    run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", seed, "Override the measurement-noise RNG seed");
    run->add_option("--periods", periods, "Override the number of injected periods");
    run->add_flag("--no-notch", no_notch, "Disable the 60 Hz notch filter");
    run->add_option("--force-order", force_order, "Force the realization order");

    CLI::App* oracle = app.add_subcommand("oracle", "Direct discrete-impulse oracle");
    oracle->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    oracle->add_option("--out", out_dir, "Output directory");

    std::string baseline_path, candidate_path;
    CLI::App* compare = app.add_subcommand("compare", "Compare two probe runs");
    compare->add_option("--baseline", baseline_path, "Baseline run JSON")->required();
    compare->add_option("--candidate", candidate_path, "Candidate run JSON")->required();

    CLI::App* validate = app.add_subcommand("validate", "Validate a scenario");
    validate->add_option("--scenario", scenario_path, "Scenario JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(scenario_path, out_dir, seed, periods, no_notch, force_order);
        if (oracle->parsed()) return cmd_oracle(scenario_path, out_dir);
        if (compare->parsed()) return cmd_compare(baseline_path, candidate_path);
        if (validate->parsed()) return cmd_validate(scenario_path);
    } catch (const pcprobe::StageError& ex) {
        std::cerr << "stage failure: " << ex.what() << "\n";
        return 3;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    }
    return 0;
}
