#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "pcprobe/pipeline.hpp"

using namespace pcprobe;
namespace fs = std::filesystem;

namespace {

const CircuitParams kNormal{14.72e-3, -1.402, 24.58, 34.52e-6};

ScenarioConfig load_named(const std::string& name) {
    return load_scenario(fs::path(PCPROBE_SCENARIO_DIR) / (name + ".json"));
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("pcprobe_" + tag);
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("scenario files load and survive a JSON round trip") {
    const ScenarioConfig s = load_named("normal_online");
    CHECK(s.id == "normal_online");
    CHECK(s.operating_voltage.amplitude == 3387.0);
    CHECK(s.probe.order == 10);
    CHECK(s.probe.bit_duration == 1e-4);
    CHECK(s.notch.enabled);
    CHECK(s.warmup_periods == 10);
    const auto* params = std::get_if<CircuitParams>(&s.plant);
    REQUIRE(params != nullptr);
    CHECK(params->L == 0.01472);

    const ScenarioConfig back = scenario_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
}

TEST_CASE("run_probe on the clean scenario completes and recovers the circuit") {
    const ScenarioConfig s = load_named("normal_clean");
    const ProbeRun run = run_probe(s);
    INFO(run.failed_stage << ": " << run.failure_message);
    REQUIRE(run.complete());
    REQUIRE(run.metrics.oracle_nrmse.has_value());
    CHECK(*run.metrics.oracle_nrmse < 0.02);
    REQUIRE(run.circuit.has_value());
    CHECK(run.circuit->L == Catch::Approx(kNormal.L).epsilon(0.01));
    CHECK(run.circuit->R1 == Catch::Approx(kNormal.R1).epsilon(0.01));
    CHECK(run.circuit->R2 == Catch::Approx(kNormal.R2).epsilon(0.01));
    CHECK(run.circuit->C == Catch::Approx(kNormal.C).epsilon(0.01));
    REQUIRE(run.metrics.markov_error.has_value());
    CHECK(*run.metrics.markov_error < 1e-10);
    // no drive, so neither SNR nor a QSSS track applies
    CHECK_FALSE(run.metrics.snr_db.has_value());
    CHECK_FALSE(run.qsss.has_value());
    // every stage reported a timing
    CHECK(run.timings.size() == 13);
}

TEST_CASE("run_probe equals the same stages composed by hand") {
    const ScenarioConfig s = load_named("normal_clean");
    const ProbeRun run = run_probe(s);
    REQUIRE(run.complete());

    const ProbeConfig& pc = s.probe;
    const double t0 = pc.bit_duration;
    const ChipSequence chips = generate_mls(pc.order);
    const StateSpaceModel plant = build_scenario_plant(s);
    const std::vector<Waveform> inputs = build_scenario_inputs(s, chips, plant.inputs());
    const Waveform y =
        simulate(plant, inputs, s.noise, t0 / pc.oversampling, pc.oversampling);
    const std::size_t n = pc.chips_per_period();
    const Waveform y_window = slice(y, 0, static_cast<std::size_t>(pc.periods) * n);
    ProbeConfig ref_cfg = pc;
    ref_cfg.oversampling = 1;
    const Waveform zp = circular_xcorr(y_window, reference_signal(chips, ref_cfg));
    REQUIRE(zp.samples.size() == run.zp.samples.size());
    for (std::size_t k = 0; k < zp.samples.size(); ++k)
        REQUIRE(zp.samples[k] == run.zp.samples[k]);

    Waveform markov = slice(prbs_debias(zp), 1, zp.size() - 1);
    int m = static_cast<int>(std::llround(s.ident.memory_length / t0));
    m = std::min(m, static_cast<int>((markov.size() - 1) / 2));
    const HankelPair hankel = build_hankel(markov, m);
    const int order = select_order(hankel, s.ident.energy_threshold);
    const RealizedModel realized = balanced_realization(hankel, order);
    const RealizedModel cont = to_continuous(realized, t0);
    const CircuitParams fit = tf_to_circuit(to_second_order_tf(cont));
    REQUIRE(run.circuit.has_value());
    CHECK(fit.L == Catch::Approx(run.circuit->L).epsilon(1e-12));
    CHECK(fit.R1 == Catch::Approx(run.circuit->R1).epsilon(1e-12));
    CHECK(fit.R2 == Catch::Approx(run.circuit->R2).epsilon(1e-12));
    CHECK(fit.C == Catch::Approx(run.circuit->C).epsilon(1e-12));
}

TEST_CASE("repeated runs are deterministic apart from stage timings") {
    const ScenarioConfig s = load_named("determinism_check");
    const ProbeRun a = run_probe(s);
    const ProbeRun b = run_probe(s);
    REQUIRE(a.complete());
    REQUIRE(a.zp.samples.size() == b.zp.samples.size());
    for (std::size_t k = 0; k < a.zp.samples.size(); ++k)
        REQUIRE(a.zp.samples[k] == b.zp.samples[k]);
    nlohmann::json ja = run_to_json(a);
    nlohmann::json jb = run_to_json(b);
    ja.erase("timings");
    jb.erase("timings");
    CHECK(ja == jb);
}

TEST_CASE("run_oracle is exactly the direct discrete impulse response") {
    const ScenarioConfig s = load_named("normal_clean");
    const Waveform oracle = run_oracle(s);
    const std::size_t memory_samples = static_cast<std::size_t>(
        std::llround(s.ident.memory_length / s.probe.bit_duration));
    const Waveform direct = direct_impulse_response(build_scenario_plant(s),
                                                    s.probe.bit_duration, memory_samples + 1);
    REQUIRE(oracle.samples.size() == direct.samples.size());
    for (std::size_t k = 0; k < oracle.samples.size(); ++k)
        REQUIRE(oracle.samples[k] == direct.samples[k]);
}

TEST_CASE("disabling the notch degrades the online estimate at least fivefold") {
    const ScenarioConfig with_notch = load_named("normal_online");
    ScenarioConfig without = with_notch;
    without.notch.enabled = false;
    const ProbeRun a = run_probe(with_notch);
    const ProbeRun b = run_probe(without);
    REQUIRE(a.metrics.oracle_nrmse.has_value());
    REQUIRE(b.metrics.oracle_nrmse.has_value());
    CHECK(*a.metrics.oracle_nrmse < 0.10);
    CHECK(*b.metrics.oracle_nrmse >= 5.0 * *a.metrics.oracle_nrmse);
    REQUIRE(a.metrics.snr_db.has_value());
    CHECK(*a.metrics.snr_db > 20.0); // noiseless: only the probe competes with 60 Hz
    REQUIRE(a.qsss.has_value());     // drive present, so QSSS tracking ran
}

TEST_CASE("compare_runs on identical runs reports zero change") {
    const ProbeRun run = run_probe(load_named("normal_clean"));
    REQUIRE(run.complete());
    const RunComparison cmp = compare_runs(run, run);
    CHECK_FALSE(cmp.delta.flagged);
    CHECK(cmp.delta.delta_L == 0.0);
    CHECK(cmp.delta.delta_R1 == 0.0);
    CHECK(cmp.delta.delta_R2 == 0.0);
    CHECK(cmp.delta.delta_C == 0.0);
    CHECK(cmp.zp_nrmse == 0.0);

    ProbeRun other = run;
    other.scenario.probe.order = 9;
    CHECK_THROWS_AS(compare_runs(run, other), Error);
}

TEST_CASE("run JSON serialization restores the fields comparison needs") {
    const ProbeRun run = run_probe(load_named("normal_clean"));
    const ProbeRun back = run_from_json(run_to_json(run));
    CHECK(back.scenario_id == run.scenario_id);
    REQUIRE(back.circuit.has_value());
    CHECK(back.circuit->L == run.circuit->L);
    CHECK(back.circuit->R2 == run.circuit->R2);
    REQUIRE(back.zp.samples.size() == run.zp.samples.size());
    CHECK(back.zp.samples == run.zp.samples);
    CHECK(back.metrics.oracle_nrmse == run.metrics.oracle_nrmse);
    const RunComparison cmp = compare_runs(run, back);
    CHECK_FALSE(cmp.delta.flagged);
}

TEST_CASE("emit_report writes the report, waveform CSVs, and parameter table") {
    const fs::path dir = temp_dir("report");
    const ProbeRun run = run_probe(load_named("normal_clean"));
    const ProbeReport report = emit_report({run, run}, dir);

    for (const char* name : {"normal_clean_zp.csv", "normal_clean_oracle.csv",
                             "normal_clean_p.csv", "normal_clean_y.csv",
                             "circuit_table.csv", "report.json"})
        CHECK(fs::exists(dir / name));

    std::ifstream table(dir / "circuit_table.csv");
    std::string header;
    std::getline(table, header);
    CHECK(header == "scenario,L_mH,R1_ohm,R2_ohm,C_uF,flagged");
    std::string row;
    std::getline(table, row);
    CHECK(row.substr(0, 13) == "normal_clean,");
    CHECK(row.find(",false") != std::string::npos);

    std::ifstream in(dir / "report.json");
    nlohmann::json doc;
    in >> doc;
    CHECK(doc["format_version"] == 1);
    REQUIRE(doc["runs"].size() == 2);
    CHECK(doc["runs"][0]["scenario_id"] == "normal_clean");
    // second run compared against the first (the baseline): no change
    REQUIRE(doc["baseline_comparison"].size() == 1);
    CHECK(doc["baseline_comparison"][0]["flagged"] == false);
    CHECK(report.document == doc);
    fs::remove_all(dir);
}

TEST_CASE("emit_report with no runs still produces a valid empty report") {
    const fs::path dir = temp_dir("report_empty");
    const ProbeReport report = emit_report({}, dir);
    CHECK(fs::exists(dir / "report.json"));
    CHECK(report.document["runs"].empty());
    CHECK(report.document["baseline_comparison"].empty());
    fs::remove_all(dir);
}

TEST_CASE("latency metrics come straight from the probe configuration") {
    const ProbeRun run = run_probe(load_named("normal_clean"));
    CHECK(run.metrics.data_window_seconds == Catch::Approx(0.1023).epsilon(1e-12));
    CHECK(run.metrics.total_probe_seconds == Catch::Approx(0.2046).epsilon(1e-12));
    CHECK(run.metrics.data_window_cycles == Catch::Approx(6.138).epsilon(1e-12));
}

TEST_CASE("an unstable plant fails in the synthesize stage, not silently") {
    ScenarioConfig s = load_named("normal_clean");
    StateSpaceModel unstable;
    unstable.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
    unstable.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
    unstable.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
    unstable.D = Eigen::MatrixXd::Zero(1, 1);
    unstable.domain = StateSpaceModel::Domain::Continuous;
    s.plant = unstable;
    const ProbeRun run = run_probe(s);
    CHECK_FALSE(run.complete());
    CHECK(run.failed_stage == "synthesize");
    CHECK_FALSE(run.failure_message.empty());
    CHECK_FALSE(run.circuit.has_value());
}

TEST_CASE("waveform CSV files round trip with full precision") {
    const fs::path dir = temp_dir("csv");
    fs::create_directories(dir);
    Waveform w;
    w.dt = 1e-4;
    w.t_start = 0.25;
    w.unit = "A";
    w.samples = {1.0 / 3.0, -2.718281828459045e-12, 0.0, 9.87654321e8};
    write_csv(w, dir / "w.csv");

    std::ifstream in(dir / "w.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("# dt=", 0) == 0);
    CHECK(header.find("t_start=") != std::string::npos);
    CHECK(header.find("unit=A") != std::string::npos);

    const Waveform back = read_waveform_csv(dir / "w.csv");
    CHECK(back.dt == w.dt);
    CHECK(back.t_start == w.t_start);
    CHECK(back.unit == w.unit);
    CHECK(back.samples == w.samples);
    fs::remove_all(dir);
}
