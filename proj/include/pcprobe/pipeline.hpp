#ifndef PCPROBE_PIPELINE_HPP
#define PCPROBE_PIPELINE_HPP

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcprobe/correlate.hpp"
#include "pcprobe/notch.hpp"
#include "pcprobe/qsss.hpp"
#include "pcprobe/realization.hpp"
#include "pcprobe/scenario.hpp"

namespace pcprobe {

class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct ProbeMetrics {
    std::optional<double> snr_db;     // 60 Hz signal vs probe + noise at the output
    std::optional<double> markov_error;
    std::optional<double> oracle_nrmse;
    double data_window_seconds = 0.0; // one probe period T_p
    double total_probe_seconds = 0.0; // periods * T_p
    double data_window_cycles = 0.0;  // T_p * nominal frequency
};

struct ProbeRun {
    std::string scenario_id;
    ScenarioConfig scenario;
    Waveform probe_signal;  // injected p(t) at the simulation rate
    Waveform measured;      // terminal current at the t0 grid (probe window)
    Waveform terminal_voltage; // terminal voltage at the t0 grid (probe window)
    Waveform zp;            // probing output, lag 0 .. (N-1) t0
    Waveform oracle;        // direct discrete-impulse response over the memory length
    std::optional<RealizedModel> realized;   // discrete, dt = t0
    std::optional<RealizedModel> continuous;
    std::optional<TransferFunction2> tf;
    std::optional<CircuitParams> circuit;
    std::optional<QsssTrack> qsss;
    ProbeMetrics metrics;
    std::vector<StageTiming> timings;
    std::string failed_stage;    // empty when every stage completed
    std::string failure_message;

    bool complete() const { return failed_stage.empty(); }
};

/// Simulation inputs over warmup + probe periods: terminal voltage
/// (60 Hz drive plus the probe, which starts after the warmup) and, for
/// two-input plants, the embedded QSSS source current.
inline std::vector<Waveform> build_scenario_inputs(const ScenarioConfig& scenario,
                                                   const ChipSequence& chips,
                                                   int plant_inputs,
                                                   bool include_probe = true) {
    const ProbeConfig& pc = scenario.probe;
    const double dt_sim = pc.bit_duration / pc.oversampling;
    const std::size_t samples_per_period = chips.length() * pc.oversampling;
    const std::size_t warmup = static_cast<std::size_t>(scenario.warmup_periods);
    const std::size_t steps = samples_per_period * (warmup + pc.periods);
    const std::size_t probe_start = samples_per_period * warmup;
    const Waveform p = synthesize_prbpt(chips, pc);
    const double omega = 2.0 * M_PI * pc.nominal_frequency;

    std::vector<Waveform> inputs;
    Waveform v;
    v.dt = dt_sim;
    v.unit = "V";
    v.samples.resize(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * dt_sim;
        double val = scenario.operating_voltage.amplitude *
                     std::sin(omega * t + scenario.operating_voltage.phase);
        if (include_probe && k >= probe_start) val += p.samples[k - probe_start];
        v.samples[k] = val;
    }
    inputs.push_back(std::move(v));

    if (plant_inputs >= 2) {
        Waveform is;
        if (scenario.qsss_source) {
            is = qsss_source_waveform(scenario.qsss_source->magnitude,
                                      scenario.qsss_source->angle, pc.nominal_frequency,
                                      dt_sim, static_cast<double>(steps) * dt_sim);
            is.samples.resize(steps, 0.0);
        } else {
            is.dt = dt_sim;
            is.unit = "A";
            is.samples.assign(steps, 0.0);
        }
        inputs.push_back(std::move(is));
        for (int extra = 2; extra < plant_inputs; ++extra) {
            Waveform zero;
            zero.dt = dt_sim;
            zero.samples.assign(steps, 0.0);
            inputs.push_back(std::move(zero));
        }
    }
    return inputs;
}

/// Adds the current drawn by a high-impedance parallel branch to the measured
/// t0-grid current. v_t0 is the terminal voltage sampled on the same grid.
inline void apply_parallel_branch(Waveform& y, const Waveform& v_t0,
                                  const ParallelBranch& branch, double frequency) {
    if (branch.resistance <= 0.0) throw Error("parallel branch resistance must be > 0");
    check_compatible(y, v_t0);
    const double omega = 2.0 * M_PI * frequency;
    for (std::size_t k = 0; k < y.samples.size(); ++k) {
        const double t = y.time(k);
        const double emf = branch.source_amplitude * std::sin(omega * t + branch.source_phase);
        y.samples[k] += (v_t0.samples[k] - emf) / branch.resistance;
    }
}

inline Waveform run_oracle(const ScenarioConfig& scenario) {
    const StateSpaceModel plant = build_scenario_plant(scenario);
    const double t0 = scenario.probe.bit_duration;
    const std::size_t memory_samples =
        static_cast<std::size_t>(std::llround(scenario.ident.memory_length / t0));
    return direct_impulse_response(plant, t0, memory_samples + 1);
}

/// Executes the full probing procedure for one scenario. Stage failures are
/// recorded on the returned run (failed_stage / failure_message) with every
/// artifact produced so far retained.
inline ProbeRun run_probe(const ScenarioConfig& scenario) {
    using clock = std::chrono::steady_clock;
    ProbeRun run;
    run.scenario_id = scenario.id;
    run.scenario = scenario;
    const ProbeConfig& pc = scenario.probe;
    run.metrics.data_window_seconds = pc.period();
    run.metrics.total_probe_seconds = static_cast<double>(pc.periods) * pc.period();
    run.metrics.data_window_cycles = pc.period() * pc.nominal_frequency;

    std::string current_stage;
    auto stage = [&](const std::string& name, auto&& fn) {
        current_stage = name;
        const auto begin = clock::now();
        fn();
        const std::chrono::duration<double> elapsed = clock::now() - begin;
        run.timings.push_back({name, elapsed.count()});
    };

    try {
        const double t0 = pc.bit_duration;
        const int q = pc.oversampling;
        const double dt_sim = t0 / q;
        const std::size_t n = pc.chips_per_period();
        const std::size_t warmup = static_cast<std::size_t>(scenario.warmup_periods);

        ChipSequence chips;
        StateSpaceModel plant;
        std::vector<Waveform> inputs;
        Waveform y;

        stage("synthesize", [&] {
            chips = generate_mls(pc.order);
            run.probe_signal = synthesize_prbpt(chips, pc);
            plant = build_scenario_plant(scenario);
            if (plant.domain == StateSpaceModel::Domain::Continuous && !plant.is_stable())
                throw Error("scenario plant is unstable");
            inputs = build_scenario_inputs(scenario, chips, plant.inputs());
        });

        stage("simulate", [&] {
            y = simulate(plant, inputs, scenario.noise, dt_sim, q);
            // terminal voltage on the t0 grid (ZOH values at the sample instants)
            run.terminal_voltage.dt = t0;
            run.terminal_voltage.unit = "V";
            run.terminal_voltage.samples.resize(y.samples.size());
            for (std::size_t k = 0; k < y.samples.size(); ++k)
                run.terminal_voltage.samples[k] =
                    inputs[0].samples[k * static_cast<std::size_t>(q)];
            if (scenario.parallel_branch)
                apply_parallel_branch(y, run.terminal_voltage, *scenario.parallel_branch,
                                      pc.nominal_frequency);
        });

        stage("snr", [&] {
            const bool has_drive = scenario.operating_voltage.amplitude != 0.0 ||
                                   scenario.qsss_source.has_value();
            if (!has_drive) return;
            // Clean system output: drive and embedded source, no probe, no noise.
            std::vector<Waveform> base_inputs =
                build_scenario_inputs(scenario, chips, plant.inputs(), false);
            Waveform y_s = simulate(plant, base_inputs, NoiseConfig{}, dt_sim, q);
            if (scenario.parallel_branch) {
                Waveform v_base = run.terminal_voltage;
                for (std::size_t k = 0; k < v_base.samples.size(); ++k)
                    v_base.samples[k] = base_inputs[0].samples[k * static_cast<std::size_t>(q)];
                apply_parallel_branch(y_s, v_base, *scenario.parallel_branch,
                                      pc.nominal_frequency);
            }
            const std::size_t first = warmup * n;
            const std::size_t count = static_cast<std::size_t>(pc.periods) * n;
            const Waveform ys_win = slice(y_s, first, count);
            const Waveform yp_win = slice(y, first, count) - ys_win;
            if (rms(ys_win) > 0.0 && rms(yp_win) > 0.0)
                run.metrics.snr_db = snr_db(ys_win, yp_win);
        });

        Waveform y_filtered;
        stage("notch", [&] {
            y_filtered = scenario.notch.enabled
                             ? notch_filter(y, pc.nominal_frequency, scenario.notch.quality)
                             : y;
        });

        stage("correlate", [&] {
            const std::size_t first = warmup * n;
            const std::size_t count = static_cast<std::size_t>(pc.periods) * n;
            const Waveform y_window = slice(y_filtered, first, count);
            run.measured = slice(y, first, count);
            run.terminal_voltage = slice(run.terminal_voltage, first, count);
            ProbeConfig ref_cfg = pc;
            ref_cfg.oversampling = 1; // reference on the measurement (t0) grid
            const Waveform s = reference_signal(chips, ref_cfg);
            run.zp = circular_xcorr(y_window, s);
        });

        stage("oracle", [&] {
            run.oracle = run_oracle(scenario);
            run.metrics.oracle_nrmse = nrmse(run.zp, run.oracle, run.oracle.size());
        });

        HankelPair hankel;
        int order = 0;
        stage("hankel", [&] {
            // z_p carries the MLS off-peak autocorrelation floor and, when the
            // notch ran, the notch's own response; both are known and undone
            // here before the samples are read as Markov parameters.
            Waveform markov = prbs_debias(run.zp);
            if (scenario.notch.enabled)
                markov = notch_deconvolve(markov, pc.nominal_frequency,
                                          scenario.notch.quality);
            markov = slice(markov, 1, markov.size() - 1);
            int m = static_cast<int>(std::llround(scenario.ident.memory_length / t0));
            m = std::min(m, static_cast<int>((markov.size() - 1) / 2));
            hankel = build_hankel(markov, m);
        });

        stage("order_selection", [&] {
            order = scenario.ident.force_order
                        ? std::min(*scenario.ident.force_order, hankel.m)
                        : select_order(hankel, scenario.ident.energy_threshold);
        });

        stage("realization", [&] {
            run.realized = balanced_realization(hankel, order);
            run.realized->sys.dt = t0;
            run.metrics.markov_error = run.realized->markov_error;
        });

        stage("to_continuous", [&] {
            try {
                run.continuous = to_continuous(*run.realized, t0);
            } catch (const Error&) {
                if (order <= 2) throw;
                // Spurious noise modes can block the matrix logarithm; fall
                // back to the paper's fixed second-order fit.
                order = 2;
                run.realized = balanced_realization(hankel, order);
                run.realized->sys.dt = t0;
                run.metrics.markov_error = run.realized->markov_error;
                run.continuous = to_continuous(*run.realized, t0);
            }
        });

        stage("fit_tf", [&] { run.tf = to_second_order_tf(*run.continuous); });

        stage("fit_circuit", [&] { run.circuit = tf_to_circuit(*run.tf); });

        stage("track_qsss", [&] {
            if (scenario.operating_voltage.amplitude == 0.0 || !run.circuit) return;
            const double f = pc.nominal_frequency;
            run.qsss = track_qsss(run.terminal_voltage, run.measured, *run.circuit, f,
                                  2.0 / f, 1.0 / f);
        });
    } catch (const std::exception& ex) {
        run.failed_stage = current_stage;
        run.failure_message = ex.what();
        log(LogLevel::Error, "run_probe: stage '" + current_stage + "' failed: " + ex.what());
    }
    return run;
}

struct RunComparison {
    ModelDelta delta;
    double zp_nrmse = 0.0;
};

inline RunComparison compare_runs(const ProbeRun& baseline, const ProbeRun& candidate,
                                  const ChangeThresholds& thresholds = {}) {
    const ProbeConfig& a = baseline.scenario.probe;
    const ProbeConfig& b = candidate.scenario.probe;
    if (a.order != b.order || a.bit_duration != b.bit_duration ||
        a.amplitude != b.amplitude || a.periods != b.periods ||
        a.oversampling != b.oversampling || a.nominal_frequency != b.nominal_frequency)
        throw Error("compare_runs: probe configurations differ");
    if (!baseline.circuit || !candidate.circuit)
        throw Error("compare_runs: both runs must carry a fitted circuit");
    RunComparison cmp;
    cmp.delta = detect_change(*baseline.circuit, *candidate.circuit, thresholds);
    cmp.zp_nrmse = nrmse(candidate.zp, baseline.zp);
    return cmp;
}

inline nlohmann::json waveform_to_json(const Waveform& w) {
    return nlohmann::json{
        {"dt", w.dt}, {"t_start", w.t_start}, {"unit", w.unit}, {"samples", w.samples}};
}

inline Waveform waveform_from_json(const nlohmann::json& j) {
    Waveform w;
    w.dt = j.at("dt").get<double>();
    w.t_start = j.at("t_start").get<double>();
    w.unit = j.value("unit", "");
    w.samples = j.at("samples").get<std::vector<double>>();
    return w;
}

inline nlohmann::json realized_to_json(const RealizedModel& model) {
    return nlohmann::json{
        {"A", detail::matrix_to_json(model.sys.A)},
        {"B", detail::matrix_to_json(model.sys.B)},
        {"C", detail::matrix_to_json(model.sys.C)},
        {"D", model.sys.D(0, 0)},
        {"domain",
         model.sys.domain == StateSpaceModel::Domain::Discrete ? "discrete" : "continuous"},
        {"dt", model.sys.dt},
        {"hankel_singular_values", model.hankel_singular_values},
        {"markov_error", model.markov_error}};
}

inline nlohmann::json metrics_to_json(const ProbeMetrics& m) {
    nlohmann::json j{{"data_window_seconds", m.data_window_seconds},
                     {"total_probe_seconds", m.total_probe_seconds},
                     {"data_window_cycles", m.data_window_cycles}};
    if (m.snr_db) j["snr_db"] = *m.snr_db;
    if (m.markov_error) j["markov_error"] = *m.markov_error;
    if (m.oracle_nrmse) j["oracle_nrmse"] = *m.oracle_nrmse;
    return j;
}

inline nlohmann::json run_to_json(const ProbeRun& run) {
    nlohmann::json j;
    j["scenario_id"] = run.scenario_id;
    j["scenario"] = to_json(run.scenario);
    j["metrics"] = metrics_to_json(run.metrics);
    j["zp"] = waveform_to_json(run.zp);
    j["oracle"] = waveform_to_json(run.oracle);
    if (run.realized) j["realized"] = realized_to_json(*run.realized);
    if (run.continuous) j["continuous"] = realized_to_json(*run.continuous);
    if (run.tf) j["tf"] = to_json(*run.tf);
    if (run.circuit) j["circuit"] = to_json(*run.circuit);
    j["failed_stage"] = run.failed_stage;
    j["failure_message"] = run.failure_message;
    nlohmann::json timings = nlohmann::json::array();
    for (const StageTiming& t : run.timings)
        timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    j["timings"] = timings;
    return j;
}

/// Partial inverse of run_to_json: restores the fields compare_runs needs.
inline ProbeRun run_from_json(const nlohmann::json& j) {
    ProbeRun run;
    run.scenario_id = j.at("scenario_id").get<std::string>();
    run.scenario = scenario_from_json(j.at("scenario"));
    run.zp = waveform_from_json(j.at("zp"));
    run.oracle = waveform_from_json(j.at("oracle"));
    if (j.contains("tf")) run.tf = tf2_from_json(j["tf"]);
    if (j.contains("circuit")) run.circuit = circuit_params_from_json(j["circuit"]);
    run.failed_stage = j.value("failed_stage", "");
    run.failure_message = j.value("failure_message", "");
    if (j.contains("metrics")) {
        const auto& m = j["metrics"];
        if (m.contains("snr_db")) run.metrics.snr_db = m["snr_db"].get<double>();
        if (m.contains("markov_error"))
            run.metrics.markov_error = m["markov_error"].get<double>();
        if (m.contains("oracle_nrmse"))
            run.metrics.oracle_nrmse = m["oracle_nrmse"].get<double>();
        run.metrics.data_window_seconds = m.value("data_window_seconds", 0.0);
        run.metrics.total_probe_seconds = m.value("total_probe_seconds", 0.0);
        run.metrics.data_window_cycles = m.value("data_window_cycles", 0.0);
    }
    return run;
}

struct ProbeReport {
    nlohmann::json document;
    std::vector<std::filesystem::path> files;
};

inline nlohmann::json run_summary_json(const ProbeRun& run) {
    nlohmann::json j;
    j["scenario_id"] = run.scenario_id;
    j["metrics"] = metrics_to_json(run.metrics);
    if (run.tf) j["tf"] = to_json(*run.tf);
    if (run.circuit) j["circuit"] = to_json(*run.circuit);
    if (run.realized)
        j["hankel_singular_values"] = run.realized->hankel_singular_values;
    j["failed_stage"] = run.failed_stage;
    j["failure_message"] = run.failure_message;
    nlohmann::json timings = nlohmann::json::array();
    for (const StageTiming& t : run.timings)
        timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    j["timings"] = timings;
    return j;
}

/// Writes report.json, per-run waveform CSVs, and the Table-1-style circuit
/// parameter CSV. The first run acts as the change-detection baseline.
inline ProbeReport emit_report(const std::vector<ProbeRun>& runs,
                               const std::filesystem::path& out_dir,
                               const ChangeThresholds& thresholds = {}) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    ProbeReport report;
    report.document["format_version"] = 1;
    report.document["runs"] = nlohmann::json::array();
    report.document["baseline_comparison"] = nlohmann::json::array();

    auto emit = [&](const fs::path& p, auto&& writer) {
        writer(p);
        report.files.push_back(p);
    };

    std::ostringstream table;
    table << "scenario,L_mH,R1_ohm,R2_ohm,C_uF,flagged\n";
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const ProbeRun& run = runs[k];
        report.document["runs"].push_back(run_summary_json(run));
        if (!run.zp.samples.empty())
            emit(out_dir / (run.scenario_id + "_zp.csv"),
                 [&](const fs::path& p) { write_csv(run.zp, p); });
        if (!run.oracle.samples.empty())
            emit(out_dir / (run.scenario_id + "_oracle.csv"),
                 [&](const fs::path& p) { write_csv(run.oracle, p); });
        if (!run.probe_signal.samples.empty())
            emit(out_dir / (run.scenario_id + "_p.csv"),
                 [&](const fs::path& p) { write_csv(run.probe_signal, p); });
        if (!run.measured.samples.empty())
            emit(out_dir / (run.scenario_id + "_y.csv"),
                 [&](const fs::path& p) { write_csv(run.measured, p); });
        if (run.qsss)
            emit(out_dir / (run.scenario_id + "_qsss.csv"),
                 [&](const fs::path& p) { write_csv(*run.qsss, p); });

        bool flagged = false;
        if (k > 0 && run.circuit && runs[0].circuit) {
            const ModelDelta delta = detect_change(*runs[0].circuit, *run.circuit, thresholds);
            flagged = delta.flagged;
            nlohmann::json jd = to_json(delta);
            jd["scenario_id"] = run.scenario_id;
            report.document["baseline_comparison"].push_back(jd);
        }
        if (run.circuit) {
            table << run.scenario_id << ',' << format_full(run.circuit->L * 1e3) << ','
                  << format_full(run.circuit->R1) << ',' << format_full(run.circuit->R2)
                  << ',' << format_full(run.circuit->C * 1e6) << ','
                  << (flagged ? "true" : "false") << "\n";
        }
    }

    emit(out_dir / "circuit_table.csv", [&](const fs::path& p) {
        std::ofstream out(p);
        if (!out) throw Error("cannot open " + p.string() + " for writing");
        out << table.str();
    });
    emit(out_dir / "report.json", [&](const fs::path& p) {
        std::ofstream out(p);
        if (!out) throw Error("cannot open " + p.string() + " for writing");
        out << report.document.dump(2) << "\n";
    });
    return report;
}

} // namespace pcprobe

#endif
