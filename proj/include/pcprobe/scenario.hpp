#ifndef PCPROBE_SCENARIO_HPP
#define PCPROBE_SCENARIO_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcprobe/circuit.hpp"
#include "pcprobe/plant.hpp"
#include "pcprobe/probe.hpp"
#include "pcprobe/state_space.hpp"

namespace pcprobe {

struct OperatingVoltage {
    double amplitude = 0.0; // volts peak; 0 disables the 60 Hz drive
    double phase = 0.0;     // radians
};

struct QsssSchedule {
    PiecewiseLinear magnitude; // amperes
    PiecewiseLinear angle;     // radians
};

/// High-impedance branch in parallel with the feeder terminal: an EMF at the
/// nominal frequency behind a series resistance. It adds
/// (v_terminal - v_source)/resistance to the measured current.
struct ParallelBranch {
    double resistance = 0.0;
    double source_amplitude = 0.0;
    double source_phase = 0.0;
};

struct NotchSettings {
    bool enabled = true;
    double quality = 30.0;
};

struct IdentSettings {
    double energy_threshold = 0.99;
    std::optional<int> force_order;
    double memory_length = 0.05; // seconds
};

using PlantSpec = std::variant<CircuitParams, std::vector<LadderSection>, StateSpaceModel>;

struct ScenarioConfig {
    std::string id;
    PlantSpec plant;
    OperatingVoltage operating_voltage;
    ProbeConfig probe;
    NoiseConfig noise;
    std::optional<QsssSchedule> qsss_source;
    std::optional<ParallelBranch> parallel_branch;
    NotchSettings notch;
    IdentSettings ident;
    int warmup_periods = 10;       // drive-only periods before the probe starts
    double validation_bandwidth_hz = 700.0; // assumed channel bandwidth for validate
};

inline StateSpaceModel build_scenario_plant(const ScenarioConfig& scenario) {
    if (const auto* params = std::get_if<CircuitParams>(&scenario.plant))
        return build_plant_from_circuit(*params);
    if (const auto* sections = std::get_if<std::vector<LadderSection>>(&scenario.plant))
        return build_ladder_plant(*sections);
    return std::get<StateSpaceModel>(scenario.plant);
}

namespace detail {

inline PiecewiseLinear piecewise_from_json(const nlohmann::json& j) {
    PiecewiseLinear p;
    if (j.is_number()) {
        p.points.emplace_back(0.0, j.get<double>());
        return p;
    }
    for (const auto& pt : j) p.points.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
    if (p.points.empty()) throw Error("scenario: empty schedule profile");
    return p;
}

inline nlohmann::json piecewise_to_json(const PiecewiseLinear& p) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [t, v] : p.points) j.push_back({t, v});
    return j;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.size();
    if (rows == 0) throw Error("scenario: empty matrix");
    const auto cols = j.at(0).size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (j.at(i).size() != cols) throw Error("scenario: ragged matrix");
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
    }
    return m;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        j.push_back(row);
    }
    return j;
}

} // namespace detail

inline PlantSpec plant_spec_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "circuit") return circuit_params_from_json(j);
    if (type == "ladder") {
        std::vector<LadderSection> sections;
        for (const auto& js : j.at("sections")) {
            LadderSection s;
            s.series_resistance = js.at("R").get<double>();
            s.series_inductance = js.at("L").get<double>();
            if (js.contains("shunt")) {
                s.has_shunt = true;
                s.shunt_capacitance = js.at("shunt").at("C").get<double>();
                s.shunt_resistance = js.at("shunt").value("R", 0.0);
            }
            sections.push_back(s);
        }
        return sections;
    }
    if (type == "state_space") {
        StateSpaceModel sys;
        sys.A = detail::matrix_from_json(j.at("A"));
        sys.B = detail::matrix_from_json(j.at("B"));
        sys.C = detail::matrix_from_json(j.at("C"));
        sys.D = detail::matrix_from_json(j.at("D"));
        sys.domain = StateSpaceModel::Domain::Continuous;
        sys.check_dimensions();
        return sys;
    }
    throw Error("scenario: unknown plant type '" + type + "'");
}

inline nlohmann::json plant_spec_to_json(const PlantSpec& plant) {
    nlohmann::json j;
    if (const auto* params = std::get_if<CircuitParams>(&plant)) {
        j = to_json(*params);
        j["type"] = "circuit";
    } else if (const auto* sections = std::get_if<std::vector<LadderSection>>(&plant)) {
        j["type"] = "ladder";
        j["sections"] = nlohmann::json::array();
        for (const LadderSection& s : *sections) {
            nlohmann::json js{{"R", s.series_resistance}, {"L", s.series_inductance}};
            if (s.has_shunt)
                js["shunt"] = {{"R", s.shunt_resistance}, {"C", s.shunt_capacitance}};
            j["sections"].push_back(js);
        }
    } else {
        const auto& sys = std::get<StateSpaceModel>(plant);
        j["type"] = "state_space";
        j["A"] = detail::matrix_to_json(sys.A);
        j["B"] = detail::matrix_to_json(sys.B);
        j["C"] = detail::matrix_to_json(sys.C);
        j["D"] = detail::matrix_to_json(sys.D);
    }
    return j;
}

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    ScenarioConfig s;
    s.id = j.at("id").get<std::string>();
    s.plant = plant_spec_from_json(j.at("plant"));
    if (j.contains("operating_voltage")) {
        s.operating_voltage.amplitude = j["operating_voltage"].value("amplitude", 0.0);
        s.operating_voltage.phase = j["operating_voltage"].value("phase", 0.0);
    }
    if (j.contains("probe")) {
        const auto& jp = j["probe"];
        s.probe.order = jp.value("order", s.probe.order);
        s.probe.bit_duration = jp.value("bit_duration", s.probe.bit_duration);
        s.probe.amplitude = jp.value("amplitude", s.probe.amplitude);
        s.probe.periods = jp.value("periods", s.probe.periods);
        s.probe.oversampling = jp.value("oversampling", s.probe.oversampling);
        s.probe.nominal_frequency = jp.value("nominal_frequency", s.probe.nominal_frequency);
    }
    if (j.contains("noise")) {
        s.noise.measurement_sigma = j["noise"].value("measurement_sigma", 0.0);
        s.noise.rng_seed = j["noise"].value("rng_seed", std::uint64_t{0});
    }
    if (j.contains("qsss_source")) {
        QsssSchedule sched;
        sched.magnitude = detail::piecewise_from_json(j["qsss_source"].at("magnitude"));
        sched.angle = detail::piecewise_from_json(j["qsss_source"].at("angle"));
        s.qsss_source = sched;
    }
    if (j.contains("parallel_branch")) {
        ParallelBranch b;
        b.resistance = j["parallel_branch"].at("resistance").get<double>();
        b.source_amplitude = j["parallel_branch"].value("source_amplitude", 0.0);
        b.source_phase = j["parallel_branch"].value("source_phase", 0.0);
        s.parallel_branch = b;
    }
    if (j.contains("notch")) {
        s.notch.enabled = j["notch"].value("enabled", true);
        s.notch.quality = j["notch"].value("quality", 30.0);
    }
    if (j.contains("ident")) {
        s.ident.energy_threshold = j["ident"].value("energy_threshold", 0.99);
        if (j["ident"].contains("force_order") && !j["ident"]["force_order"].is_null())
            s.ident.force_order = j["ident"]["force_order"].get<int>();
        s.ident.memory_length = j["ident"].value("memory_length", 0.05);
    }
    s.warmup_periods = j.value("warmup_periods", 10);
    s.validation_bandwidth_hz = j.value("validation_bandwidth_hz", 700.0);
    return s;
}

inline nlohmann::json to_json(const ScenarioConfig& s) {
    nlohmann::json j;
    j["id"] = s.id;
    j["plant"] = plant_spec_to_json(s.plant);
    j["operating_voltage"] = {{"amplitude", s.operating_voltage.amplitude},
                              {"phase", s.operating_voltage.phase}};
    j["probe"] = {{"order", s.probe.order},
                  {"bit_duration", s.probe.bit_duration},
                  {"amplitude", s.probe.amplitude},
                  {"periods", s.probe.periods},
                  {"oversampling", s.probe.oversampling},
                  {"nominal_frequency", s.probe.nominal_frequency}};
    j["noise"] = {{"measurement_sigma", s.noise.measurement_sigma},
                  {"rng_seed", s.noise.rng_seed}};
    if (s.qsss_source)
        j["qsss_source"] = {{"magnitude", detail::piecewise_to_json(s.qsss_source->magnitude)},
                            {"angle", detail::piecewise_to_json(s.qsss_source->angle)}};
    if (s.parallel_branch)
        j["parallel_branch"] = {{"resistance", s.parallel_branch->resistance},
                                {"source_amplitude", s.parallel_branch->source_amplitude},
                                {"source_phase", s.parallel_branch->source_phase}};
    j["notch"] = {{"enabled", s.notch.enabled}, {"quality", s.notch.quality}};
    j["ident"] = {{"energy_threshold", s.ident.energy_threshold},
                  {"memory_length", s.ident.memory_length}};
    if (s.ident.force_order) j["ident"]["force_order"] = *s.ident.force_order;
    j["warmup_periods"] = s.warmup_periods;
    j["validation_bandwidth_hz"] = s.validation_bandwidth_hz;
    return j;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario file " + path.string());
    nlohmann::json j;
    in >> j;
    return scenario_from_json(j);
}

} // namespace pcprobe

#endif
