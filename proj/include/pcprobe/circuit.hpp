#ifndef PCPROBE_CIRCUIT_HPP
#define PCPROBE_CIRCUIT_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <utility>

#include <nlohmann/json.hpp>

#include "pcprobe/common.hpp"

namespace pcprobe {

/// Second-order admittance model (a*s + b)/(s^2 + c*s + d), monic denominator.
struct TransferFunction2 {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;

    bool is_stable() const { return c > 0.0 && d > 0.0; }

    /// d ~ 0 means the fit collapsed toward first order (missing dynamics).
    bool near_degenerate() const { return std::abs(d) < 1e-9 * c * c; }

    std::pair<std::complex<double>, std::complex<double>> poles() const {
        const std::complex<double> disc = std::sqrt(std::complex<double>(c * c - 4.0 * d, 0.0));
        return {(-c + disc) / 2.0, (-c - disc) / 2.0};
    }

    std::complex<double> eval(std::complex<double> s) const {
        return (a * s + b) / (s * s + c * s + d);
    }
};

/// Two-port equivalent of the feeder: series R1-L from the terminal into a
/// node with shunt R2 parallel C and an embedded current source. R1 may be
/// negative; the circuit is a fitting device, not a physical network.
struct CircuitParams {
    double L = 0.0;  // henries
    double R1 = 0.0; // ohms
    double R2 = 0.0; // ohms
    double C = 0.0;  // farads
};

inline void check_admissible(const CircuitParams& p, const char* where) {
    if (p.L <= 0.0) throw Error(std::string(where) + ": L must be > 0");
    if (p.C <= 0.0) throw Error(std::string(where) + ": C must be > 0");
    if (p.R2 == 0.0) throw Error(std::string(where) + ": R2 must be nonzero");
}

inline TransferFunction2 circuit_to_tf(const CircuitParams& p) {
    check_admissible(p, "circuit_to_tf");
    const double lrc = p.L * p.R2 * p.C;
    TransferFunction2 tf;
    tf.a = 1.0 / p.L;
    tf.b = 1.0 / lrc;
    tf.c = (p.L + p.R1 * p.R2 * p.C) / lrc;
    tf.d = (p.R1 + p.R2) / lrc;
    return tf;
}

inline CircuitParams tf_to_circuit(const TransferFunction2& tf) {
    if (tf.a == 0.0) throw Error("tf_to_circuit: a = 0 (no inductive path)");
    const double a = tf.a, b = tf.b, c = tf.c, d = tf.d;
    const double denom = d * a * a - a * b * c + b * b;
    const double scale = std::max({std::abs(d * a * a), std::abs(a * b * c), b * b});
    if (std::abs(denom) < 1e-9 * scale)
        throw Error("tf_to_circuit: degenerate circuit (d*a^2 - a*b*c + b^2 vanishes)");
    if (b == 0.0) throw Error("tf_to_circuit: b = 0 (no DC path, R2 undefined)");
    CircuitParams p;
    p.L = 1.0 / a;
    p.R1 = (a * c - b) / (a * a);
    p.R2 = denom / (b * a * a);
    p.C = a * a * a / denom;
    if (p.L <= 0.0 || p.C <= 0.0)
        throw Error("tf_to_circuit: fit yields non-positive L or C "
                    "(relative-degree-1 assumption failed)");
    return p;
}

struct ChangeThresholds {
    double L = 0.10;
    double R1 = 0.10;
    double R2 = 0.10;
    double C = 0.10;
};

struct ModelDelta {
    CircuitParams baseline;
    CircuitParams current;
    double delta_L = 0.0;  // |change| / |baseline|, per parameter
    double delta_R1 = 0.0;
    double delta_R2 = 0.0;
    double delta_C = 0.0;
    bool flagged = false;
};

inline ModelDelta detect_change(const CircuitParams& baseline, const CircuitParams& current,
                                const ChangeThresholds& thresholds = {}) {
    check_admissible(baseline, "detect_change(baseline)");
    check_admissible(current, "detect_change(current)");
    ModelDelta delta;
    delta.baseline = baseline;
    delta.current = current;
    delta.delta_L = std::abs(current.L - baseline.L) / std::abs(baseline.L);
    delta.delta_R1 = std::abs(current.R1 - baseline.R1) / std::abs(baseline.R1);
    delta.delta_R2 = std::abs(current.R2 - baseline.R2) / std::abs(baseline.R2);
    delta.delta_C = std::abs(current.C - baseline.C) / std::abs(baseline.C);
    delta.flagged = delta.delta_L > thresholds.L || delta.delta_R1 > thresholds.R1 ||
                    delta.delta_R2 > thresholds.R2 || delta.delta_C > thresholds.C;
    return delta;
}

inline nlohmann::json to_json(const CircuitParams& p) {
    return nlohmann::json{{"L", p.L}, {"R1", p.R1}, {"R2", p.R2}, {"C", p.C}};
}

inline CircuitParams circuit_params_from_json(const nlohmann::json& j) {
    return CircuitParams{j.at("L").get<double>(), j.at("R1").get<double>(),
                         j.at("R2").get<double>(), j.at("C").get<double>()};
}

inline nlohmann::json to_json(const TransferFunction2& tf) {
    return nlohmann::json{{"a", tf.a}, {"b", tf.b}, {"c", tf.c}, {"d", tf.d}};
}

inline TransferFunction2 tf2_from_json(const nlohmann::json& j) {
    return TransferFunction2{j.at("a").get<double>(), j.at("b").get<double>(),
                             j.at("c").get<double>(), j.at("d").get<double>()};
}

inline nlohmann::json to_json(const ModelDelta& delta) {
    return nlohmann::json{{"baseline", to_json(delta.baseline)},
                          {"current", to_json(delta.current)},
                          {"delta_L", delta.delta_L},
                          {"delta_R1", delta.delta_R1},
                          {"delta_R2", delta.delta_R2},
                          {"delta_C", delta.delta_C},
                          {"flagged", delta.flagged}};
}

} // namespace pcprobe

#endif
