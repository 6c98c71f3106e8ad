#ifndef PCPROBE_PLANT_HPP
#define PCPROBE_PLANT_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "pcprobe/circuit.hpp"
#include "pcprobe/state_space.hpp"

namespace pcprobe {

/// Two-state model of the equivalent circuit. States: inductor current
/// (= terminal current) and shunt capacitor voltage. Inputs: terminal
/// voltage V and embedded source current i_s. Output: terminal current.
inline StateSpaceModel build_plant_from_circuit(const CircuitParams& p) {
    check_admissible(p, "build_plant_from_circuit");
    StateSpaceModel sys;
    sys.A.resize(2, 2);
    sys.A << -p.R1 / p.L, -1.0 / p.L,
              1.0 / p.C, -1.0 / (p.R2 * p.C);
    sys.B.resize(2, 2);
    sys.B << 1.0 / p.L, 0.0,
             0.0, 1.0 / p.C;
    sys.C.resize(1, 2);
    sys.C << 1.0, 0.0;
    sys.D = Eigen::MatrixXd::Zero(1, 2);
    sys.domain = StateSpaceModel::Domain::Continuous;
    return sys;
}

/// One rung of an RLC ladder: a series R-L branch followed by an optional
/// shunt (R parallel C) to ground. shunt_resistance <= 0 means no shunt
/// resistor.
struct LadderSection {
    double series_resistance = 0.0;
    double series_inductance = 0.0;
    bool has_shunt = false;
    double shunt_resistance = 0.0;
    double shunt_capacitance = 0.0;
};

/// State-space model of the ladder seen from its input port (input: port
/// voltage, output: port current). Only the last section may omit its shunt,
/// in which case the ladder terminates in a short to ground.
inline StateSpaceModel build_ladder_plant(const std::vector<LadderSection>& sections) {
    if (sections.empty()) throw Error("build_ladder_plant: empty ladder");
    const int ns = static_cast<int>(sections.size());
    int n_caps = 0;
    for (int k = 0; k < ns; ++k) {
        const LadderSection& s = sections[k];
        if (s.series_inductance <= 0.0)
            throw Error("build_ladder_plant: series inductance must be > 0");
        if (s.has_shunt) {
            if (s.shunt_capacitance <= 0.0)
                throw Error("build_ladder_plant: shunt capacitance must be > 0");
            ++n_caps;
        } else if (k + 1 < ns) {
            throw Error("build_ladder_plant: only the final section may omit its shunt");
        }
    }
    // States: inductor currents i_1..i_ns, then capacitor voltages in order.
    const int n = ns + n_caps;
    StateSpaceModel sys;
    sys.A = Eigen::MatrixXd::Zero(n, n);
    sys.B = Eigen::MatrixXd::Zero(n, 1);
    sys.C = Eigen::MatrixXd::Zero(1, n);
    sys.D = Eigen::MatrixXd::Zero(1, 1);
    std::vector<int> cap_index(ns, -1);
    int ci = ns;
    for (int k = 0; k < ns; ++k)
        if (sections[k].has_shunt) cap_index[k] = ci++;

    for (int k = 0; k < ns; ++k) {
        const LadderSection& s = sections[k];
        // L_k di_k/dt = v_{k-1} - R_k i_k - v_k
        sys.A(k, k) = -s.series_resistance / s.series_inductance;
        if (k == 0) sys.B(0, 0) = 1.0 / s.series_inductance;
        else sys.A(k, cap_index[k - 1]) += 1.0 / s.series_inductance;
        if (cap_index[k] >= 0) sys.A(k, cap_index[k]) -= 1.0 / s.series_inductance;
        // C_k dv_k/dt = i_k - i_{k+1} - v_k / Rsh_k
        if (s.has_shunt) {
            const int v = cap_index[k];
            sys.A(v, k) += 1.0 / s.shunt_capacitance;
            if (k + 1 < ns) sys.A(v, k + 1) -= 1.0 / s.shunt_capacitance;
            if (s.shunt_resistance > 0.0)
                sys.A(v, v) -= 1.0 / (s.shunt_resistance * s.shunt_capacitance);
        }
    }
    sys.C(0, 0) = 1.0;
    sys.domain = StateSpaceModel::Domain::Continuous;
    return sys;
}

/// Piecewise-linear profile: linear interpolation between breakpoints,
/// constant extrapolation outside.
struct PiecewiseLinear {
    std::vector<std::pair<double, double>> points; // (time, value), sorted

    PiecewiseLinear() = default;
    explicit PiecewiseLinear(double constant) : points{{0.0, constant}} {}
    PiecewiseLinear(std::initializer_list<std::pair<double, double>> pts) : points(pts) {}

    double operator()(double t) const {
        if (points.empty()) throw Error("PiecewiseLinear: empty profile");
        if (t <= points.front().first) return points.front().second;
        if (t >= points.back().first) return points.back().second;
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (t <= points[i].first) {
                const auto& [t0, v0] = points[i - 1];
                const auto& [t1, v1] = points[i];
                return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
            }
        }
        return points.back().second;
    }

    double max_slope() const {
        double s = 0.0;
        for (std::size_t i = 1; i < points.size(); ++i) {
            const double dt = points[i].first - points[i - 1].first;
            if (dt > 0.0)
                s = std::max(s, std::abs(points[i].second - points[i - 1].second) / dt);
        }
        return s;
    }
};

/// Samples i_s(t) = I_s(t) * sin(2*pi*f*t + beta(t)). Profiles faster than
/// 0.1 * f * I_s violate the quasi-steady-state assumption and set the
/// warning flag (the waveform is still produced).
inline Waveform qsss_source_waveform(const PiecewiseLinear& magnitude,
                                     const PiecewiseLinear& angle, double f, double dt,
                                     double horizon, bool* rate_warning = nullptr) {
    if (dt <= 0.0 || horizon <= 0.0) throw Error("qsss_source_waveform: bad dt or horizon");
    if (rate_warning) *rate_warning = false;
    double min_mag = std::abs(magnitude.points.empty() ? 0.0 : magnitude.points.front().second);
    for (const auto& [t, v] : magnitude.points) min_mag = std::min(min_mag, std::abs(v));
    if (magnitude.max_slope() >= 0.1 * f * min_mag) {
        log(LogLevel::Warn, "qsss_source_waveform: magnitude profile violates the "
                            "slow-variation rate bound");
        if (rate_warning) *rate_warning = true;
    }
    const double omega = 2.0 * M_PI * f;
    Waveform w;
    w.dt = dt;
    w.unit = "A";
    const std::size_t count = static_cast<std::size_t>(std::llround(horizon / dt));
    w.samples.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = static_cast<double>(k) * dt;
        w.samples[k] = magnitude(t) * std::sin(omega * t + angle(t));
    }
    return w;
}

} // namespace pcprobe

#endif
