#ifndef PCPROBE_QSSS_HPP
#define PCPROBE_QSSS_HPP

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <vector>

#include <Eigen/Dense>

#include "pcprobe/circuit.hpp"
#include "pcprobe/waveform.hpp"

namespace pcprobe {

/// Sin-referenced phasor: x(t) = magnitude * sin(2*pi*frequency*t + angle).
struct Phasor {
    double magnitude = 0.0;
    double angle = 0.0; // radians, wrapped to (-pi, pi]
    double at_time = 0.0;
    double frequency = 0.0;

    std::complex<double> to_complex() const { return std::polar(magnitude, angle); }

    static Phasor from_complex(std::complex<double> v, double at_time, double frequency) {
        Phasor p;
        p.magnitude = std::abs(v);
        p.angle = p.magnitude == 0.0 ? 0.0 : std::arg(v);
        p.at_time = at_time;
        p.frequency = frequency;
        return p;
    }
};

/// Windowed least squares against regressor rows
/// [sin(w*(tau0 + k*dt)), cos(w*(tau0 + k*dt))]: x ~ A sin + B cos, so
/// magnitude = sqrt(A^2 + B^2) and angle = atan2(B, A). The regressor uses
/// absolute time, which makes the estimate invariant to the window position
/// for a stationary signal.
inline Phasor estimate_phasor(const Waveform& x, double f, double window_start,
                              int window_samples) {
    if (window_samples < 2) throw Error("estimate_phasor: window must have >= 2 samples");
    const std::ptrdiff_t first =
        static_cast<std::ptrdiff_t>(std::llround((window_start - x.t_start) / x.dt));
    if (first < 0 ||
        static_cast<std::size_t>(first + window_samples) > x.samples.size())
        throw Error("estimate_phasor: window outside waveform span");
    const double span = static_cast<double>(window_samples - 1) * x.dt;
    if (span < 0.25 / f)
        throw Error("estimate_phasor: window shorter than a quarter cycle");
    const double omega = 2.0 * M_PI * f;
    Eigen::MatrixXd phi(window_samples, 2);
    Eigen::VectorXd rhs(window_samples);
    for (int k = 0; k < window_samples; ++k) {
        const double t = window_start + static_cast<double>(k) * x.dt;
        phi(k, 0) = std::sin(omega * t);
        phi(k, 1) = std::cos(omega * t);
        rhs[k] = x.samples[static_cast<std::size_t>(first + k)];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (sv[1] == 0.0 || sv[0] / sv[1] > 1e6)
        throw Error("estimate_phasor: ill-conditioned window (too short or aliased)");
    const Eigen::Vector2d ab = svd.solve(rhs);
    Phasor p;
    p.magnitude = std::hypot(ab[0], ab[1]);
    p.angle = p.magnitude == 0.0 ? 0.0 : std::atan2(ab[1], ab[0]);
    p.at_time = window_start;
    p.frequency = f;
    return p;
}

/// Back-solves the embedded source phasor by nodal analysis of the equivalent
/// circuit with complex impedances jwL and 1/(jwC):
///   I_s = ((jwR2C + 1)/R2) V - [((jwR2C + 1)(R1 + jwL))/R2 + 1] I
inline Phasor source_phasor(const Phasor& v, const Phasor& i, const CircuitParams& params) {
    check_admissible(params, "source_phasor");
    if (v.frequency != i.frequency)
        throw Error("source_phasor: phasors have different frequencies");
    const double omega = 2.0 * M_PI * v.frequency;
    const std::complex<double> jw(0.0, omega);
    const std::complex<double> shunt = (jw * params.R2 * params.C + 1.0) / params.R2;
    const std::complex<double> is =
        shunt * v.to_complex() - (shunt * (params.R1 + jw * params.L) + 1.0) * i.to_complex();
    return Phasor::from_complex(is, i.at_time, i.frequency);
}

/// Diagnostic only: evaluates the same expression with a bare real w in place
/// of jw. Kept for comparison against the complex-impedance form.
inline std::complex<double> source_phasor_literal(const Phasor& v, const Phasor& i,
                                                  const CircuitParams& params) {
    const double omega = 2.0 * M_PI * v.frequency;
    const double shunt = (omega * params.R2 * params.C + 1.0) / params.R2;
    return shunt * v.to_complex() -
           (shunt * (params.R1 + omega * params.L) + 1.0) * i.to_complex();
}

/// Time series of terminal and source phasors plus per-window real/reactive
/// power.
struct QsssTrack {
    std::vector<double> t;
    std::vector<Phasor> voltage;
    std::vector<Phasor> current;
    std::vector<Phasor> source;
    std::vector<double> real_power;     // P = V*I*cos(theta - alpha)/2
    std::vector<double> reactive_power; // Q = V*I*sin(theta - alpha)/2
    double window = 0.0;
    double stride = 0.0;
};

inline QsssTrack track_qsss(const Waveform& v, const Waveform& i, const CircuitParams& params,
                            double f, double window, double stride) {
    check_compatible(v, i);
    if (window <= 0.0 || stride <= 0.0) throw Error("track_qsss: bad window or stride");
    const int wn = static_cast<int>(std::llround(window / v.dt));
    const int sn = std::max(1, static_cast<int>(std::llround(stride / v.dt)));
    if (wn < 2 || static_cast<std::size_t>(wn) > v.samples.size())
        throw Error("track_qsss: window does not fit the waveforms");
    QsssTrack track;
    track.window = window;
    track.stride = stride;
    for (std::size_t start = 0; start + static_cast<std::size_t>(wn) <= v.samples.size();
         start += static_cast<std::size_t>(sn)) {
        const double tau0 = v.time(start);
        const Phasor pv = estimate_phasor(v, f, tau0, wn);
        const Phasor pi = estimate_phasor(i, f, tau0, wn);
        track.t.push_back(tau0);
        track.voltage.push_back(pv);
        track.current.push_back(pi);
        track.source.push_back(source_phasor(pv, pi, params));
        const double s = pv.magnitude * pi.magnitude / 2.0;
        track.real_power.push_back(s * std::cos(pv.angle - pi.angle));
        track.reactive_power.push_back(s * std::sin(pv.angle - pi.angle));
    }
    return track;
}

inline void write_csv(const QsssTrack& track, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "t,V_mag,V_ang,I_mag,I_ang,Is_mag,Is_ang,P,Q\n";
    for (std::size_t k = 0; k < track.t.size(); ++k) {
        out << format_full(track.t[k]) << ',' << format_full(track.voltage[k].magnitude)
            << ',' << format_full(track.voltage[k].angle) << ','
            << format_full(track.current[k].magnitude) << ','
            << format_full(track.current[k].angle) << ','
            << format_full(track.source[k].magnitude) << ','
            << format_full(track.source[k].angle) << ',' << format_full(track.real_power[k])
            << ',' << format_full(track.reactive_power[k]) << "\n";
    }
}

} // namespace pcprobe

#endif
