#ifndef PCPROBE_WAVEFORM_HPP
#define PCPROBE_WAVEFORM_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pcprobe/common.hpp"

namespace pcprobe {

/// Uniformly sampled real signal with timestep and unit tag.
struct Waveform {
    double dt = 0.0;
    double t_start = 0.0;
    std::vector<double> samples;
    std::string unit;

    std::size_t size() const { return samples.size(); }
    double time(std::size_t k) const { return t_start + static_cast<double>(k) * dt; }
    double duration() const { return static_cast<double>(samples.size()) * dt; }

    double& operator[](std::size_t k) { return samples[k]; }
    double operator[](std::size_t k) const { return samples[k]; }
};

inline void check_compatible(const Waveform& a, const Waveform& b) {
    if (a.dt != b.dt)
        throw Error("waveform dt mismatch: " + std::to_string(a.dt) + " vs " + std::to_string(b.dt));
    if (a.samples.size() != b.samples.size())
        throw Error("waveform length mismatch: " + std::to_string(a.samples.size()) +
                    " vs " + std::to_string(b.samples.size()));
}

inline Waveform operator+(const Waveform& a, const Waveform& b) {
    check_compatible(a, b);
    Waveform out = a;
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] += b.samples[i];
    return out;
}

inline Waveform operator-(const Waveform& a, const Waveform& b) {
    check_compatible(a, b);
    Waveform out = a;
    for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] -= b.samples[i];
    return out;
}

inline Waveform operator*(double g, const Waveform& a) {
    Waveform out = a;
    for (double& x : out.samples) x *= g;
    return out;
}

inline double rms(const Waveform& w) {
    if (w.samples.empty()) return 0.0;
    double acc = 0.0;
    for (double x : w.samples) acc += x * x;
    return std::sqrt(acc / static_cast<double>(w.samples.size()));
}

inline double peak_abs(const Waveform& w) {
    double p = 0.0;
    for (double x : w.samples) p = std::max(p, std::abs(x));
    return p;
}

/// Signal-to-noise ratio 20*log10(rms(y_s)/rms(y_p)) in dB.
inline double snr_db(const Waveform& y_s, const Waveform& y_p) {
    check_compatible(y_s, y_p);
    const double rp = rms(y_p);
    if (rp == 0.0) throw Error("snr_db: zero-rms noise waveform (infinite SNR)");
    return 20.0 * std::log10(rms(y_s) / rp);
}

/// RMS error between x and ref over the first `count` samples, normalized by
/// the peak magnitude of ref over that window.
inline double nrmse(const Waveform& x, const Waveform& ref, std::size_t count = 0) {
    if (count == 0) count = std::min(x.size(), ref.size());
    if (count > x.size() || count > ref.size())
        throw Error("nrmse: window longer than waveforms");
    double err = 0.0, peak = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = x.samples[i] - ref.samples[i];
        err += d * d;
        peak = std::max(peak, std::abs(ref.samples[i]));
    }
    if (peak == 0.0) throw Error("nrmse: reference is identically zero over the window");
    return std::sqrt(err / static_cast<double>(count)) / peak;
}

inline Waveform slice(const Waveform& w, std::size_t first, std::size_t count) {
    if (first + count > w.samples.size()) throw Error("slice: out of range");
    Waveform out;
    out.dt = w.dt;
    out.t_start = w.time(first);
    out.unit = w.unit;
    out.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(first),
                       w.samples.begin() + static_cast<std::ptrdiff_t>(first + count));
    return out;
}

inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_csv(const Waveform& w, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    out << "# dt=" << format_full(w.dt) << " t_start=" << format_full(w.t_start)
        << " unit=" << (w.unit.empty() ? "dimensionless" : w.unit) << "\n";
    for (double x : w.samples) out << format_full(x) << "\n";
    if (!out) throw Error("write failed for " + path.string());
}

inline Waveform read_waveform_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    Waveform w;
    std::istringstream hs(header);
    std::string tok;
    while (hs >> tok) {
        if (tok.rfind("dt=", 0) == 0) w.dt = std::stod(tok.substr(3));
        else if (tok.rfind("t_start=", 0) == 0) w.t_start = std::stod(tok.substr(8));
        else if (tok.rfind("unit=", 0) == 0) w.unit = tok.substr(5);
    }
    if (w.dt <= 0.0) throw Error("bad waveform header in " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        w.samples.push_back(std::stod(line));
    }
    return w;
}

} // namespace pcprobe

#endif
