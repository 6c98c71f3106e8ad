#ifndef PCPROBE_CORRELATE_HPP
#define PCPROBE_CORRELATE_HPP

#include <cmath>

#include "pcprobe/waveform.hpp"

namespace pcprobe {

/// Circular cross-correlation of the measured output with one period of the
/// reference signal, computed as a Riemann sum over the final full period of
/// y:
///
///   z[k] = sum_i y[i] * s[(i - k) mod M] * dt,   k = 0..M-1
///
/// so that z sampled on the t0 grid approximates the discrete Markov
/// parameters of the probed channel (lag k picks out the response k samples
/// after the chip that caused it).
inline Waveform circular_xcorr(const Waveform& y, const Waveform& s) {
    if (s.samples.empty() || y.samples.empty()) throw Error("circular_xcorr: empty waveform");
    if (std::abs(y.dt - s.dt) > 1e-12 * s.dt)
        throw Error("circular_xcorr: dt mismatch");
    const std::size_t m = s.samples.size();
    if (y.samples.size() % m != 0)
        throw Error("circular_xcorr: y must contain an integer number of probe periods");
    const std::size_t offset = y.samples.size() - m; // final full period
    Waveform z;
    z.dt = y.dt;
    z.t_start = 0.0;
    if (y.unit == "A" && s.unit == "1/(V*s)") z.unit = "A/V";
    else if (y.unit == "V" && s.unit == "1/(V*s)") z.unit = "dimensionless";
    else z.unit = y.unit + "*" + s.unit + "*s";
    z.samples.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
        double acc = 0.0;
        // s index (i - k) mod m, starting at i = 0 -> (m - k) mod m
        std::size_t j = (m - k) % m;
        for (std::size_t i = 0; i < m; ++i) {
            acc += y.samples[offset + i] * s.samples[j];
            if (++j == m) j = 0;
        }
        z.samples[k] = acc * y.dt;
    }
    return z;
}

/// Removes the constant floor the two-valued MLS autocorrelation (-1 at every
/// off-peak lag) leaves under z_p. For a periodic noiseless probe response
/// sum_k z[k] = sum(g)/N, so g[k] = (z[k] + sum(z)) * N / (N + 1) exactly.
inline Waveform prbs_debias(const Waveform& z) {
    if (z.samples.empty()) throw Error("prbs_debias: empty waveform");
    double total = 0.0;
    for (double v : z.samples) total += v;
    const double n = static_cast<double>(z.samples.size());
    Waveform g = z;
    for (double& v : g.samples) v = (v + total) * n / (n + 1.0);
    return g;
}

} // namespace pcprobe

#endif
