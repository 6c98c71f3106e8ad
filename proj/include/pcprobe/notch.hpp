#ifndef PCPROBE_NOTCH_HPP
#define PCPROBE_NOTCH_HPP

#include <cmath>
#include <complex>

#include "pcprobe/waveform.hpp"

namespace pcprobe {

/// Second-order recursive notch (constrained band-stop biquad). The zeros sit
/// exactly on the unit circle at the notch frequency, so a steady sinusoid at
/// f0 is removed entirely once the pole transient has decayed.
struct BiquadNotch {
    double b0, b1, b2; // feedforward
    double a1, a2;     // feedback (a0 normalized to 1)

    static BiquadNotch design(double f0, double sample_rate, double quality) {
        if (f0 <= 0.0 || quality <= 0.0) throw Error("BiquadNotch: f0 and Q must be > 0");
        if (2.0 * f0 >= sample_rate)
            throw Error("BiquadNotch: notch frequency at or above Nyquist");
        const double w0 = 2.0 * M_PI * f0 / sample_rate;
        const double alpha = std::sin(w0) / (2.0 * quality);
        const double a0 = 1.0 + alpha;
        BiquadNotch f{};
        f.b0 = 1.0 / a0;
        f.b1 = -2.0 * std::cos(w0) / a0;
        f.b2 = 1.0 / a0;
        f.a1 = -2.0 * std::cos(w0) / a0;
        f.a2 = (1.0 - alpha) / a0;
        return f;
    }

    /// Frequency response at f (Hz) for the given sample rate.
    std::complex<double> response(double f, double sample_rate) const {
        const std::complex<double> z = std::polar(1.0, 2.0 * M_PI * f / sample_rate);
        const std::complex<double> zi = 1.0 / z;
        return (b0 + b1 * zi + b2 * zi * zi) / (1.0 + a1 * zi + a2 * zi * zi);
    }

    /// Causal single-pass filtering (direct form II transposed).
    std::vector<double> apply(const std::vector<double>& x) const {
        std::vector<double> y(x.size());
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double out = b0 * x[i] + s1;
            s1 = b1 * x[i] - a1 * out + s2;
            s2 = b2 * x[i] - a2 * out;
            y[i] = out;
        }
        return y;
    }
};

inline Waveform notch_filter(const Waveform& x, double f0, double quality = 30.0) {
    const double fs = 1.0 / x.dt;
    const BiquadNotch filt = BiquadNotch::design(f0, fs, quality);
    Waveform y = x;
    y.samples = filt.apply(x.samples);
    return y;
}

/// Undoes the notch filter on a circularly periodic sequence by dividing its
/// DFT bins by the filter's known frequency response. Bins where the notch is
/// nearly dead (|H| <= floor_gain) are left untouched rather than amplified.
inline Waveform notch_deconvolve(const Waveform& x, double f0, double quality = 30.0,
                                 double floor_gain = 1e-2) {
    if (x.samples.empty()) throw Error("notch_deconvolve: empty waveform");
    const double fs = 1.0 / x.dt;
    const BiquadNotch filt = BiquadNotch::design(f0, fs, quality);
    const std::size_t n = x.samples.size();
    const double nd = static_cast<double>(n);
    std::vector<std::complex<double>> bins(n, 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        std::complex<double> acc = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            acc += x.samples[k] *
                   std::polar(1.0, -2.0 * M_PI * static_cast<double>(l) * static_cast<double>(k) / nd);
        const std::complex<double> h = filt.response(static_cast<double>(l) * fs / nd, fs);
        bins[l] = std::abs(h) > floor_gain ? acc / h : acc;
    }
    Waveform y = x;
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t l = 0; l < n; ++l)
            acc += bins[l] *
                   std::polar(1.0, 2.0 * M_PI * static_cast<double>(l) * static_cast<double>(k) / nd);
        y.samples[k] = acc.real() / nd;
    }
    return y;
}

} // namespace pcprobe

#endif
