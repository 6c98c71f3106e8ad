#ifndef PCPROBE_HANKEL_HPP
#define PCPROBE_HANKEL_HPP

#include <vector>

#include <Eigen/Dense>

#include "pcprobe/common.hpp"
#include "pcprobe/waveform.hpp"

namespace pcprobe {

/// Hankel matrix of Markov parameters and its one-step shift. The source
/// sequence is 1-based in the usual system-identification convention:
/// samples[0] of the input waveform is z_p(1), the first Markov parameter.
struct HankelPair {
    Eigen::MatrixXd H;       // H(i,j) = z_p(i + j - 1), 1-based i, j
    Eigen::MatrixXd H_shift; // H_shift(i,j) = z_p(i + j)
    int m = 0;
    std::vector<double> source; // z_p(1 .. 2m+1)
};

/// Builds the m x m Hankel pair from z_p. Warns (via the flag) when the
/// response has not settled near zero before 2m steps: tail samples past
/// 2m-5 above 5% of the peak suggest the window is too short.
inline HankelPair build_hankel(const Waveform& z_p, int m, bool* settled_warning = nullptr) {
    if (m < 1) throw Error("build_hankel: m must be >= 1");
    if (static_cast<std::size_t>(2 * m + 1) > z_p.samples.size())
        throw Error("build_hankel: window 2m+1 = " + std::to_string(2 * m + 1) +
                    " exceeds data length " + std::to_string(z_p.samples.size()));
    HankelPair hp;
    hp.m = m;
    hp.source.assign(z_p.samples.begin(), z_p.samples.begin() + 2 * m + 1);
    hp.H.resize(m, m);
    hp.H_shift.resize(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            hp.H(i, j) = hp.source[static_cast<std::size_t>(i + j)];
            hp.H_shift(i, j) = hp.source[static_cast<std::size_t>(i + j + 1)];
        }
    if (settled_warning) {
        double peak = 0.0, tail = 0.0;
        for (int k = 0; k < 2 * m + 1; ++k)
            peak = std::max(peak, std::abs(hp.source[static_cast<std::size_t>(k)]));
        for (int k = std::max(0, 2 * m - 5); k < 2 * m + 1; ++k)
            tail = std::max(tail, std::abs(hp.source[static_cast<std::size_t>(k)]));
        *settled_warning = peak > 0.0 && tail > 0.05 * peak;
        if (*settled_warning)
            log(LogLevel::Warn, "build_hankel: response has not settled near zero "
                                "before 2m time steps");
    }
    return hp;
}

} // namespace pcprobe

#endif
