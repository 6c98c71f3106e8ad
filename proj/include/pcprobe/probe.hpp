#ifndef PCPROBE_PROBE_HPP
#define PCPROBE_PROBE_HPP

#include <cmath>
#include <string>
#include <vector>

#include "pcprobe/mls.hpp"
#include "pcprobe/waveform.hpp"

namespace pcprobe {

struct ProbeConfig {
    int order = 10;
    double bit_duration = 1e-4;      // t0, seconds
    double amplitude = 50.0;         // volts
    int periods = 2;                 // injected PRBPT periods
    int oversampling = 10;           // simulation samples per chip
    double nominal_frequency = 60.0; // Hz

    std::size_t chips_per_period() const { return (std::size_t{1} << order) - 1; }
    double period() const { return static_cast<double>(chips_per_period()) * bit_duration; }

    void check() const {
        if (bit_duration <= 0.0) throw Error("ProbeConfig: bit_duration must be > 0");
        if (amplitude <= 0.0) throw Error("ProbeConfig: amplitude must be > 0");
        if (oversampling < 1) throw Error("ProbeConfig: oversampling must be >= 1");
        if (periods < 1) throw Error("ProbeConfig: periods must be >= 1");
    }
};

/// Pseudo-random binary pulse train: each chip held for `oversampling`
/// samples, scaled by the probe amplitude, repeated for `periods` periods.
inline Waveform synthesize_prbpt(const ChipSequence& chips, const ProbeConfig& config) {
    config.check();
    if (chips.order != config.order)
        throw Error("synthesize_prbpt: chip order " + std::to_string(chips.order) +
                    " does not match config order " + std::to_string(config.order));
    Waveform p;
    p.dt = config.bit_duration / config.oversampling;
    p.unit = "V";
    p.samples.reserve(chips.length() * config.oversampling * config.periods);
    for (int rep = 0; rep < config.periods; ++rep)
        for (int c : chips.chips)
            for (int s = 0; s < config.oversampling; ++s)
                p.samples.push_back(config.amplitude * c);
    return p;
}

/// One period of the reference signal s(t): same chip pattern as the probe
/// with magnitude 1/(amplitude * T_p).
inline Waveform reference_signal(const ChipSequence& chips, const ProbeConfig& config) {
    config.check();
    if (chips.order != config.order)
        throw Error("reference_signal: chip order mismatch");
    Waveform s;
    s.dt = config.bit_duration / config.oversampling;
    s.unit = "1/(V*s)";
    const double mag = 1.0 / (config.amplitude * config.period());
    s.samples.reserve(chips.length() * config.oversampling);
    for (int c : chips.chips)
        for (int k = 0; k < config.oversampling; ++k)
            s.samples.push_back(mag * c);
    return s;
}

struct ValidationReport {
    bool pass = true;
    std::vector<std::string> violations;
    std::string binding_constraint; // name of the first violated constraint
};

/// Checks the bit-duration bound t0 <= 2*pi/(5*bandwidth), the order bound
/// n >= log2(T_p/t0 + 1), and T_p >= memory_length.
inline ValidationReport validate_config(const ProbeConfig& config, double bandwidth_rad,
                                        double memory_length) {
    if (bandwidth_rad <= 0.0) throw Error("validate_config: bandwidth must be > 0");
    ValidationReport report;
    auto fail = [&](const std::string& name, const std::string& detail) {
        report.pass = false;
        report.violations.push_back(detail);
        if (report.binding_constraint.empty()) report.binding_constraint = name;
    };
    const double t0_max = 2.0 * M_PI / (5.0 * bandwidth_rad);
    if (config.bit_duration > t0_max)
        fail("bit_duration", "t0 = " + std::to_string(config.bit_duration) +
                                 " exceeds 2*pi/(5*omega_B) = " + std::to_string(t0_max));
    const double n_min = std::log2(config.period() / config.bit_duration + 1.0);
    if (static_cast<double>(config.order) < n_min - 1e-9)
        fail("order", "order " + std::to_string(config.order) +
                          " below required log2(T_p/t0 + 1) = " + std::to_string(n_min));
    if (config.period() < memory_length)
        fail("period", "T_p = " + std::to_string(config.period()) +
                           " shorter than memory length " + std::to_string(memory_length));
    return report;
}

} // namespace pcprobe

#endif
