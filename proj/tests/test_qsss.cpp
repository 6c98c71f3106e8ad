#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pcprobe/plant.hpp"
#include "pcprobe/qsss.hpp"

using namespace pcprobe;

namespace {

const CircuitParams kNormal{14.72e-3, -1.402, 24.58, 34.52e-6};

Waveform sinusoid(double mag, double f, double phase, double dt, double seconds,
                  double t_start = 0.0) {
    Waveform x;
    x.dt = dt;
    x.t_start = t_start;
    x.samples.resize(static_cast<std::size_t>(std::llround(seconds / dt)));
    for (std::size_t k = 0; k < x.samples.size(); ++k)
        x.samples[k] = mag * std::sin(2.0 * M_PI * f * x.time(k) + phase);
    return x;
}

/// Terminal current phasor for a given terminal voltage and embedded source,
/// straight from the circuit's phasor equations.
std::complex<double> terminal_current(std::complex<double> v, std::complex<double> is,
                                      const CircuitParams& p, double f) {
    const std::complex<double> jw(0.0, 2.0 * M_PI * f);
    const std::complex<double> shunt = 1.0 / p.R2 + jw * p.C;
    return (v * shunt - is) / ((p.R1 + jw * p.L) * shunt + 1.0);
}

/// Simulates the terminal current on a fine grid and returns measurement-rate
/// (0.1 ms) voltage and current. The ZOH input staircase at the measurement
/// rate itself would phase-shift the current by omega*dt/2 and bias the small
/// back-solved source residual.
struct TerminalWaveforms {
    Waveform v;
    Waveform i;
};

TerminalWaveforms simulate_terminal(const CircuitParams& p, const PiecewiseLinear& mag,
                                    const PiecewiseLinear& ang, double horizon) {
    const StateSpaceModel sys = build_plant_from_circuit(p);
    const double dt_fine = 1e-6;
    const int decimation = 100;
    const Waveform v_fine = sinusoid(3387.0, 60.0, 0.0, dt_fine, horizon);
    Waveform is = qsss_source_waveform(mag, ang, 60.0, dt_fine, horizon);
    is.samples.resize(v_fine.samples.size(), 0.0);
    TerminalWaveforms out;
    out.i = simulate(sys, {v_fine, is}, NoiseConfig{}, dt_fine, decimation);
    out.v.dt = dt_fine * decimation;
    out.v.samples.resize(out.i.samples.size());
    for (std::size_t k = 0; k < out.v.samples.size(); ++k)
        out.v.samples[k] = 3387.0 * std::sin(2.0 * M_PI * 60.0 * out.v.time(k));
    return out;
}

} // namespace

TEST_CASE("noiseless sinusoid recovery is exact to 1e-9") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> mag_u(0.1, 500.0), phase_u(-M_PI, M_PI),
        start_u(0.0, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
        const double mag = mag_u(rng), phase = phase_u(rng);
        const Waveform x = sinusoid(mag, 60.0, phase, 1e-4, 1.0);
        const double tau0 = std::floor(start_u(rng) / 1e-4) * 1e-4;
        const int wn = 80 + static_cast<int>(rng() % 400);
        const Phasor p = estimate_phasor(x, 60.0, tau0, wn);
        CHECK(p.magnitude == Catch::Approx(mag).epsilon(1e-9));
        CHECK(std::remainder(p.angle - phase, 2.0 * M_PI) == Catch::Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("angles outside (-pi/2, pi/2) need the four-quadrant arctangent") {
    const Waveform x = sinusoid(100.0, 60.0, 2.5, 1e-4, 0.2);
    const Phasor p = estimate_phasor(x, 60.0, 0.0, 334);
    CHECK(p.angle == Catch::Approx(2.5).margin(1e-9));
}

TEST_CASE("estimate is invariant to the window position for a stationary signal") {
    const Waveform x = sinusoid(42.0, 60.0, -1.2, 1e-4, 1.0);
    const Phasor p0 = estimate_phasor(x, 60.0, 0.0, 300);
    const Phasor p1 = estimate_phasor(x, 60.0, 0.3141, 300);
    CHECK(p1.magnitude == Catch::Approx(p0.magnitude).epsilon(1e-9));
    CHECK(p1.angle == Catch::Approx(p0.angle).margin(1e-9));
}

TEST_CASE("phasor of a sum is the complex sum of phasors") {
    const Waveform x1 = sinusoid(10.0, 60.0, 0.4, 1e-4, 0.2);
    const Waveform x2 = sinusoid(7.0, 60.0, -2.1, 1e-4, 0.2);
    const Phasor p1 = estimate_phasor(x1, 60.0, 0.0, 400);
    const Phasor p2 = estimate_phasor(x2, 60.0, 0.0, 400);
    const Phasor p12 = estimate_phasor(x1 + x2, 60.0, 0.0, 400);
    const std::complex<double> expected = p1.to_complex() + p2.to_complex();
    CHECK(std::abs(p12.to_complex() - expected) < 1e-9 * std::abs(expected));
}

TEST_CASE("windows below a quarter cycle are rejected") {
    const Waveform x = sinusoid(10.0, 60.0, 0.0, 1e-4, 0.2);
    CHECK_THROWS_AS(estimate_phasor(x, 60.0, 0.0, 30), Error); // 3 ms < 4.17 ms
    CHECK_NOTHROW(estimate_phasor(x, 60.0, 0.0, 60));
    CHECK_THROWS_AS(estimate_phasor(x, 60.0, 0.19, 200), Error); // past the end
}

TEST_CASE("noisy magnitude error stays under 0.5 with 99 percent coverage") {
    int covered = 0;
    const int trials = 1000;
    const int wn = 167; // one cycle at 0.1 ms sampling
    for (int trial = 0; trial < trials; ++trial) {
        Waveform x = sinusoid(100.0, 60.0, 0.7, 1e-4, static_cast<double>(wn) * 1e-4 + 1e-4);
        std::mt19937_64 rng(static_cast<std::uint64_t>(trial));
        std::normal_distribution<double> g(0.0, 1.0);
        for (double& v : x.samples) v += g(rng);
        const Phasor p = estimate_phasor(x, 60.0, 0.0, wn);
        if (std::abs(p.magnitude - 100.0) < 0.5) ++covered;
    }
    CHECK(covered >= 990);
}

TEST_CASE("source phasor back-solution is consistent with the circuit algebra") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::complex<double> v_hat(2400.0 * u(rng), 2400.0 * u(rng));
        const std::complex<double> is_hat(30.0 * u(rng), 30.0 * u(rng));
        const std::complex<double> i_hat = terminal_current(v_hat, is_hat, kNormal, 60.0);
        const Phasor pv = Phasor::from_complex(v_hat, 0.0, 60.0);
        const Phasor pi = Phasor::from_complex(i_hat, 0.0, 60.0);
        const Phasor ps = source_phasor(pv, pi, kNormal);
        CHECK(std::abs(ps.to_complex() - is_hat) < 1e-6 * std::abs(is_hat));
    }
}

TEST_CASE("the literal bare-omega form is only a diagnostic") {
    const Phasor pv = Phasor::from_complex({2400.0, 100.0}, 0.0, 60.0);
    const std::complex<double> is_hat(12.0, -3.0);
    const Phasor pi =
        Phasor::from_complex(terminal_current(pv.to_complex(), is_hat, kNormal, 60.0), 0.0, 60.0);
    const std::complex<double> literal = source_phasor_literal(pv, pi, kNormal);
    CHECK(std::abs(literal - is_hat) > 0.01 * std::abs(is_hat));
}

TEST_CASE("zero terminal phasors give a zero source phasor") {
    const Phasor zero = Phasor::from_complex(0.0, 0.0, 60.0);
    const Phasor ps = source_phasor(zero, zero, kNormal);
    CHECK(ps.magnitude == 0.0);
}

TEST_CASE("frequency mismatch between phasors is rejected") {
    Phasor a = Phasor::from_complex(1.0, 0.0, 60.0);
    Phasor b = Phasor::from_complex(1.0, 0.0, 50.0);
    CHECK_THROWS_AS(source_phasor(a, b, kNormal), Error);
}

TEST_CASE("driving the plant with no embedded source leaves the source phasor near zero") {
    const auto [v, i] =
        simulate_terminal(kNormal, PiecewiseLinear(0.0), PiecewiseLinear(0.0), 1.0);
    // skip the start-up transient, then compare phasors
    const Phasor pv = estimate_phasor(v, 60.0, 0.8, 334);
    const Phasor pi = estimate_phasor(i, 60.0, 0.8, 334);
    const Phasor ps = source_phasor(pv, pi, kNormal);
    CHECK(ps.magnitude < 0.01 * pi.magnitude);
}

TEST_CASE("embedded 10 A source at 0.5 rad is recovered within 2 percent / 0.02 rad") {
    const auto [v, i] =
        simulate_terminal(kNormal, PiecewiseLinear(10.0), PiecewiseLinear(0.5), 1.0);
    const Phasor pv = estimate_phasor(v, 60.0, 0.8, 334);
    const Phasor pi = estimate_phasor(i, 60.0, 0.8, 334);
    const Phasor ps = source_phasor(pv, pi, kNormal);
    CHECK(ps.magnitude == Catch::Approx(10.0).epsilon(0.02));
    CHECK(ps.angle == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("track_qsss follows a ramping source within 3 percent") {
    PiecewiseLinear mag{{0.3, 10.0}, {1.3, 20.0}};
    const auto [v, i] = simulate_terminal(kNormal, mag, PiecewiseLinear(0.0), 1.6);
    const double window = 2.0 / 60.0, stride = 1.0 / 60.0;
    const QsssTrack track = track_qsss(v, i, kNormal, 60.0, window, stride);
    REQUIRE(track.t.size() > 10);
    std::size_t checked = 0;
    for (std::size_t k = 0; k < track.t.size(); ++k) {
        if (track.t[k] < 0.4 || track.t[k] + window > 1.2) continue; // settled ramp interior
        const double expected = mag(track.t[k] + window / 2.0);
        CHECK(track.source[k].magnitude == Catch::Approx(expected).epsilon(0.03));
        ++checked;
    }
    CHECK(checked > 20);
}

TEST_CASE("track_qsss is stationary for a constant source and reports P and Q") {
    const auto [v, i] =
        simulate_terminal(kNormal, PiecewiseLinear(10.0), PiecewiseLinear(0.5), 1.0);
    const QsssTrack track = track_qsss(v, i, kNormal, 60.0, 2.0 / 60.0, 1.0 / 60.0);
    double first_mag = 0.0;
    for (std::size_t k = 0; k < track.t.size(); ++k) {
        if (track.t[k] < 0.5) continue;
        if (first_mag == 0.0) first_mag = track.source[k].magnitude;
        CHECK(track.source[k].magnitude == Catch::Approx(first_mag).epsilon(1e-3));
        const double s = track.voltage[k].magnitude * track.current[k].magnitude / 2.0;
        const double delta = track.voltage[k].angle - track.current[k].angle;
        CHECK(track.real_power[k] == Catch::Approx(s * std::cos(delta)));
        CHECK(track.reactive_power[k] == Catch::Approx(s * std::sin(delta)));
    }
    // timestamps strictly increasing
    for (std::size_t k = 1; k < track.t.size(); ++k) CHECK(track.t[k] > track.t[k - 1]);
}

TEST_CASE("a phase step shows up within one window of latency") {
    PiecewiseLinear beta{{0.799, 0.0}, {0.801, M_PI / 2.0}};
    const auto [v, i] = simulate_terminal(kNormal, PiecewiseLinear(10.0), beta, 1.6);
    const double window = 2.0 / 60.0;
    const QsssTrack track = track_qsss(v, i, kNormal, 60.0, window, 1.0 / 60.0);
    double before = 0.0, after = 0.0;
    for (std::size_t k = 0; k < track.t.size(); ++k) {
        if (track.t[k] > 0.6 && track.t[k] + window < 0.79) before = track.source[k].angle;
        if (track.t[k] > 0.81 + window && track.t[k] + window < 1.5 && after == 0.0)
            after = track.source[k].angle;
    }
    CHECK(before == Catch::Approx(0.0).margin(0.02));
    CHECK(after == Catch::Approx(M_PI / 2.0).margin(0.05));
}
