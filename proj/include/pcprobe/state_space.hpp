#ifndef PCPROBE_STATE_SPACE_HPP
#define PCPROBE_STATE_SPACE_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "pcprobe/common.hpp"
#include "pcprobe/waveform.hpp"

namespace pcprobe {

struct StateSpaceModel {
    Eigen::MatrixXd A, B, C, D;
    enum class Domain { Continuous, Discrete } domain = Domain::Continuous;
    double dt = 0.0; // sample time when discrete

    int order() const { return static_cast<int>(A.rows()); }
    int inputs() const { return static_cast<int>(B.cols()); }
    int outputs() const { return static_cast<int>(C.rows()); }

    void check_dimensions() const {
        if (A.rows() != A.cols()) throw Error("StateSpaceModel: A must be square");
        if (B.rows() != A.rows()) throw Error("StateSpaceModel: B row count mismatch");
        if (C.cols() != A.cols()) throw Error("StateSpaceModel: C column count mismatch");
        if (D.rows() != C.rows() || D.cols() != B.cols())
            throw Error("StateSpaceModel: D dimension mismatch");
    }

    Eigen::VectorXcd eigenvalues() const {
        return Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues();
    }

    bool is_stable() const {
        const Eigen::VectorXcd ev = eigenvalues();
        if (domain == Domain::Continuous) {
            for (int i = 0; i < ev.size(); ++i)
                if (ev[i].real() >= 0.0) return false;
        } else {
            for (int i = 0; i < ev.size(); ++i)
                if (std::abs(ev[i]) >= 1.0) return false;
        }
        return true;
    }
};

/// Exact zero-order-hold discretization via the augmented matrix exponential.
inline StateSpaceModel discretize_zoh(const StateSpaceModel& sys, double dt) {
    if (sys.domain == StateSpaceModel::Domain::Discrete) {
        if (std::abs(sys.dt - dt) > 1e-12 * dt)
            throw Error("discretize_zoh: model already discrete at a different rate");
        return sys;
    }
    sys.check_dimensions();
    if (dt <= 0.0) throw Error("discretize_zoh: dt must be > 0");
    const int n = sys.order();
    const int m = sys.inputs();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = sys.A * dt;
    aug.topRightCorner(n, m) = sys.B * dt;
    const Eigen::MatrixXd e = aug.exp();
    StateSpaceModel out = sys;
    out.A = e.topLeftCorner(n, n);
    out.B = e.topRightCorner(n, m);
    out.domain = StateSpaceModel::Domain::Discrete;
    out.dt = dt;
    return out;
}

struct NoiseConfig {
    double measurement_sigma = 0.0; // std dev of additive noise on the output
    std::uint64_t rng_seed = 0;
};

/// ZOH-discretize at dt_sim, iterate the discrete recursion from zero state,
/// decimate the first output to every `decimation`-th sample, and add
/// measurement noise. Inputs must share dt = dt_sim and a common length.
inline Waveform simulate(const StateSpaceModel& plant, const std::vector<Waveform>& inputs,
                         const NoiseConfig& noise, double dt_sim, int decimation = 1) {
    plant.check_dimensions();
    if (noise.measurement_sigma < 0.0) throw Error("simulate: negative noise sigma");
    if (decimation < 1) throw Error("simulate: decimation must be >= 1");
    if (static_cast<int>(inputs.size()) != plant.inputs())
        throw Error("simulate: expected " + std::to_string(plant.inputs()) +
                    " input waveforms, got " + std::to_string(inputs.size()));
    const std::size_t steps = inputs.at(0).samples.size();
    for (const Waveform& u : inputs) {
        if (std::abs(u.dt - dt_sim) > 1e-12 * dt_sim)
            throw Error("simulate: input dt incompatible with dt_sim");
        if (u.samples.size() != steps) throw Error("simulate: input length mismatch");
    }

    const StateSpaceModel d = discretize_zoh(plant, dt_sim);
    const int m = plant.inputs();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d.order());
    Eigen::VectorXd u(m);
    const Eigen::RowVectorXd c = d.C.row(0);
    const Eigen::RowVectorXd d0 = d.D.row(0);

    Waveform y;
    y.dt = dt_sim * decimation;
    y.t_start = inputs[0].t_start;
    y.unit = "A";
    y.samples.reserve(steps / decimation + 1);
    for (std::size_t k = 0; k < steps; ++k) {
        for (int j = 0; j < m; ++j) u[j] = inputs[j].samples[k];
        if (k % static_cast<std::size_t>(decimation) == 0)
            y.samples.push_back(c.dot(x) + d0.dot(u));
        x = d.A * x + d.B * u;
    }
    if (noise.measurement_sigma > 0.0) {
        std::mt19937_64 rng(noise.rng_seed);
        std::normal_distribution<double> gauss(0.0, noise.measurement_sigma);
        for (double& v : y.samples) v += gauss(rng);
    }
    return y;
}

/// Markov-parameter sequence of the ZOH-discretized plant at step t0: the
/// response to an input that is 1 on the first input channel for one sample
/// and 0 afterward. Shares the simulate() code path so oracle and probed
/// responses agree bit for bit.
inline Waveform direct_impulse_response(const StateSpaceModel& plant, double t0,
                                        std::size_t length) {
    plant.check_dimensions();
    std::vector<Waveform> inputs(plant.inputs());
    for (int j = 0; j < plant.inputs(); ++j) {
        inputs[j].dt = t0;
        inputs[j].unit = j == 0 ? "V" : "A";
        inputs[j].samples.assign(length, 0.0);
    }
    if (length > 0) inputs[0].samples[0] = 1.0;
    Waveform g = simulate(plant, inputs, NoiseConfig{}, t0, 1);
    g.unit = "A/V";
    return g;
}

} // namespace pcprobe

#endif
