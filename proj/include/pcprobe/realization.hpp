#ifndef PCPROBE_REALIZATION_HPP
#define PCPROBE_REALIZATION_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "pcprobe/circuit.hpp"
#include "pcprobe/hankel.hpp"
#include "pcprobe/state_space.hpp"

namespace pcprobe {

/// SISO state-space model realized from probing data, with the Hankel
/// singular value spectrum and the Markov-reproduction error recorded at
/// realization time.
struct RealizedModel {
    StateSpaceModel sys;
    std::vector<double> hankel_singular_values;
    double markov_error = 0.0; // max_k |C A^(k-1) B - z_p(k)| / max|z_p|
};

/// Smallest r whose leading singular values carry at least `energy_threshold`
/// of the total singular value sum. The full spectrum is returned through
/// `spectrum` when given.
inline int select_order(const HankelPair& hankel, double energy_threshold = 0.99,
                        std::vector<double>* spectrum = nullptr) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(hankel.H);
    const Eigen::VectorXd sv = svd.singularValues();
    const double total = sv.sum();
    if (total == 0.0) throw Error("select_order: zero Hankel matrix");
    if (spectrum) spectrum->assign(sv.data(), sv.data() + sv.size());
    double acc = 0.0;
    for (int r = 0; r < sv.size(); ++r) {
        acc += sv[r];
        if (acc >= energy_threshold * total) return r + 1;
    }
    return static_cast<int>(sv.size());
}

/// Ho-Kalman / ERA balanced realization from the truncated SVD H = U S V^T:
///   A = S^-1/2 U^T H_shift V S^-1/2,  B = first column of S^1/2 V^T,
///   C = first row of U S^1/2,         D = 0.
inline RealizedModel balanced_realization(const HankelPair& hankel, int r) {
    if (r < 1) throw Error("balanced_realization: order must be >= 1");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(hankel.H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (r > sv.size()) throw Error("balanced_realization: order exceeds Hankel size");
    if (sv[0] == 0.0 || sv[r - 1] < 1e-12 * sv[0])
        throw Error("balanced_realization: Hankel matrix is rank deficient at order " +
                    std::to_string(r));
    const Eigen::MatrixXd u = svd.matrixU().leftCols(r);
    const Eigen::MatrixXd v = svd.matrixV().leftCols(r);
    const Eigen::VectorXd s_half = sv.head(r).cwiseSqrt();
    const Eigen::VectorXd s_half_inv = s_half.cwiseInverse();

    RealizedModel model;
    model.sys.A = s_half_inv.asDiagonal() * u.transpose() * hankel.H_shift * v *
                  s_half_inv.asDiagonal();
    model.sys.B = (s_half.asDiagonal() * v.transpose()).col(0);
    model.sys.C = (u * s_half.asDiagonal()).row(0);
    model.sys.D = Eigen::MatrixXd::Zero(1, 1);
    model.sys.domain = StateSpaceModel::Domain::Discrete;
    model.hankel_singular_values.assign(sv.data(), sv.data() + sv.size());

    double peak = 0.0;
    for (double z : hankel.source) peak = std::max(peak, std::abs(z));
    if (peak > 0.0) {
        Eigen::VectorXd x = model.sys.B;
        double worst = 0.0;
        for (std::size_t k = 0; k < hankel.source.size(); ++k) {
            worst = std::max(worst, std::abs(model.sys.C.row(0).dot(x) - hankel.source[k]));
            x = model.sys.A * x;
        }
        model.markov_error = worst / peak;
    }
    return model;
}

/// Exact inverse of the ZOH pole mapping: A_c = log(A_d)/t0 via the principal
/// matrix logarithm, B_c from the integrated exponential. Discrete
/// eigenvalues on the closed negative real axis have no principal real
/// logarithm; that case means the sampling was too coarse.
inline StateSpaceModel d2c_zoh(const StateSpaceModel& sys, double t0) {
    if (sys.domain != StateSpaceModel::Domain::Discrete)
        throw Error("d2c_zoh: model is not discrete");
    if (t0 <= 0.0) throw Error("d2c_zoh: t0 must be > 0");
    const Eigen::VectorXcd ev = sys.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
        if (std::abs(ev[i]) >= 1.0)
            throw Error("d2c_zoh: discrete model is unstable (|eig| = " +
                        std::to_string(std::abs(ev[i])) + ")");
        if (ev[i].real() <= 0.0 && std::abs(ev[i].imag()) <= 1e-12 * std::abs(ev[i]))
            throw Error("d2c_zoh: eigenvalue on the negative real axis; no principal "
                        "logarithm -- re-probe with a smaller bit duration");
    }
    const int n = sys.order();
    StateSpaceModel out = sys;
    out.A = sys.A.log() / t0;
    // B_c = (integral_0^t0 exp(A_c tau) dtau)^-1 B_d
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = out.A * t0;
    aug.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n) * t0;
    const Eigen::MatrixXd integral = aug.exp().topRightCorner(n, n);
    out.B = integral.lu().solve(sys.B);
    out.domain = StateSpaceModel::Domain::Continuous;
    out.dt = 0.0;
    return out;
}

inline RealizedModel to_continuous(const RealizedModel& model, double t0) {
    RealizedModel out = model;
    out.sys = d2c_zoh(model.sys, t0);
    return out;
}

namespace detail {

/// Solves A X + X A^T + Q = 0 for stable A by Kronecker vectorization.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
    const int n = static_cast<int>(a.rows());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n * n, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            // d/dt X(i,j): row index i + j*n in vec(X)
            for (int l = 0; l < n; ++l) {
                k(i + j * n, l + j * n) += a(i, l); // A X
                k(i + j * n, i + l * n) += a(j, l); // X A^T
            }
        }
    Eigen::VectorXd rhs(n * n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) rhs[i + j * n] = -q(i, j);
    const Eigen::VectorXd x = k.fullPivLu().solve(rhs);
    Eigen::MatrixXd out(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) out(i, j) = x[i + j * n];
    return 0.5 * (out + out.transpose());
}

inline Eigen::MatrixXd psd_sqrt_factor(const Eigen::MatrixXd& p) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

} // namespace detail

/// Square-root balanced truncation of a stable continuous SISO model.
inline StateSpaceModel balanced_truncate(const StateSpaceModel& sys, int r) {
    if (sys.domain != StateSpaceModel::Domain::Continuous)
        throw Error("balanced_truncate: expected a continuous model");
    if (!sys.is_stable()) throw Error("balanced_truncate: model must be stable");
    if (r >= sys.order()) return sys;
    const Eigen::MatrixXd p = detail::solve_lyapunov(sys.A, sys.B * sys.B.transpose());
    const Eigen::MatrixXd q =
        detail::solve_lyapunov(sys.A.transpose(), sys.C.transpose() * sys.C);
    const Eigen::MatrixXd lp = detail::psd_sqrt_factor(p);
    const Eigen::MatrixXd lq = detail::psd_sqrt_factor(q);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(lq.transpose() * lp,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    if (sv[r - 1] <= 0.0)
        throw Error("balanced_truncate: gramian product rank below requested order");
    const Eigen::VectorXd s_half_inv = sv.head(r).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd t = lp * svd.matrixV().leftCols(r) * s_half_inv.asDiagonal();
    const Eigen::MatrixXd tinv =
        s_half_inv.asDiagonal() * svd.matrixU().leftCols(r).transpose() * lq.transpose();
    StateSpaceModel out = sys;
    out.A = tinv * sys.A * t;
    out.B = tinv * sys.B;
    out.C = sys.C * t;
    return out;
}

/// Extracts the relative-degree-1 second-order transfer function
/// (a s + b)/(s^2 + c s + d) from a stable continuous SISO model, reducing
/// by balanced truncation first when the order exceeds 2.
inline TransferFunction2 to_second_order_tf(const RealizedModel& model) {
    StateSpaceModel sys = model.sys;
    if (sys.domain != StateSpaceModel::Domain::Continuous)
        throw Error("to_second_order_tf: expected a continuous model");
    if (sys.inputs() != 1 || sys.outputs() != 1)
        throw Error("to_second_order_tf: expected a SISO model");
    if (sys.order() > 2) sys = balanced_truncate(sys, 2);

    TransferFunction2 tf;
    if (sys.order() == 1) {
        // k/(s+p) embeds as (k s + 0)/(s^2 + p s + 0); d = 0 marks the
        // missing second-order dynamics (near_degenerate()).
        tf.a = sys.C(0, 0) * sys.B(0, 0);
        tf.b = 0.0;
        tf.c = -sys.A(0, 0);
        tf.d = 0.0;
    } else {
        const Eigen::Matrix2d a2 = sys.A.topLeftCorner(2, 2);
        const Eigen::Vector2d b2 = sys.B.col(0).head(2);
        const Eigen::RowVector2d c2 = sys.C.row(0).head(2);
        tf.c = -a2.trace();
        tf.d = a2.determinant();
        tf.a = c2.dot(b2);
        Eigen::Matrix2d adj;
        adj << -a2(1, 1), a2(0, 1), a2(1, 0), -a2(0, 0);
        tf.b = (c2 * adj * b2).value();
    }
    // Eq-form requires relative degree 1: any direct feedthrough would add an
    // s^2 numerator term.
    const double scale = std::max(std::abs(tf.a), 1e-300);
    if (std::abs(sys.D(0, 0)) > 1e-6 * scale * std::max(1.0, std::abs(tf.c)))
        throw Error("to_second_order_tf: residual s^2 numerator coefficient; the data "
                    "is not relative-degree-1");
    return tf;
}

} // namespace pcprobe

#endif
