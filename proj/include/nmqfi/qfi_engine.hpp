#pragma once

// Quantum Fisher information of the force amplitude for Gaussian probe
// states, H = b^T sigma^{-1} b, with its fidelity-based and homodyne
// cross-checks and the squeeze-angle optimization of one window.

#include "nmqfi/errors.hpp"
#include "nmqfi/gaussian_dynamics.hpp"

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace nmqfi {

struct QfiResult {
    double h{0.0};
    double theta_opt{0.0};
    double sensitivity{0.0}; // 1 / h; infinite when h == 0
};

/// Closed-form 2x2 inverse of a symmetric positive-definite matrix. Rejects
/// anything whose determinant falls below 1e-14 or with non-positive diagonal.
template <typename Scalar>
Mat2<Scalar> spd_inverse(const Mat2<Scalar>& sigma)
{
    const Scalar det = sigma(0, 0) * sigma(1, 1) - sigma(0, 1) * sigma(1, 0);
    if (!(sigma(0, 0) > Scalar(0)) || !(sigma(1, 1) > Scalar(0)) || !(det > Scalar(1e-14)))
        throw NumericalError("covariance matrix is not positive definite");
    Mat2<Scalar> inv;
    inv << sigma(1, 1), -sigma(0, 1), -sigma(1, 0), sigma(0, 0);
    return inv / det;
}

template <typename Scalar>
Scalar qfi(const Mat2<Scalar>& sigma, const Vec2<Scalar>& b)
{
    return b.dot(spd_inverse(sigma) * b);
}

inline double qfi(const CovarianceState& state) { return qfi<double>(state.sigma, state.b); }

/// Fidelity between single-mode Gaussian states,
///   exp(-u^T (s1 + s2)^{-1} u / 2) / (sqrt(G + 4P) - sqrt(4P)),
/// G = det(s1 + s2), P = (det s1 - 1/4)(det s2 - 1/4), u = mu2 - mu1.
/// The value is the squared overlap |<psi1|psi2>|^2 for pure states.
template <typename Scalar>
Scalar gaussian_fidelity(const Mat2<Scalar>& sigma1, const Vec2<Scalar>& mu1, const Mat2<Scalar>& sigma2,
                         const Vec2<Scalar>& mu2)
{
    using std::exp;
    using std::sqrt;
    const Mat2<Scalar> sum = sigma1 + sigma2;
    const Scalar gamma = sum.determinant();
    if (!(gamma > Scalar(0))) throw NumericalError("sum of covariances is singular");
    Scalar four_pi = Scalar(4) * (sigma1.determinant() - Scalar(0.25)) * (sigma2.determinant() - Scalar(0.25));
    if (four_pi < Scalar(0)) four_pi = Scalar(0); // rounding at the pure-state boundary
    const Vec2<Scalar> u = mu2 - mu1;
    const Scalar quad = u.dot(spd_inverse(sum) * u);
    // sqrt(G + 4P) - sqrt(4P) rewritten to avoid cancellation for mixed states.
    const Scalar denom = gamma / (sqrt(gamma + four_pi) + sqrt(four_pi));
    return exp(-quad / Scalar(2)) / denom;
}

using GaussianStateBuilder = std::function<std::pair<Eigen::Matrix2d, Eigen::Vector2d>(double)>;

/// Finite-difference QFI 4 (1 - F(rho_{f0+df}, rho_{f0})) / df^2. Test oracle for qfi().
double qfi_from_fidelity(const GaussianStateBuilder& builder, double f0, double df = 1e-4);

/// Sensitivity of the homodyne observable M = x^T sigma^{-1} b / |sigma^{-1} b|,
/// Var(M) / |d<M>/df|^2, assembled from its Gaussian moments.
double homodyne_sensitivity(const CovarianceState& state);

/// b^T sigma^{-1} b for sigma = M R D R^T M^T + noise, evaluated as
/// c^T (I + K)^{-1} c with c = A^{-1} b, K = A^{-1} noise A^{-T}, A = M R D^{1/2}.
/// Avoids the det(sigma) cancellation of strongly squeezed states.
double window_qfi(const WindowDynamics& window, const SqueezeParams& params, const Eigen::Vector2d& b);

struct ThetaSearch {
    std::size_t scan_points{64};
    double tolerance{1e-6};
};

/// Squeeze-angle optimizer for one window and fixed r. The per-angle
/// precision matrices of the coarse scan are cached, so one instance serves
/// every window of a sequential protocol.
class ThetaOptimizer {
public:
    ThetaOptimizer(WindowDynamics window, double r, ThetaSearch search = {});

    /// Closed-form angle tau - arctan(bx / bp) for the ideal and Markovian
    /// branches (checked against the coarse scan), scan plus golden-section
    /// refinement otherwise.
    QfiResult optimize(const Eigen::Vector2d& b) const;
    double qfi_at(double theta, const Eigen::Vector2d& b) const;
    QfiResult scan_only(const Eigen::Vector2d& b) const;
    /// Coarse scan followed by golden-section refinement, for every branch.
    QfiResult scan_and_refine(const Eigen::Vector2d& b) const;

    const WindowDynamics& window() const noexcept { return window_; }

private:
    WindowDynamics window_;
    double r_;
    ThetaSearch search_;
    std::vector<Eigen::Matrix2d> precision_; // sigma^{-1} at the scan angles
};

QfiResult optimize_theta(const WindowDynamics& window, const Eigen::Vector2d& b, double r,
                         ThetaSearch search = {});

QfiResult optimize_theta(const WindowDynamics& window, const ForceShape& shape, double window_start, double r,
                         ThetaSearch search = {});

} // namespace nmqfi
