#include "nmqfi/qfi_engine.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace nmqfi {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double theta)
{
    theta = std::fmod(theta, kPi);
    return theta < 0.0 ? theta + kPi : theta;
}

QfiResult make_result(double h, double theta)
{
    return {h, wrap_angle(theta), h > 0.0 ? 1.0 / h : std::numeric_limits<double>::infinity()};
}

// Factor pieces of sigma(theta) = A A^T + noise: returns A^{-1}.
Eigen::Matrix2d inverse_square_root_factor(const Eigen::Matrix2d& transfer_inv, double r, double theta)
{
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d rot_t;
    rot_t << c, s, -s, c;
    const double xi = std::exp(2.0 * r);
    const Eigen::Vector2d inv_sqrt_axes(std::sqrt(2.0 / xi), std::sqrt(2.0 * xi));
    return inv_sqrt_axes.asDiagonal() * rot_t * transfer_inv;
}

Eigen::Matrix2d invert_transfer(const Eigen::Matrix2d& m)
{
    const double det = m.determinant();
    if (!(std::abs(det) > 1e-300)) throw NumericalError("window propagator is singular");
    Eigen::Matrix2d inv;
    inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return inv / det;
}

double factored_qfi(const Eigen::Matrix2d& a_inv, const Eigen::Matrix2d& noise, const Eigen::Vector2d& b)
{
    const Eigen::Vector2d c = a_inv * b;
    const Eigen::Matrix2d k = a_inv * noise * a_inv.transpose();
    const Eigen::Matrix2d ik = Eigen::Matrix2d::Identity() + 0.5 * (k + k.transpose());
    return c.dot(spd_inverse<double>(ik) * c);
}

Eigen::Matrix2d factored_precision(const Eigen::Matrix2d& a_inv, const Eigen::Matrix2d& noise)
{
    const Eigen::Matrix2d k = a_inv * noise * a_inv.transpose();
    const Eigen::Matrix2d ik = Eigen::Matrix2d::Identity() + 0.5 * (k + k.transpose());
    return a_inv.transpose() * spd_inverse<double>(ik) * a_inv;
}

} // namespace

double qfi_from_fidelity(const GaussianStateBuilder& builder, double f0, double df)
{
    if (df == 0.0) throw std::invalid_argument("fidelity step df must be nonzero");
    const auto [sigma0, mu0] = builder(f0);
    const auto [sigma1, mu1] = builder(f0 + df);
    const double fid = gaussian_fidelity<double>(sigma1, mu1, sigma0, mu0);
    return 4.0 * (1.0 - fid) / (df * df);
}

double homodyne_sensitivity(const CovarianceState& state)
{
    if (state.b.squaredNorm() == 0.0) throw std::invalid_argument("homodyne sensitivity needs b != 0");
    const Eigen::LLT<Eigen::Matrix2d> llt(state.sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance matrix is not positive definite");
    Eigen::Vector2d w = llt.solve(state.b);
    w /= w.norm(); // M = w . (x, p)
    const double variance = w.dot(state.sigma * w);
    const double slope = w.dot(state.b); // d<M>/df, since <(x, p)> = f b
    return variance / (slope * slope);
}

double window_qfi(const WindowDynamics& window, const SqueezeParams& params, const Eigen::Vector2d& b)
{
    const Eigen::Matrix2d a_inv =
        inverse_square_root_factor(invert_transfer(window.transfer()), params.r, params.theta);
    return factored_qfi(a_inv, window.noise(), b);
}

ThetaOptimizer::ThetaOptimizer(WindowDynamics window, double r, ThetaSearch search)
    : window_(std::move(window)), r_(r), search_(search)
{
    if (search_.scan_points < 3) throw std::invalid_argument("theta scan needs at least 3 points");
    const Eigen::Matrix2d transfer_inv = invert_transfer(window_.transfer());
    const Eigen::Matrix2d noise = window_.noise();
    precision_.reserve(search_.scan_points);
    for (std::size_t j = 0; j < search_.scan_points; ++j) {
        const double theta = kPi * static_cast<double>(j) / static_cast<double>(search_.scan_points);
        precision_.push_back(factored_precision(inverse_square_root_factor(transfer_inv, r_, theta), noise));
    }
}

double ThetaOptimizer::qfi_at(double theta, const Eigen::Vector2d& b) const
{
    return window_qfi(window_, SqueezeParams{r_, theta}, b);
}

QfiResult ThetaOptimizer::scan_only(const Eigen::Vector2d& b) const
{
    std::size_t best = 0;
    double best_h = -1.0;
    for (std::size_t j = 0; j < precision_.size(); ++j) {
        const double h = b.dot(precision_[j] * b);
        if (h > best_h) {
            best_h = h;
            best = j;
        }
    }
    return make_result(best_h, kPi * static_cast<double>(best) / static_cast<double>(precision_.size()));
}

QfiResult ThetaOptimizer::scan_and_refine(const Eigen::Vector2d& b) const
{
    if (b.squaredNorm() == 0.0) return make_result(0.0, 0.0);
    const QfiResult coarse = scan_only(b);
    const double cell = kPi / static_cast<double>(precision_.size());
    double lo = coarse.theta_opt - cell, hi = coarse.theta_opt + cell;
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
    double f1 = qfi_at(x1, b), f2 = qfi_at(x2, b);
    while (hi - lo > search_.tolerance) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = qfi_at(x2, b);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = qfi_at(x1, b);
        }
    }
    const double theta = 0.5 * (lo + hi);
    const double h = qfi_at(theta, b);
    if (h < coarse.h) return coarse;
    return make_result(h, theta);
}

QfiResult ThetaOptimizer::optimize(const Eigen::Vector2d& b) const
{
    if (window_.branch() == BathBranch::NonMarkovian || b.squaredNorm() == 0.0) return scan_and_refine(b);
    // b aligned with the minimum-eigenvalue axis of sigma.
    const double theta = window_.tau() + std::atan2(-b[0], b[1]);
    const QfiResult closed = make_result(qfi_at(theta, b), theta);
    const QfiResult coarse = scan_only(b);
    if (coarse.h > closed.h * (1.0 + 1e-9) + 1e-300)
        throw NumericalError("closed-form squeeze angle lost to the coarse scan");
    return closed;
}

QfiResult optimize_theta(const WindowDynamics& window, const Eigen::Vector2d& b, double r, ThetaSearch search)
{
    return ThetaOptimizer(window, r, search).optimize(b);
}

QfiResult optimize_theta(const WindowDynamics& window, const ForceShape& shape, double window_start, double r,
                         ThetaSearch search)
{
    return optimize_theta(window, window.response(shape, window_start), r, search);
}

} // namespace nmqfi
