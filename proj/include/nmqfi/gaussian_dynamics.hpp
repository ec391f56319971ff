#pragma once

// Gaussian-state dynamics of the forced, damped oscillator: covariance
// matrices for the memory-kernel, Markovian and ideal oscillators and the
// force-response vector b that carries the mean displacement <x> = f b.

#include "nmqfi/bath_kernels.hpp"
#include "nmqfi/volterra_green.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>

namespace nmqfi {

template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;

/// Squeezed vacuum S(eps)|0> with eps = r e^{2 i theta}.
struct SqueezeParams {
    double r{0.0};
    double theta{0.0};

    double xi() const noexcept { return std::exp(2.0 * r); }
    /// Mean energy E = (xi + 1/xi) / 4 >= 1/2.
    double energy() const noexcept { return std::cosh(2.0 * r) / 2.0; }
};

/// Mean energy as a function of the squeeze magnitude.
inline double squeeze_energy(double r) noexcept { return std::cosh(2.0 * r) / 2.0; }

/// Covariance of the squeezed vacuum:
/// 1/2 [[cosh 2r + cos 2th sinh 2r, sin 2th sinh 2r], [., cosh 2r - cos 2th sinh 2r]].
template <typename Scalar>
Mat2<Scalar> squeezed_covariance(Scalar r, Scalar theta)
{
    using std::cos;
    using std::cosh;
    using std::sin;
    using std::sinh;
    const Scalar c = cosh(2 * r), s = sinh(2 * r);
    Mat2<Scalar> sigma;
    sigma << c + cos(2 * theta) * s, sin(2 * theta) * s,
             sin(2 * theta) * s, c - cos(2 * theta) * s;
    return sigma / Scalar(2);
}

/// Second moments beta_x, beta_p and the cross moment beta_xp of the bath
/// force propagated through G, per grid time.
struct NoiseMoments {
    double step{0.0};
    Eigen::VectorXd beta_x;
    Eigen::VectorXd beta_p;
    Eigen::VectorXd beta_xp;

    std::size_t size() const noexcept { return static_cast<std::size_t>(beta_x.size()); }
    Eigen::Matrix2d matrix(std::size_t i) const
    {
        const auto k = static_cast<Eigen::Index>(i);
        Eigen::Matrix2d m;
        m << beta_x[k], beta_xp[k], beta_xp[k], beta_p[k];
        return m;
    }
};

/// Covariance sigma and response vector b of one probe window.
struct CovarianceState {
    Eigen::Matrix2d sigma{Eigen::Matrix2d::Identity() / 2.0};
    Eigen::Vector2d b{Eigen::Vector2d::Zero()};
    double t{0.0};
    SqueezeParams params;

    double sxx() const noexcept { return sigma(0, 0); }
    double sxp() const noexcept { return sigma(0, 1); }
    double spp() const noexcept { return sigma(1, 1); }
    double bx() const noexcept { return b[0]; }
    double bp() const noexcept { return b[1]; }
};

/// Time profile of the force, normalized to max |s(t)| = 1.
class ForceShape {
public:
    enum class Kind { Constant, Resonant, Custom };

    static ForceShape constant();
    static ForceShape resonant();
    /// The caller guarantees |profile| <= 1.
    static ForceShape custom(std::function<double(double)> profile, std::string name = "custom");

    double operator()(double t) const { return profile_(t); }
    Kind kind() const noexcept { return kind_; }
    const std::string& name() const noexcept { return name_; }

    /// int_0^T s(t)^2 dt; exact for Constant and Resonant.
    double integral_of_square(double horizon) const;

private:
    ForceShape(Kind kind, std::function<double(double)> profile, std::string name)
        : kind_(kind), profile_(std::move(profile)), name_(std::move(name)) {}

    Kind kind_;
    std::function<double(double)> profile_;
    std::string name_;
};

/// Incremental 2-D trapezoidal accumulation of beta_x, beta_p, beta_xp over
/// the whole grid in O(n^2). Green and kernel tables must share the step.
NoiseMoments accumulate_noise_moments(const GreenTable& green, const KernelTable& kernels);

/// sigma at grid index i for the memory-kernel oscillator:
///   sxx = Gx^2/(2 xi) + Gp^2 xi/2 + beta_x,  Gx = G cos th - G' sin th,
///   spp = Gx'^2/(2 xi) + Gp'^2 xi/2 + beta_p, Gp = G sin th + G' cos th,
///   sxp = Gx Gx'/(2 xi) + Gp Gp' xi/2 + beta_xp  (= d sxx / dt / 2).
CovarianceState covariance_nonmarkovian(const GreenTable& green, const NoiseMoments& moments,
                                        const SqueezeParams& params, std::size_t index);

/// Closed-form covariance under Lindblad damping at rate gamma with thermal
/// occupation n_T; gamma = 0 gives the ideal oscillator.
CovarianceState covariance_markovian(double gamma, double n_thermal, const SqueezeParams& params,
                                     double t);

/// b(t0; tau) = int_0^tau s(t0 + tau - s) (G(s), G'(s)) ds, trapezoidal on the
/// Green grid. tau must be a grid time.
Eigen::Vector2d response_vector(const ForceShape& shape, const GreenTable& green,
                                double window_start, double window_len);

/// b(t0; tau) = int_0^tau s(t0 + tau - s) e^{-gamma s/2} (sin s, cos s) ds.
/// Exact antiderivatives for Constant and Resonant, quadrature otherwise.
Eigen::Vector2d response_vector_markovian(const ForceShape& shape, double gamma,
                                          double window_start, double window_len);

enum class BathBranch { Ideal, Markovian, NonMarkovian };

std::string to_string(BathBranch branch);
BathBranch parse_branch(const std::string& text);

/// Dynamics of a single probe window of length tau: everything needed to
/// build sigma(theta) and b(t0) for any squeeze angle and window start.
class WindowDynamics {
public:
    static WindowDynamics ideal(double tau);
    static WindowDynamics markovian(const BathSpec& bath, double tau);
    /// View into shared tables at grid index `index` (tau = index * step).
    static WindowDynamics nonmarkovian(std::shared_ptr<const GreenTable> green,
                                       std::shared_ptr<const NoiseMoments> moments,
                                       std::size_t index);
    /// Fresh grid on [0, tau] with step tau / max(64, ceil(tau / max_step)).
    static WindowDynamics nonmarkovian(const BathSpec& bath, double tau, double max_step,
                                       const KernelOptions& opts = {});

    BathBranch branch() const noexcept { return branch_; }
    double tau() const noexcept { return tau_; }
    double grid_step() const noexcept { return green_ ? green_->step : 0.0; }

    Eigen::Matrix2d covariance(const SqueezeParams& params) const;
    /// Propagator of the initial quadratures: sigma = M sigma0 M^T + noise.
    Eigen::Matrix2d transfer() const;
    Eigen::Matrix2d noise() const;
    Eigen::Vector2d response(const ForceShape& shape, double window_start) const;
    CovarianceState state(const SqueezeParams& params, const ForceShape& shape,
                          double window_start) const;

    /// Smallest eigenvalue of sigma for the theta-independent branches.
    double lambda_min(double r) const;

private:
    WindowDynamics() = default;

    BathBranch branch_{BathBranch::Ideal};
    double tau_{0.0};
    double gamma_{0.0};
    double n_thermal_{0.0};
    std::shared_ptr<const GreenTable> green_;
    std::shared_ptr<const NoiseMoments> moments_;
    std::size_t index_{0};
};

} // namespace nmqfi
