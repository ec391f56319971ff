#include "nmqfi/gaussian_dynamics.hpp"

#include "nmqfi/errors.hpp"
#include "nmqfi/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace nmqfi {

namespace {

using cplx = std::complex<double>;

// int_0^tau e^{c s} ds without cancellation for small |c tau|.
cplx exp_integral(cplx c, double tau)
{
    const cplx z = c * tau;
    if (std::abs(z) < 1e-3) {
        // z/2 + z^2/6 + z^3/24 + z^4/120 is enough below 1e-3.
        return tau * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0))));
    }
    const double x = z.real(), y = z.imag();
    const double s = std::sin(y / 2.0);
    const cplx em1(std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y));
    return em1 / c;
}

// Symmetric trapezoidal bilinear forms
//   Q_n(x, y) = h^2 sum_{i,j<=n} c_i c_j x_i y_j nu_{|i-j|}
// for every n, with c the trapezoid weights of [0, t_n].
Eigen::VectorXd trapezoid_bilinear_series(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& nu, double h)
{
    const Eigen::Index n = x.size();
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    if (n == 0) return q;
    // P_n uses weights d_0 = 1/2, d_i = 1: the trapezoid without its right end.
    double p = 0.25 * x[0] * y[0] * nu[0];
    for (Eigen::Index m = 1; m < n; ++m) {
        double ay = 0.5 * y[0] * nu[m];
        double bx = 0.5 * x[0] * nu[m];
        for (Eigen::Index j = 1; j <= m; ++j) {
            ay += y[j] * nu[m - j];
            bx += x[j] * nu[m - j];
        }
        p += x[m] * ay + y[m] * bx - x[m] * y[m] * nu[0];
        q[m] = h * h * (p - 0.5 * x[m] * ay - 0.5 * y[m] * bx + 0.25 * x[m] * y[m] * nu[0]);
    }
    return q;
}

Eigen::Matrix2d rotation(double angle)
{
    const double c = std::cos(angle), s = std::sin(angle);
    Eigen::Matrix2d rot;
    rot << c, -s, s, c;
    return rot;
}

bool on_grid(double t, double h, std::size_t& index)
{
    const double k = std::round(t / h);
    index = static_cast<std::size_t>(k);
    return std::abs(k * h - t) <= 1e-8 * std::max(1.0, t);
}

} // namespace

ForceShape ForceShape::constant()
{
    return ForceShape(Kind::Constant, [](double) { return 1.0; }, "constant");
}

ForceShape ForceShape::resonant()
{
    return ForceShape(Kind::Resonant, [](double t) { return std::cos(t); }, "resonant");
}

ForceShape ForceShape::custom(std::function<double(double)> profile, std::string name)
{
    if (!profile) throw std::invalid_argument("custom force shape needs a profile");
    return ForceShape(Kind::Custom, std::move(profile), std::move(name));
}

double ForceShape::integral_of_square(double horizon) const
{
    switch (kind_) {
    case Kind::Constant:
        return horizon;
    case Kind::Resonant:
        return horizon / 2.0 + std::sin(2.0 * horizon) / 4.0;
    case Kind::Custom:
        break;
    }
    auto sq = [this](double t) {
        const double v = profile_(t);
        return v * v;
    };
    const auto res = quad::integrate<double>(sq, 0.0, horizon, 1e-13, 1e-11);
    if (!res.converged) throw NumericalError("integral of the squared force profile did not converge");
    return res.value;
}

NoiseMoments accumulate_noise_moments(const GreenTable& green, const KernelTable& kernels)
{
    if (std::abs(green.step - kernels.step) > 1e-14 * green.step)
        throw std::invalid_argument("green and kernel tables use different steps");
    if (kernels.size() < green.size())
        throw std::invalid_argument("kernel table shorter than the green table");
    const Eigen::VectorXd nu = kernels.nu_of_t.head(static_cast<Eigen::Index>(green.size()));
    NoiseMoments m;
    m.step = green.step;
    m.beta_x = trapezoid_bilinear_series(green.g, green.g, nu, green.step);
    m.beta_p = trapezoid_bilinear_series(green.gdot, green.gdot, nu, green.step);
    m.beta_xp = trapezoid_bilinear_series(green.g, green.gdot, nu, green.step);
    return m;
}

CovarianceState covariance_nonmarkovian(const GreenTable& green, const NoiseMoments& moments,
                                        const SqueezeParams& params, std::size_t index)
{
    if (index >= green.size() || index >= moments.size())
        throw std::invalid_argument("covariance requested outside the tabulated grid");
    const auto k = static_cast<Eigen::Index>(index);
    const double g = green.g[k], gd = green.gdot[k], gdd = green.gddot[k];
    const double c = std::cos(params.theta), s = std::sin(params.theta);
    const double xi = params.xi();

    const double gx = g * c - gd * s;
    const double gp = g * s + gd * c;
    const double gx_dot = gd * c - gdd * s;
    const double gp_dot = gd * s + gdd * c;

    CovarianceState st;
    st.t = green.time(index);
    st.params = params;
    st.sigma(0, 0) = gx * gx / (2.0 * xi) + gp * gp * xi / 2.0 + moments.beta_x[k];
    st.sigma(1, 1) = gx_dot * gx_dot / (2.0 * xi) + gp_dot * gp_dot * xi / 2.0 + moments.beta_p[k];
    st.sigma(0, 1) = gx * gx_dot / (2.0 * xi) + gp * gp_dot * xi / 2.0 + moments.beta_xp[k];
    st.sigma(1, 0) = st.sigma(0, 1);
    return st;
}

CovarianceState covariance_markovian(double gamma, double n_thermal, const SqueezeParams& params, double t)
{
    if (t < 0.0) throw std::invalid_argument("markovian covariance needs t >= 0");
    // sigma = 1/2 [[c + d_R, d_I], [d_I, c - d_R]] with
    // c = e^{-gt} cosh 2r + (1 - e^{-gt})(2 n_T + 1),  d = e^{2i(th - t) - gt} sinh 2r.
    const double decay = std::exp(-gamma * t);
    const double c = decay * std::cosh(2.0 * params.r) - std::expm1(-gamma * t) * (2.0 * n_thermal + 1.0);
    const double phase = 2.0 * (params.theta - t);
    const double d_mag = decay * std::sinh(2.0 * params.r);
    const double d_re = d_mag * std::cos(phase), d_im = d_mag * std::sin(phase);

    CovarianceState st;
    st.t = t;
    st.params = params;
    st.sigma << c + d_re, d_im, d_im, c - d_re;
    st.sigma /= 2.0;
    return st;
}

Eigen::Vector2d response_vector(const ForceShape& shape, const GreenTable& green, double window_start,
                                double window_len)
{
    if (window_len < 0.0) throw std::invalid_argument("window length must be >= 0");
    std::size_t m = 0;
    if (!on_grid(window_len, green.step, m))
        throw std::invalid_argument("window length is not a grid time of the green table");
    if (m >= green.size()) throw std::invalid_argument("window extends past the green table");
    Eigen::Vector2d b = Eigen::Vector2d::Zero();
    if (m == 0) return b;
    const double end = window_start + window_len;
    for (std::size_t i = 0; i <= m; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        const double w = (i == 0 || i == m) ? 0.5 : 1.0;
        const double f = w * shape(end - green.time(i));
        b[0] += f * green.g[k];
        b[1] += f * green.gdot[k];
    }
    return b * green.step;
}

Eigen::Vector2d response_vector_markovian(const ForceShape& shape, double gamma, double window_start,
                                          double window_len)
{
    if (window_len < 0.0) throw std::invalid_argument("window length must be >= 0");
    const double end = window_start + window_len;
    const cplx a(-gamma / 2.0, 1.0);
    cplx z;
    switch (shape.kind()) {
    case ForceShape::Kind::Constant:
        z = exp_integral(a, window_len);
        break;
    case ForceShape::Kind::Resonant: {
        const cplx rot = std::polar(1.0, end);
        z = 0.5 * (rot * exp_integral(a - cplx(0, 1), window_len) +
                   std::conj(rot) * exp_integral(a + cplx(0, 1), window_len));
        break;
    }
    case ForceShape::Kind::Custom: {
        auto bx = [&](double s) { return shape(end - s) * std::exp(-gamma * s / 2.0) * std::sin(s); };
        auto bp = [&](double s) { return shape(end - s) * std::exp(-gamma * s / 2.0) * std::cos(s); };
        const auto rx = quad::integrate<double>(bx, 0.0, window_len, 1e-14, 1e-12);
        const auto rp = quad::integrate<double>(bp, 0.0, window_len, 1e-14, 1e-12);
        if (!rx.converged || !rp.converged)
            throw NumericalError("response-vector quadrature did not converge");
        return {rx.value, rp.value};
    }
    }
    return {z.imag(), z.real()};
}

std::string to_string(BathBranch branch)
{
    switch (branch) {
    case BathBranch::Ideal:
        return "ideal";
    case BathBranch::Markovian:
        return "markovian";
    case BathBranch::NonMarkovian:
        return "nonmarkovian";
    }
    return "unknown";
}

BathBranch parse_branch(const std::string& text)
{
    if (text == "ideal") return BathBranch::Ideal;
    if (text == "markovian") return BathBranch::Markovian;
    if (text == "nonmarkovian") return BathBranch::NonMarkovian;
    throw std::invalid_argument("unknown bath branch '" + text + "'");
}

WindowDynamics WindowDynamics::ideal(double tau)
{
    if (!(tau >= 0.0)) throw std::invalid_argument("window length must be >= 0");
    WindowDynamics w;
    w.branch_ = BathBranch::Ideal;
    w.tau_ = tau;
    return w;
}

WindowDynamics WindowDynamics::markovian(const BathSpec& bath, double tau)
{
    bath.validate();
    if (!(tau >= 0.0)) throw std::invalid_argument("window length must be >= 0");
    WindowDynamics w;
    w.branch_ = BathBranch::Markovian;
    w.tau_ = tau;
    w.gamma_ = bath.gamma;
    w.n_thermal_ = thermal_occupation(bath.temperature);
    return w;
}

WindowDynamics WindowDynamics::nonmarkovian(std::shared_ptr<const GreenTable> green,
                                            std::shared_ptr<const NoiseMoments> moments, std::size_t index)
{
    if (!green || !moments) throw std::invalid_argument("missing green or moment table");
    if (index >= green->size() || index >= moments->size())
        throw std::invalid_argument("window index outside the tabulated grid");
    WindowDynamics w;
    w.branch_ = BathBranch::NonMarkovian;
    w.tau_ = green->time(index);
    w.green_ = std::move(green);
    w.moments_ = std::move(moments);
    w.index_ = index;
    return w;
}

WindowDynamics WindowDynamics::nonmarkovian(const BathSpec& bath, double tau, double max_step,
                                            const KernelOptions& opts)
{
    if (!(tau > 0.0)) throw std::invalid_argument("window length must be > 0");
    if (!(max_step > 0.0)) throw std::invalid_argument("grid step must be > 0");
    const double cells = std::max(64.0, std::ceil(tau / max_step - 1e-9));
    const double h = tau / cells;
    const auto kernels = tabulate_kernels(bath, h, tau, opts);
    auto green = std::make_shared<const GreenTable>(solve_green(bath, kernels, tau));
    auto moments = std::make_shared<const NoiseMoments>(accumulate_noise_moments(*green, kernels));
    const std::size_t index = green->size() - 1;
    return nonmarkovian(std::move(green), std::move(moments), index);
}

Eigen::Matrix2d WindowDynamics::covariance(const SqueezeParams& params) const
{
    if (branch_ == BathBranch::NonMarkovian)
        return covariance_nonmarkovian(*green_, *moments_, params, index_).sigma;
    // Rotated squeezed ellipse, damped, plus isotropic thermal filling. Written
    // as R diag R^T so the 1/(2 xi) axis is not a difference of large numbers.
    const double decay = std::exp(-gamma_ * tau_);
    const double fill = -std::expm1(-gamma_ * tau_) * (2.0 * n_thermal_ + 1.0);
    const double xi = params.xi();
    const Eigen::Matrix2d rot = rotation(params.theta - tau_);
    const Eigen::Vector2d axes(decay * xi + fill, decay / xi + fill);
    return rot * (axes / 2.0).asDiagonal() * rot.transpose();
}

Eigen::Matrix2d WindowDynamics::transfer() const
{
    Eigen::Matrix2d m;
    if (branch_ == BathBranch::NonMarkovian) {
        const auto k = static_cast<Eigen::Index>(index_);
        m << green_->gdot[k], green_->g[k], green_->gddot[k], green_->gdot[k];
        return m;
    }
    return std::exp(-gamma_ * tau_ / 2.0) * rotation(-tau_);
}

Eigen::Matrix2d WindowDynamics::noise() const
{
    if (branch_ == BathBranch::NonMarkovian) return moments_->matrix(index_);
    const double fill = -std::expm1(-gamma_ * tau_) * (2.0 * n_thermal_ + 1.0);
    return Eigen::Matrix2d::Identity() * (fill / 2.0);
}

Eigen::Vector2d WindowDynamics::response(const ForceShape& shape, double window_start) const
{
    if (branch_ == BathBranch::NonMarkovian) return response_vector(shape, *green_, window_start, tau_);
    return response_vector_markovian(shape, gamma_, window_start, tau_);
}

CovarianceState WindowDynamics::state(const SqueezeParams& params, const ForceShape& shape,
                                      double window_start) const
{
    CovarianceState st;
    st.sigma = covariance(params);
    st.b = response(shape, window_start);
    st.t = tau_;
    st.params = params;
    return st;
}

double WindowDynamics::lambda_min(double r) const
{
    if (branch_ == BathBranch::NonMarkovian)
        throw std::logic_error("lambda_min is theta-dependent for the memory-kernel oscillator");
    const double decay = std::exp(-gamma_ * tau_);
    return 0.5 * (-std::expm1(-gamma_ * tau_) * (2.0 * n_thermal_ + 1.0) + decay * std::exp(-2.0 * r));
}

} // namespace nmqfi
