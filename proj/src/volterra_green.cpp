#include "nmqfi/volterra_green.hpp"

#include "nmqfi/errors.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nmqfi {

GreenTable solve_green(const BathSpec& spec, const KernelTable& kernels, double horizon)
{
    const double h = kernels.step;
    if (!(h > 0.0)) throw std::invalid_argument("kernel table has no step");
    if (!(horizon > 0.0)) throw std::invalid_argument("green horizon must be > 0");
    const auto steps = static_cast<Eigen::Index>(std::ceil(horizon / h - 1e-9));
    if (steps + 1 > static_cast<Eigen::Index>(kernels.size()))
        throw std::invalid_argument("green horizon exceeds the kernel table");

    const Eigen::VectorXd& k = kernels.gamma_of_t;
    GreenTable out;
    out.step = h;
    out.spec = spec;
    out.g = Eigen::VectorXd::Zero(steps + 1);
    out.gdot = Eigen::VectorXd::Zero(steps + 1);
    out.gddot = Eigen::VectorXd::Zero(steps + 1);
    auto& g = out.g;
    auto& u = out.gdot;
    auto& a = out.gddot;
    u[0] = 1.0;
    a[0] = 0.0; // -G(0) - (empty convolution)

    const double implicit = 1.0 + h * h / 4.0 + h * h * k[0] / 4.0;
    for (Eigen::Index n = 0; n < steps; ++n) {
        // Known part of the trapezoidal convolution at t_{n+1}.
        double known = 0.5 * k[n + 1] * u[0];
        for (Eigen::Index j = 1; j <= n; ++j) known += k[n + 1 - j] * u[j];
        known *= h;

        const double rhs = u[n] + 0.5 * h * a[n] - 0.5 * h * (g[n] + 0.5 * h * u[n] + known);
        u[n + 1] = rhs / implicit;
        g[n + 1] = g[n] + 0.5 * h * (u[n] + u[n + 1]);
        a[n + 1] = -g[n + 1] - known - 0.5 * h * k[0] * u[n + 1];

        if (!std::isfinite(g[n + 1]) || !std::isfinite(u[n + 1])) {
            std::ostringstream msg;
            msg << "green solver produced non-finite values at t=" << static_cast<double>(n + 1) * h
                << " (step " << h << ")";
            throw NumericalError(msg.str());
        }
    }
    return out;
}

SeriesFit series_coefficients(const GreenTable& table, std::size_t window_points, double tolerance)
{
    if (window_points < 2 || table.size() <= window_points)
        throw std::invalid_argument("series fit needs more grid points than the fit window");
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 1; i <= window_points; ++i) {
        const double t = table.time(i);
        const double x = t * t * t / 6.0;
        const double y = table.g[static_cast<Eigen::Index>(i)] - t;
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    SeriesFit fit;
    fit.g3 = sxy / sxx;
    double misfit = 0.0;
    for (std::size_t i = 1; i <= window_points; ++i) {
        const double t = table.time(i);
        const double r = table.g[static_cast<Eigen::Index>(i)] - t - fit.g3 * t * t * t / 6.0;
        misfit += r * r;
    }
    fit.rel_residual = syy > 0.0 ? std::sqrt(misfit / syy) : 0.0;
    fit.within_tolerance = fit.rel_residual <= tolerance;
    return fit;
}

} // namespace nmqfi
