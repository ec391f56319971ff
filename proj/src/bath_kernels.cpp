#include "nmqfi/bath_kernels.hpp"

#include "nmqfi/errors.hpp"
#include "nmqfi/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmqfi {

namespace {

// omega * coth(omega / 2T), with the T = 0 limit and the removable
// singularity at omega -> 0 handled by the series 2T (1 + x^2 / 3).
double omega_coth(double omega, double temperature)
{
    if (temperature <= 0.0) return omega;
    if (omega < 1e-6 * temperature) {
        const double x = omega / (2.0 * temperature);
        return 2.0 * temperature * (1.0 + x * x / 3.0);
    }
    return omega / std::tanh(omega / (2.0 * temperature));
}

// Seed partition: split at lambda, panels no wider than half a period of cos(w t).
std::vector<double> frequency_breaks(const BathSpec& spec, double t, const KernelOptions& opts)
{
    const double upper = opts.cutoff_multiple * spec.lambda;
    double width = spec.lambda / 2.0;
    if (t > 0.0) width = std::min(width, std::numbers::pi / t);
    if (upper / width > 1e5)
        throw NumericalError("noise-kernel integrand too oscillatory at t=" + std::to_string(t) +
                             " for lambda=" + std::to_string(spec.lambda));
    std::vector<double> breaks{0.0};
    for (const double edge : {spec.lambda, upper}) {
        const double start = breaks.back();
        const auto pieces = static_cast<int>(std::ceil((edge - start) / width));
        for (int i = 1; i <= pieces; ++i) breaks.push_back(start + (edge - start) * i / pieces);
    }
    return breaks;
}

template <typename F>
double checked_integral(F&& integrand, const std::vector<double>& breaks, const KernelOptions& opts,
                        const char* what, double t)
{
    const auto res = quad::integrate<double>(integrand, breaks, opts.abs_tol, opts.rel_tol);
    if (!res.converged) {
        std::ostringstream msg;
        msg << what << " quadrature did not converge at t=" << t << " (value " << res.value
            << ", error estimate " << res.error << ", " << res.intervals << " intervals)";
        throw NumericalError(msg.str());
    }
    return res.value;
}

} // namespace

double BathSpec::spectral_density(double omega) const noexcept
{
    return 2.0 * gamma * omega * std::exp(-omega * omega / (lambda * lambda)) / std::numbers::pi;
}

void BathSpec::validate() const
{
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be >= 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be > 0");
    if (!(temperature >= 0.0) || !std::isfinite(temperature))
        throw std::invalid_argument("temperature must be >= 0");
}

double thermal_occupation(double temperature)
{
    if (temperature <= 0.0) return 0.0;
    return 1.0 / std::expm1(1.0 / temperature);
}

double memory_kernel(const BathSpec& spec, double t)
{
    const double lt = spec.lambda * t;
    return spec.gamma * spec.lambda / std::sqrt(std::numbers::pi) * std::exp(-lt * lt / 4.0);
}

double memory_kernel_by_quadrature(const BathSpec& spec, double t, const KernelOptions& opts)
{
    if (spec.gamma == 0.0) return 0.0;
    const double scale = spec.gamma / std::numbers::pi * 2.0;
    auto integrand = [&](double w) {
        return scale * std::exp(-w * w / (spec.lambda * spec.lambda)) * std::cos(w * t);
    };
    return checked_integral(integrand, frequency_breaks(spec, t, opts), opts, "memory kernel", t);
}

double noise_kernel(const BathSpec& spec, double t, const KernelOptions& opts)
{
    if (t < 0.0) t = -t;
    if (spec.gamma == 0.0) return 0.0;
    const double scale = spec.gamma / std::numbers::pi;
    const double inv_l2 = 1.0 / (spec.lambda * spec.lambda);
    auto integrand = [&](double w) {
        return scale * omega_coth(w, spec.temperature) * std::exp(-w * w * inv_l2) * std::cos(w * t);
    };
    return checked_integral(integrand, frequency_breaks(spec, t, opts), opts, "noise kernel", t);
}

NuMoments nu_moments(const BathSpec& spec, const KernelOptions& opts)
{
    if (spec.gamma == 0.0) return {};
    const double scale = spec.gamma / std::numbers::pi;
    const double inv_l2 = 1.0 / (spec.lambda * spec.lambda);
    auto second = [&](double w) {
        return scale * w * w * omega_coth(w, spec.temperature) * std::exp(-w * w * inv_l2);
    };
    NuMoments m;
    m.nu0 = noise_kernel(spec, 0.0, opts);
    m.nu2 = -checked_integral(second, frequency_breaks(spec, 0.0, opts), opts, "nu2 moment", 0.0);
    return m;
}

KernelTable tabulate_kernels(const BathSpec& spec, double step, double horizon, const KernelOptions& opts)
{
    if (!(step > 0.0)) throw std::invalid_argument("kernel step must be > 0");
    if (!(horizon > 0.0)) throw std::invalid_argument("kernel horizon must be > 0");
    spec.validate();
    // The small slack keeps horizon = n * step from rounding up to n + 1 steps.
    const double cells = std::ceil(horizon / step - 1e-9);
    if (cells > 5e6) throw std::invalid_argument("kernel grid exceeds 5e6 steps");
    const auto steps = static_cast<Eigen::Index>(cells);
    KernelTable table;
    table.step = step;
    table.gamma_of_t.resize(steps + 1);
    table.nu_of_t.resize(steps + 1);
    for (Eigen::Index i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) * step;
        table.gamma_of_t[i] = memory_kernel(spec, t);
        table.nu_of_t[i] = noise_kernel(spec, t, opts);
    }
    return table;
}

double default_kernel_step(const BathSpec& spec) { return std::min(0.005, 0.2 / spec.lambda); }

} // namespace nmqfi
