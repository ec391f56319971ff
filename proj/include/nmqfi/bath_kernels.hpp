#pragma once

// Regularized Ohmic bath: spectral density, memory kernel gamma(t) and the
// symmetrized noise kernel nu(t). Units: omega_0 = hbar = k_B = 1.

#include <Eigen/Core>

#include <cstddef>

namespace nmqfi {

struct BathSpec {
    double gamma{0.1};       // damping strength
    double lambda{10.0};     // cutoff frequency
    double temperature{0.0}; // T >= 0

    /// J(w) = (2 gamma w / pi) exp(-w^2 / lambda^2)
    double spectral_density(double omega) const noexcept;

    /// Throws std::invalid_argument unless gamma >= 0, lambda > 0, T >= 0.
    /// gamma == 0 is accepted as the ideal-oscillator limit.
    void validate() const;
};

struct KernelOptions {
    double rel_tol{1e-10};
    double abs_tol{1e-13};
    double cutoff_multiple{6.0}; // integrate omega over [0, cutoff_multiple * lambda]
};

/// Uniformly sampled kernels, t_i = i * step.
struct KernelTable {
    double step{0.0};
    Eigen::VectorXd gamma_of_t;
    Eigen::VectorXd nu_of_t;

    std::size_t size() const noexcept { return static_cast<std::size_t>(nu_of_t.size()); }
    double time(std::size_t i) const noexcept { return static_cast<double>(i) * step; }
    double horizon() const noexcept { return size() == 0 ? 0.0 : time(size() - 1); }
};

struct NuMoments {
    double nu0{0.0}; // nu(0)
    double nu2{0.0}; // nu''(0)
};

/// Thermal occupation n_T = 1 / (e^{1/T} - 1); zero at T = 0.
double thermal_occupation(double temperature);

/// gamma(t) = gamma lambda / sqrt(pi) * exp(-lambda^2 t^2 / 4), the closed form
/// of the cosine transform of J(w)/w.
double memory_kernel(const BathSpec& spec, double t);

/// gamma(t) evaluated directly from its defining frequency integral. Slow;
/// kept as the reference the closed form is checked against.
double memory_kernel_by_quadrature(const BathSpec& spec, double t, const KernelOptions& opts = {});

/// nu(t) = int_0^inf dw J(w)/2 coth(w / 2T) cos(w t), by adaptive quadrature.
/// Throws NumericalError (with the achieved error estimate) on non-convergence.
double noise_kernel(const BathSpec& spec, double t, const KernelOptions& opts = {});

/// nu0 = nu(0) and nu2 = -int_0^inf dw w^2 J(w)/2 coth(w / 2T).
NuMoments nu_moments(const BathSpec& spec, const KernelOptions& opts = {});

/// Samples both kernels at ceil(horizon / step) + 1 points.
KernelTable tabulate_kernels(const BathSpec& spec, double step, double horizon,
                             const KernelOptions& opts = {});

/// min(0.005, 0.2 / lambda): at least 40 samples across the memory-kernel width.
double default_kernel_step(const BathSpec& spec);

} // namespace nmqfi
