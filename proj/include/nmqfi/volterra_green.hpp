#pragma once

// Retarded Green function of the memory-kernel oscillator:
//   G''(t) + int_0^t gamma(t - s) G'(s) ds + G(t) = 0,  G(0) = 0, G'(0) = 1.

#include "nmqfi/bath_kernels.hpp"

#include <Eigen/Core>

#include <cstddef>

namespace nmqfi {

struct GreenTable {
    double step{0.0};
    Eigen::VectorXd g;     // G(t_i)
    Eigen::VectorXd gdot;  // G'(t_i)
    Eigen::VectorXd gddot; // G''(t_i), from the equation of motion
    BathSpec spec;

    std::size_t size() const noexcept { return static_cast<std::size_t>(g.size()); }
    double time(std::size_t i) const noexcept { return static_cast<double>(i) * step; }
    double horizon() const noexcept { return size() == 0 ? 0.0 : time(size() - 1); }
};

/// Second-order product-integration scheme: trapezoidal rule for both the
/// (G, G') system and the convolution, with the diagonal convolution weight
/// treated implicitly. Cost O(n^2).
///
/// Throws std::invalid_argument if the kernel table is shorter than the
/// horizon, NumericalError if the iteration produces non-finite values.
GreenTable solve_green(const BathSpec& spec, const KernelTable& kernels, double horizon);

struct SeriesFit {
    double g3{0.0};          // G(t) = t + g3 t^3 / 6 + O(t^5)
    double rel_residual{0.0}; // rms misfit / rms of G - t over the window
    bool within_tolerance{false};
};

/// Least-squares estimate of the cubic Taylor coefficient from grid points
/// 1..window_points.
SeriesFit series_coefficients(const GreenTable& table, std::size_t window_points = 10,
                              double tolerance = 0.05);

} // namespace nmqfi
