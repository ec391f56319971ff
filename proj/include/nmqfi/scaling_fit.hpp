#pragma once

// Least-squares fits of the large-energy scaling laws
//   PowerLaw:      y = a x^p           (N_opt ~ d0 sqrt(E), H_opt ~ d1 sqrt(E), N_opt ~ c0 E^{1/3})
//   ShiftedPower:  y = c1 - c2 x^p     (H_opt ~ c1 - c2 E^{-2/3})
// with the exponent p fixed.

#include <span>
#include <vector>

namespace nmqfi {

enum class ScalingModel { PowerLaw, ShiftedPower };

struct ScalingFit {
    std::vector<double> coefficients; // {a} or {c1, c2}
    double rms_residual{0.0};
    double r_squared{0.0};
};

/// Throws std::invalid_argument with fewer than 6 samples or mismatched
/// inputs, NumericalError when the design matrix is rank deficient.
ScalingFit fit_scaling(std::span<const double> x, std::span<const double> y, ScalingModel model,
                       double exponent);

/// Ordinary least squares y = slope x + intercept; coefficients {slope, intercept}.
ScalingFit fit_affine(std::span<const double> x, std::span<const double> y);

} // namespace nmqfi
