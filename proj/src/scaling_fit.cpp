#include "nmqfi/scaling_fit.hpp"

#include "nmqfi/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace nmqfi {

namespace {

ScalingFit solve(const Eigen::MatrixXd& design, const Eigen::VectorXd& y)
{
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-12);
    if (qr.rank() < design.cols()) throw NumericalError("rank-deficient least-squares fit");
    const Eigen::VectorXd coef = qr.solve(y);
    const Eigen::VectorXd resid = y - design * coef;
    ScalingFit fit;
    fit.coefficients.assign(coef.data(), coef.data() + coef.size());
    fit.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(y.size()));
    const double total = (y.array() - y.mean()).matrix().squaredNorm();
    fit.r_squared = total > 0.0 ? 1.0 - resid.squaredNorm() / total : 1.0;
    return fit;
}

void check_sizes(std::span<const double> x, std::span<const double> y, std::size_t minimum)
{
    if (x.size() != y.size()) throw std::invalid_argument("fit inputs differ in length");
    if (x.size() < minimum) throw std::invalid_argument("too few samples for the fit");
}

} // namespace

ScalingFit fit_scaling(std::span<const double> x, std::span<const double> y, ScalingModel model, double exponent)
{
    check_sizes(x, y, 6);
    const auto n = static_cast<Eigen::Index>(x.size());
    const Eigen::VectorXd yy = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    Eigen::MatrixXd design(n, model == ScalingModel::PowerLaw ? 1 : 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double xp = std::pow(x[static_cast<std::size_t>(i)], exponent);
        if (model == ScalingModel::PowerLaw) {
            design(i, 0) = xp;
        } else {
            design(i, 0) = 1.0;
            design(i, 1) = -xp;
        }
    }
    return solve(design, yy);
}

ScalingFit fit_affine(std::span<const double> x, std::span<const double> y)
{
    check_sizes(x, y, 3);
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd design(n, 2);
    design.col(0) = Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    design.col(1).setOnes();
    return solve(design, Eigen::Map<const Eigen::VectorXd>(y.data(), n));
}

} // namespace nmqfi
