#include "doctest.h"
#include "oracles.hpp"

#include "nmqfi/gaussian_dynamics.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

using namespace nmqfi;

namespace {
const BathSpec kBath{0.1, 10.0, 0.0};
constexpr double kHalfPi = std::numbers::pi / 2.0;

struct Tables {
    KernelTable kernels;
    GreenTable green;
    NoiseMoments moments;
};

Tables build(const BathSpec& bath, double h, double horizon)
{
    Tables t;
    t.kernels = tabulate_kernels(bath, h, horizon);
    t.green = solve_green(bath, t.kernels, horizon);
    t.moments = accumulate_noise_moments(t.green, t.kernels);
    return t;
}

Eigen::Matrix2d free_rotation(double t)
{
    Eigen::Matrix2d m;
    m << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    return m;
}
} // namespace

TEST_CASE("squeezed vacuum")
{
    for (double r : {0.0, 0.7, 2.0}) {
        const SqueezeParams p{r, 0.0};
        CHECK(p.energy() >= 0.5);
        CHECK(p.energy() == doctest::Approx((p.xi() + 1.0 / p.xi()) / 4.0).epsilon(1e-14));
        CHECK(squeeze_energy(r) == p.energy());
        for (double th : {0.0, 0.4, 1.3}) {
            const Eigen::Matrix2d s = squeezed_covariance(r, th);
            CHECK(s.determinant() == doctest::Approx(0.25).epsilon(1e-10));
            CHECK(oracle::min_eigenvalue(s) == doctest::Approx(0.5 / p.xi()).epsilon(1e-10));
        }
    }
    CHECK(squeezed_covariance(1.0, 0.0)(0, 0) == doctest::Approx(std::exp(2.0) / 2.0));
    const Eigen::Matrix2f single = squeezed_covariance(1.0f, 0.0f);
    CHECK(single(1, 1) == doctest::Approx(std::exp(-2.0) / 2.0).epsilon(1e-6));
}

TEST_CASE("force shapes")
{
    CHECK(ForceShape::constant()(3.0) == 1.0);
    CHECK(ForceShape::resonant()(0.0) == 1.0);
    CHECK(ForceShape::resonant().integral_of_square(kHalfPi) == doctest::Approx(std::numbers::pi / 4.0));
    CHECK(ForceShape::constant().integral_of_square(kHalfPi) == doctest::Approx(kHalfPi));
    const ForceShape custom = ForceShape::custom([](double t) { return std::cos(t); });
    CHECK(custom.kind() == ForceShape::Kind::Custom);
    CHECK(custom.integral_of_square(kHalfPi) == doctest::Approx(std::numbers::pi / 4.0).epsilon(1e-9));
    CHECK_THROWS_AS(ForceShape::custom(nullptr), std::invalid_argument);
}

TEST_CASE("noise moments against a direct double sum")
{
    const double h = 0.01;
    const Tables t = build(kBath, h, 0.6);
    const auto n = static_cast<Eigen::Index>(t.green.size());
    for (Eigen::Index k : {Eigen::Index{1}, Eigen::Index{7}, n - 1}) {
        double bx = 0.0, bp = 0.0, bxp = 0.0;
        for (Eigen::Index i = 0; i <= k; ++i)
            for (Eigen::Index j = 0; j <= k; ++j) {
                const double w = ((i == 0 || i == k) ? 0.5 : 1.0) * ((j == 0 || j == k) ? 0.5 : 1.0) * h * h;
                const double nu = t.kernels.nu_of_t[std::abs(i - j)];
                bx += w * t.green.g[i] * t.green.g[j] * nu;
                bp += w * t.green.gdot[i] * t.green.gdot[j] * nu;
                bxp += w * t.green.g[i] * t.green.gdot[j] * nu;
            }
        CHECK(t.moments.beta_x[k] == doctest::Approx(bx).epsilon(1e-10));
        CHECK(t.moments.beta_p[k] == doctest::Approx(bp).epsilon(1e-10));
        CHECK(t.moments.beta_xp[k] == doctest::Approx(bxp).epsilon(1e-10));
    }
    CHECK(t.moments.beta_x[0] == 0.0);
    // first step: (h/2)^2 G(h)^2 nu0 with G(h) ~ h
    CHECK(t.moments.beta_x[1] == doctest::Approx(t.kernels.nu_of_t[0] * std::pow(h, 4) / 4.0).epsilon(1e-3));
}

TEST_CASE("noise moments are a valid covariance")
{
    for (double temp : {0.0, 1.0}) {
        const Tables t = build({0.1, 10.0, temp}, 0.005, kHalfPi);
        for (std::size_t i = 0; i < t.moments.size(); ++i) {
            const Eigen::Matrix2d b = t.moments.matrix(i);
            CHECK(b(0, 0) >= 0.0);
            CHECK(b(1, 1) >= 0.0);
            CHECK(b(0, 0) * b(1, 1) >= b(0, 1) * b(0, 1) * (1.0 - 1e-12));
        }
    }
    const Tables ideal = build({0.0, 10.0, 0.0}, 0.005, 1.0);
    CHECK(ideal.moments.beta_x.cwiseAbs().maxCoeff() == 0.0);
    CHECK(ideal.moments.beta_p.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("memory-kernel covariance")
{
    const Tables t = build(kBath, 0.005, kHalfPi);
    const SqueezeParams p{1.5, 0.3};

    const CovarianceState s0 = covariance_nonmarkovian(t.green, t.moments, p, 0);
    CHECK((s0.sigma - squeezed_covariance(p.r, p.theta)).cwiseAbs().maxCoeff() < 1e-12);

    for (double temp : {0.0, 0.5})
        for (double r : {0.5, 2.0, 4.0})
            for (double th : {0.0, 0.7, 2.1}) {
                const Tables tt = temp == 0.0 ? t : build({0.1, 10.0, temp}, 0.005, kHalfPi);
                for (std::size_t i = 0; i < tt.green.size(); i += 5) {
                    const Eigen::Matrix2d s = covariance_nonmarkovian(tt.green, tt.moments, {r, th}, i).sigma;
                    CHECK(s.determinant() >= 0.25 * (1.0 - 1e-9));
                }
            }

    // propagator form M sigma0 M^T + beta
    auto window = WindowDynamics::nonmarkovian(std::make_shared<const GreenTable>(t.green),
                                               std::make_shared<const NoiseMoments>(t.moments), 200);
    const Eigen::Matrix2d m = window.transfer();
    const Eigen::Matrix2d expected =
        m * squeezed_covariance(p.r, p.theta) * m.transpose() + t.moments.matrix(200);
    CHECK((window.covariance(p) - expected).cwiseAbs().maxCoeff() < 1e-10 * expected.norm());

    // the undamped oscillator keeps a pure state
    const Tables ideal = build({0.0, 10.0, 0.0}, 0.005, kHalfPi);
    for (std::size_t i = 0; i < ideal.green.size(); i += 13)
        CHECK(covariance_nonmarkovian(ideal.green, ideal.moments, {2.0, 0.4}, i).sigma.determinant() ==
              doctest::Approx(0.25).epsilon(1e-5));
}

TEST_CASE("cross term equals half the time derivative of sxx")
{
    const SqueezeParams p{1.0, 0.4};
    double prev = 0.0;
    for (double h : {0.01, 0.005}) {
        const Tables t = build(kBath, h, 1.2);
        double err = 0.0;
        for (std::size_t i = 1; i + 1 < t.green.size(); ++i) {
            const double up = covariance_nonmarkovian(t.green, t.moments, p, i + 1).sxx();
            const double down = covariance_nonmarkovian(t.green, t.moments, p, i - 1).sxx();
            const double sxp = covariance_nonmarkovian(t.green, t.moments, p, i).sxp();
            err = std::max(err, std::abs(sxp - (up - down) / (4.0 * h)));
        }
        CHECK(err < 1e-3);
        if (prev > 0.0) CHECK(prev / err > 3.0);
        prev = err;
    }
}

TEST_CASE("Markovian covariance")
{
    const double n_t = thermal_occupation(1.0);
    const SqueezeParams p{2.0, 0.8};

    CHECK((covariance_markovian(0.1, n_t, p, 0.0).sigma - squeezed_covariance(p.r, p.theta)).norm() < 1e-12);

    for (double t : {0.1, 0.9, 3.0}) {
        const Eigen::Matrix2d m = std::exp(-0.05 * t) * free_rotation(t);
        const Eigen::Matrix2d expected = m * squeezed_covariance(p.r, p.theta) * m.transpose() +
                                         Eigen::Matrix2d::Identity() * (1.0 - std::exp(-0.1 * t)) * (n_t + 0.5);
        const Eigen::Matrix2d s = covariance_markovian(0.1, n_t, p, t).sigma;
        CHECK((s - expected).norm() < 1e-12 * expected.norm());
        CHECK(s.determinant() >= 0.25);

        const WindowDynamics w = WindowDynamics::markovian({0.1, 10.0, 1.0}, t);
        CHECK((w.covariance(p) - s).norm() < 1e-12 * s.norm());
        // eigenvalues do not depend on theta
        const double lmin = oracle::min_eigenvalue(s);
        CHECK(oracle::min_eigenvalue(covariance_markovian(0.1, n_t, {p.r, 0.1}, t).sigma) ==
              doctest::Approx(lmin).epsilon(1e-10));
        CHECK(w.lambda_min(p.r) == doctest::Approx(lmin).epsilon(1e-10));
    }

    // thermalization
    const Eigen::Matrix2d late = covariance_markovian(0.1, n_t, p, 500.0).sigma;
    CHECK((late - Eigen::Matrix2d::Identity() * (n_t + 0.5)).cwiseAbs().maxCoeff() < 1e-8);

    // gamma = 0: rotated pure squeezed state, same as the undamped memory-kernel solution
    const Tables ideal = build({0.0, 10.0, 0.0}, 0.005, kHalfPi);
    const std::size_t last = ideal.green.size() - 1;
    const Eigen::Matrix2d a = covariance_markovian(0.0, 0.0, {1.0, 0.3}, ideal.green.time(last)).sigma;
    const Eigen::Matrix2d b = covariance_nonmarkovian(ideal.green, ideal.moments, {1.0, 0.3}, last).sigma;
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("response vector")
{
    const Eigen::Vector2d ideal = WindowDynamics::ideal(kHalfPi).response(ForceShape::constant(), 0.0);
    CHECK(ideal[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ideal[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(response_vector_markovian(ForceShape::constant(), 0.1, 0.0, 0.0).norm() == 0.0);

    // exact antiderivatives against quadrature through a custom profile
    for (const ForceShape& shape : {ForceShape::constant(), ForceShape::resonant()}) {
        const ForceShape copy = ForceShape::custom([shape](double t) { return shape(t); });
        for (double t0 : {0.0, 0.3, 1.1})
            for (double tau : {0.05, 0.4, kHalfPi}) {
                const Eigen::Vector2d exact = response_vector_markovian(shape, 0.1, t0, tau);
                const Eigen::Vector2d quad = response_vector_markovian(copy, 0.1, t0, tau);
                CHECK((exact - quad).cwiseAbs().maxCoeff() < 1e-8);
                const Eigen::Vector2d simpson(
                    oracle::simpson([&](double s) { return shape(t0 + tau - s) * std::exp(-0.05 * s) * std::sin(s); },
                                    0.0, tau, 2000),
                    oracle::simpson([&](double s) { return shape(t0 + tau - s) * std::exp(-0.05 * s) * std::cos(s); },
                                    0.0, tau, 2000));
                CHECK((exact - simpson).cwiseAbs().maxCoeff() < 1e-10);
            }
    }

    // memory-kernel grid: undamped limit and small-window expansion
    const Tables un = build({0.0, 10.0, 0.0}, 0.005, kHalfPi);
    const Eigen::Vector2d bu = response_vector(ForceShape::constant(), un.green, 0.0, un.green.horizon());
    CHECK(bu[0] == doctest::Approx(1.0 - std::cos(un.green.horizon())).epsilon(1e-5));
    CHECK(bu[1] == doctest::Approx(std::sin(un.green.horizon())).epsilon(1e-5));

    const Tables t = build(kBath, 0.001, 0.02);
    const double tau = t.green.horizon();
    const Eigen::Vector2d small = response_vector(ForceShape::constant(), t.green, 0.0, tau);
    CHECK(small[0] == doctest::Approx(tau * tau / 2.0).epsilon(0.01));
    CHECK(small[1] == doctest::Approx(tau).epsilon(0.01));
    CHECK(response_vector(ForceShape::constant(), t.green, 0.0, 0.0).norm() == 0.0);
    CHECK_THROWS_AS(response_vector(ForceShape::constant(), t.green, 0.0, 0.0105), std::invalid_argument);
}

TEST_CASE("window dynamics on a fresh grid")
{
    const WindowDynamics w = WindowDynamics::nonmarkovian(kBath, 0.1, 0.005);
    CHECK(w.branch() == BathBranch::NonMarkovian);
    CHECK(w.tau() == doctest::Approx(0.1));
    CHECK(w.grid_step() == doctest::Approx(0.1 / 64.0));
    const CovarianceState st = w.state({1.0, 0.2}, ForceShape::constant(), 0.0);
    CHECK(st.sigma.determinant() >= 0.25);
    CHECK(st.bp() == doctest::Approx(0.1).epsilon(0.01));
    CHECK(parse_branch(to_string(BathBranch::Markovian)) == BathBranch::Markovian);
    CHECK_THROWS_AS(parse_branch("nope"), std::invalid_argument);
}
