#include "doctest.h"
#include "oracles.hpp"

#include "nmqfi/bath_kernels.hpp"
#include "nmqfi/errors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

using namespace nmqfi;

namespace {
const BathSpec kBath{0.1, 10.0, 0.0};
}

TEST_CASE("spectral density and thermal occupation")
{
    CHECK(kBath.spectral_density(0.0) == 0.0);
    CHECK(kBath.spectral_density(1.0) == doctest::Approx(0.2 / std::numbers::pi * std::exp(-0.01)).epsilon(1e-14));
    CHECK(thermal_occupation(0.0) == 0.0);
    CHECK(thermal_occupation(1.0) == doctest::Approx(1.0 / (std::exp(1.0) - 1.0)).epsilon(1e-14));
    CHECK_THROWS_AS(BathSpec({0.1, 0.0, 0.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(BathSpec({-0.1, 10.0, 0.0}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(BathSpec({0.1, 10.0, -1.0}).validate(), std::invalid_argument);
    CHECK_NOTHROW(BathSpec({0.0, 10.0, 0.0}).validate());
}

TEST_CASE("memory kernel closed form agrees with its frequency integral")
{
    CHECK(memory_kernel(kBath, 0.0) == doctest::Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-14));
    for (double t = 0.0; t <= 5.0 + 1e-12; t += 0.125) {
        const double closed = memory_kernel(kBath, t);
        CHECK(std::abs(closed - memory_kernel_by_quadrature(kBath, t)) < 1e-8);
        const double simpson = oracle::simpson(
            [t](double w) { return 0.2 / std::numbers::pi * std::exp(-w * w / 100.0) * std::cos(w * t); }, 0.0,
            80.0, 200000);
        CHECK(std::abs(closed - simpson) < 1e-8);
    }
}

TEST_CASE("noise kernel at zero temperature")
{
    const double nu0 = noise_kernel(kBath, 0.0);
    CHECK(nu0 == doctest::Approx(0.1 * 100.0 / (2.0 * std::numbers::pi)).epsilon(1e-10));
    CHECK(std::abs(nu0 - 1.5915) < 1e-4);
    for (double t : {0.01, 0.1, 0.3, 0.5, 1.0, 2.5, 5.0}) {
        const double v = noise_kernel(kBath, t);
        CHECK(std::abs(v - oracle::noise_kernel(0.1, 10.0, 0.0, t)) < 1e-8);
        CHECK(std::abs(v) <= nu0);
    }
}

TEST_CASE("noise kernel is stable under tolerance halving")
{
    KernelOptions tight;
    tight.rel_tol = 0.5e-10;
    tight.abs_tol = 0.5e-13;
    for (double t : {0.0, 0.2, 1.3, 4.0})
        CHECK(std::abs(noise_kernel(kBath, t) - noise_kernel(kBath, t, tight)) < 1e-10);
}

TEST_CASE("noise kernel at finite temperature")
{
    for (double temp : {0.0, 0.1, 1.0, 10.0}) {
        const BathSpec bath{0.1, 10.0, temp};
        for (double t : {0.0, 0.05, 0.5, 1.5}) {
            const double v = noise_kernel(bath, t);
            CHECK(std::isfinite(v));
            CHECK(std::abs(v - oracle::noise_kernel(0.1, 10.0, temp, t)) < 1e-7 * std::max(1.0, temp));
        }
    }
    // hotter bath, larger fluctuations
    CHECK(noise_kernel({0.1, 10.0, 1.0}, 0.0) > noise_kernel(kBath, 0.0));
}

TEST_CASE("kernel moments")
{
    const NuMoments m = nu_moments(kBath);
    CHECK(std::abs(m.nu0 - 1.5915) < 1e-4);
    CHECK(m.nu0 == doctest::Approx(noise_kernel(kBath, 0.0)).epsilon(1e-10));
    // -int w^2 J/2 = -gamma Lambda^4 / (2 pi) at T = 0
    CHECK(m.nu2 == doctest::Approx(-0.1 * 1e4 / (2.0 * std::numbers::pi)).epsilon(1e-8));
    // curvature of nu at the origin
    const double h = 1e-3;
    const double fd = (noise_kernel(kBath, h) - 2.0 * m.nu0 + noise_kernel(kBath, -h)) / (h * h);
    CHECK(fd == doctest::Approx(m.nu2).epsilon(1e-4));

    const NuMoments zero = nu_moments({0.0, 10.0, 0.0});
    CHECK(zero.nu0 == 0.0);
    CHECK(zero.nu2 == 0.0);
}

TEST_CASE("tabulation")
{
    const KernelTable table = tabulate_kernels(kBath, 0.005, std::numbers::pi / 2.0);
    CHECK(table.size() == 316);
    CHECK(table.horizon() >= std::numbers::pi / 2.0 - 1e-12);
    for (std::size_t i : {std::size_t{0}, std::size_t{40}, std::size_t{315}}) {
        CHECK(table.gamma_of_t[static_cast<Eigen::Index>(i)] == memory_kernel(kBath, table.time(i)));
        CHECK(std::abs(table.nu_of_t[static_cast<Eigen::Index>(i)] - noise_kernel(kBath, table.time(i))) < 1e-12);
    }
    CHECK(default_kernel_step(kBath) == doctest::Approx(0.005));
    CHECK(default_kernel_step({0.1, 100.0, 0.0}) == doctest::Approx(0.002));
    CHECK_THROWS_AS(tabulate_kernels(kBath, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(tabulate_kernels({0.1, -1.0, 0.0}, 0.005, 1.0), std::invalid_argument);
}

TEST_CASE("non-convergent quadrature is reported")
{
    KernelOptions impossible;
    impossible.rel_tol = 0.0;
    impossible.abs_tol = 0.0;
    CHECK_THROWS_AS(noise_kernel(kBath, 0.7, impossible), NumericalError);
    CHECK_THROWS_AS(noise_kernel({0.1, 1e9, 0.0}, 1e-3), NumericalError);
}
