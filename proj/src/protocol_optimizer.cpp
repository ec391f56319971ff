#include "nmqfi/protocol_optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace nmqfi {

namespace {

constexpr int kExactScanLimit = 256;
constexpr double kGeometricStride = 1.1;

} // namespace

void ProtocolConfig::validate() const
{
    bath.validate();
    if (!(t_tot > 0.0)) throw std::invalid_argument("t_tot must be > 0");
    if (!(r >= 0.0)) throw std::invalid_argument("squeeze magnitude r must be >= 0");
    if (!(max_step > 0.0)) throw std::invalid_argument("grid step must be > 0");
    if (n_max < 0) throw std::invalid_argument("n_max must be >= 1");
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn)
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (unsigned w = 0; w < threads; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

WindowCache::WindowCache(BathSpec bath, double t_tot, double max_step, KernelOptions opts)
    : bath_(bath), t_tot_(t_tot), max_step_(max_step), opts_(opts)
{
    bath_.validate();
    if (!(t_tot_ > 0.0)) throw std::invalid_argument("t_tot must be > 0");
    if (!(max_step_ > 0.0)) throw std::invalid_argument("grid step must be > 0");
}

bool WindowCache::matches(const ProtocolConfig& config) const noexcept
{
    return config.bath.gamma == bath_.gamma && config.bath.lambda == bath_.lambda &&
           config.bath.temperature == bath_.temperature && config.t_tot == t_tot_ &&
           config.max_step == max_step_;
}

const WindowDynamics& WindowCache::window(BathBranch branch, int n)
{
    if (n < 1) throw std::invalid_argument("window count must be >= 1");
    Entry* entry = nullptr;
    {
        std::lock_guard lock(mutex_);
        auto& slot = entries_[{static_cast<int>(branch), n}];
        if (!slot) slot = std::make_unique<Entry>();
        entry = slot.get();
    }
    std::call_once(entry->once, [&] {
        const double tau = t_tot_ / n;
        switch (branch) {
        case BathBranch::Ideal:
            entry->window = std::make_unique<WindowDynamics>(WindowDynamics::ideal(tau));
            break;
        case BathBranch::Markovian:
            entry->window = std::make_unique<WindowDynamics>(WindowDynamics::markovian(bath_, tau));
            break;
        case BathBranch::NonMarkovian:
            entry->window =
                std::make_unique<WindowDynamics>(WindowDynamics::nonmarkovian(bath_, tau, max_step_, opts_));
            break;
        }
    });
    return *entry->window;
}

ProtocolResult sequential_qfi(const ProtocolConfig& config, int n, WindowCache& cache)
{
    config.validate();
    if (n < 1) throw std::invalid_argument("measurement count must be >= 1");
    if (!cache.matches(config)) throw std::invalid_argument("window cache built for a different configuration");
    const double tau = config.t_tot / n;
    const WindowDynamics& window = cache.window(config.branch, n);
    if (config.branch == BathBranch::NonMarkovian && !(tau > window.grid_step()))
        throw std::invalid_argument("window length below the grid step");
    const ThetaOptimizer optimizer(window, config.r, config.search);

    ProtocolResult out;
    out.n = n;
    out.thetas.reserve(static_cast<std::size_t>(n));
    out.h_per_step.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const QfiResult step = optimizer.optimize(window.response(config.shape, k * tau));
        out.thetas.push_back(step.theta_opt);
        out.h_per_step.push_back(step.h);
        out.h_total += step.h;
    }
    return out;
}

ProtocolResult sequential_qfi(const ProtocolConfig& config, int n)
{
    WindowCache cache(config.bath, config.t_tot, config.max_step);
    return sequential_qfi(config, n, cache);
}

int default_n_max(const ProtocolConfig& config)
{
    const double nu0 = nu_moments(config.bath).nu0;
    const double xi = std::exp(2.0 * config.r);
    const double n = std::ceil(4.0 * config.t_tot * std::sqrt(2.0 * nu0 * xi));
    return std::max(16, static_cast<int>(std::min(n, 1e7)));
}

std::vector<std::pair<int, double>> protocol_curve(const ProtocolConfig& config, const std::vector<int>& ns,
                                                   WindowCache& cache, unsigned threads)
{
    std::vector<std::pair<int, double>> out(ns.size());
    parallel_for(ns.size(), threads, [&](std::size_t i) {
        out[i] = {ns[i], sequential_qfi(config, ns[i], cache).h_total};
    });
    return out;
}

ProtocolScan optimize_protocol(const ProtocolConfig& config, WindowCache& cache, unsigned threads)
{
    config.validate();
    ProtocolScan scan;
    scan.n_max = config.n_max > 0 ? config.n_max : default_n_max(config);

    std::vector<int> coarse;
    for (int n = 1; n <= std::min(kExactScanLimit, scan.n_max); ++n) coarse.push_back(n);
    while (coarse.back() < scan.n_max) {
        const int next = std::max(coarse.back() + 1, static_cast<int>(std::lround(coarse.back() * kGeometricStride)));
        coarse.push_back(std::min(next, scan.n_max));
    }

    std::map<int, double> evaluated;
    for (const auto& [n, h] : protocol_curve(config, coarse, cache, threads)) evaluated[n] = h;

    auto argmax = [&] {
        return std::max_element(evaluated.begin(), evaluated.end(),
                                [](const auto& a, const auto& b) { return a.second < b.second; })->first;
    };
    int best = argmax();
    if (best > kExactScanLimit) {
        const auto pos = std::find(coarse.begin(), coarse.end(), best) - coarse.begin();
        const int lo = coarse[static_cast<std::size_t>(pos - 1)];
        const int hi = pos + 1 < static_cast<long>(coarse.size()) ? coarse[static_cast<std::size_t>(pos + 1)] : best;
        std::vector<int> fill;
        for (int n = lo + 1; n < hi; ++n)
            if (!evaluated.count(n)) fill.push_back(n);
        for (const auto& [n, h] : protocol_curve(config, fill, cache, threads)) evaluated[n] = h;
        best = argmax();
    }

    scan.n_opt = best;
    scan.best = sequential_qfi(config, best, cache);
    scan.curve.assign(evaluated.begin(), evaluated.end());
    scan.converged = best < scan.n_max;
    return scan;
}

ProtocolScan optimize_protocol(const ProtocolConfig& config, unsigned threads)
{
    WindowCache cache(config.bath, config.t_tot, config.max_step);
    return optimize_protocol(config, cache, threads);
}

AsymptoticOptimum asymptotic_qfi(double t_tot, const ForceShape& shape, double xi, double nu0,
                                 const BathSpec& bath)
{
    if (!(t_tot > 0.0) || !(xi >= 1.0) || !(nu0 > 0.0))
        throw std::invalid_argument("asymptotic optimum needs t_tot > 0, xi >= 1, nu0 > 0");
    AsymptoticOptimum out;
    out.n_opt = t_tot * std::sqrt(2.0 * nu0 * xi);
    out.tau_opt = 1.0 / std::sqrt(2.0 * nu0 * xi);
    out.h_opt = std::sqrt(xi / (2.0 * nu0)) * shape.integral_of_square(t_tot);

    // tau_opt << max{1/gamma, 1/omega_0, 1/lambda, tau_ch}
    const double inf = std::numeric_limits<double>::infinity();
    const double tau_ch = shape.kind() == ForceShape::Kind::Constant ? inf : 1.0;
    const double bound = std::max({bath.gamma > 0.0 ? 1.0 / bath.gamma : inf, 1.0, 1.0 / bath.lambda, tau_ch});
    if (out.tau_opt > 0.1 * bound) {
        out.valid = false;
        std::ostringstream msg;
        msg << "tau_opt=" << out.tau_opt << " is not small against the slowest time scale " << bound;
        out.warning = msg.str();
    }
    return out;
}

std::vector<SweepPoint> sweep_squeezing(const ProtocolConfig& base, const std::vector<double>& rs,
                                        WindowCache& cache, unsigned threads)
{
    std::vector<SweepPoint> out;
    out.reserve(rs.size());
    for (const double r : rs) {
        ProtocolConfig cfg = base;
        cfg.r = r;
        const ProtocolScan scan = optimize_protocol(cfg, cache, threads);
        out.push_back({r, squeeze_energy(r), scan.n_opt, scan.best.h_total, scan.converged});
    }
    return out;
}

std::vector<TotalEnergyPoint> total_energy_view(const std::vector<SweepPoint>& sweep, double t_tot)
{
    std::vector<TotalEnergyPoint> out;
    out.reserve(sweep.size());
    for (const auto& p : sweep) {
        const double e_tot = p.n_opt * p.energy;
        out.push_back({p.r, e_tot, e_tot / t_tot, p.h_opt / t_tot});
    }
    return out;
}

TotalEnergyCoefficients total_energy_coefficients(double d0, double d1, double c0, double c1, double c2)
{
    constexpr double pi = std::numbers::pi;
    return {d1 * std::cbrt(4.0 / (d0 * pi * pi)), 2.0 * c1 / pi, c2 * std::sqrt(8.0 * c0 / (pi * pi * pi))};
}

} // namespace nmqfi
