#pragma once

// Sequential-measurement protocol: the total probing time is split into N
// windows, each re-prepared in the same squeezed state; QFIs of the windows
// add. Optimizes the per-window squeeze angles and N.

#include "nmqfi/bath_kernels.hpp"
#include "nmqfi/gaussian_dynamics.hpp"
#include "nmqfi/qfi_engine.hpp"

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace nmqfi {

struct ProtocolConfig {
    BathSpec bath;
    BathBranch branch{BathBranch::NonMarkovian};
    ForceShape shape{ForceShape::constant()};
    double r{0.0};
    double t_tot{std::numbers::pi / 2.0};
    double max_step{0.005}; // grid step cap for the memory-kernel windows
    int n_max{0};           // 0: default_n_max()
    ThetaSearch search;

    void validate() const;
};

struct ProtocolResult {
    int n{0};
    std::vector<double> thetas;
    std::vector<double> h_per_step;
    double h_total{0.0};

    double sensitivity() const noexcept { return 1.0 / h_total; }
};

/// Memoized single-window dynamics per (branch, N) for a fixed bath, total
/// time and grid cap. Safe to share between threads; entries are built once.
class WindowCache {
public:
    WindowCache(BathSpec bath, double t_tot, double max_step, KernelOptions opts = {});

    const WindowDynamics& window(BathBranch branch, int n);

    const BathSpec& bath() const noexcept { return bath_; }
    double t_tot() const noexcept { return t_tot_; }
    double max_step() const noexcept { return max_step_; }

    /// True if the cache was built for the bath, total time and grid of `config`.
    bool matches(const ProtocolConfig& config) const noexcept;

private:
    struct Entry {
        std::once_flag once;
        std::unique_ptr<WindowDynamics> window;
    };

    BathSpec bath_;
    double t_tot_;
    double max_step_;
    KernelOptions opts_;
    std::mutex mutex_;
    std::map<std::pair<int, int>, std::unique_ptr<Entry>> entries_;
};

/// QFI of N equal windows tau = t_tot / N,
///   H = sum_k b(k tau; tau)^T sigma^{-1}(theta_k, tau) b(k tau; tau),
/// with every theta_k optimized independently.
ProtocolResult sequential_qfi(const ProtocolConfig& config, int n, WindowCache& cache);
ProtocolResult sequential_qfi(const ProtocolConfig& config, int n);

/// ceil(4 t_tot sqrt(2 nu0 xi)), at least 16.
int default_n_max(const ProtocolConfig& config);

struct ProtocolScan {
    int n_opt{1};
    ProtocolResult best;
    std::vector<std::pair<int, double>> curve; // (N, H) for every evaluated N, ascending N
    int n_max{0};
    bool converged{true}; // false if the optimum sits on the upper end of the range
};

/// Exact scan for N <= 256, geometric stride x1.1 above, then exact
/// refinement between the coarse neighbours of the best N.
ProtocolScan optimize_protocol(const ProtocolConfig& config, WindowCache& cache, unsigned threads = 0);
ProtocolScan optimize_protocol(const ProtocolConfig& config, unsigned threads = 0);

/// Evaluates H(N) for the listed N (no optimization over N).
std::vector<std::pair<int, double>> protocol_curve(const ProtocolConfig& config, const std::vector<int>& ns,
                                                   WindowCache& cache, unsigned threads = 0);

struct AsymptoticOptimum {
    double n_opt{0.0};   // t_tot sqrt(2 nu0 xi)
    double h_opt{0.0};   // sqrt(xi / (2 nu0)) int_0^t_tot s^2
    double tau_opt{0.0}; // (2 nu0 xi)^{-1/2}
    bool valid{true};    // fast-measurement regime satisfied
    std::string warning;
};

/// Fast-measurement closed forms for the memory-kernel bath. `bath` is only
/// used to check the regime of validity.
AsymptoticOptimum asymptotic_qfi(double t_tot, const ForceShape& shape, double xi, double nu0,
                                 const BathSpec& bath);

struct SweepPoint {
    double r{0.0};
    double energy{0.0};
    int n_opt{1};
    double h_opt{0.0};
    bool converged{true};
};

/// optimize_protocol at every r in `rs` (other fields from `base`).
std::vector<SweepPoint> sweep_squeezing(const ProtocolConfig& base, const std::vector<double>& rs,
                                        WindowCache& cache, unsigned threads = 0);

/// Rescaling of the optimum against the total energy E_tot = N_opt E.
struct TotalEnergyPoint {
    double r{0.0};
    double e_tot{0.0};
    double e_tot_per_time{0.0}; // E_tot / t_tot
    double h_per_time{0.0};     // H_opt / t_tot
};

std::vector<TotalEnergyPoint> total_energy_view(const std::vector<SweepPoint>& sweep, double t_tot);

struct TotalEnergyCoefficients {
    double d1_prime{0.0}; // d1 (d0 pi^2 / 4)^{-1/3}
    double c1_prime{0.0}; // 2 c1 / pi
    double c2_prime{0.0}; // c2 sqrt(8 c0 / pi^3)
};

TotalEnergyCoefficients total_energy_coefficients(double d0, double d1, double c0, double c1, double c2);

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0: hardware).
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

} // namespace nmqfi
