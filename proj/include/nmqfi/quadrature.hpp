#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature on finite intervals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

namespace nmqfi::quad {

template <typename Scalar>
struct Result {
    Scalar value{0};
    Scalar error{0};
    std::size_t intervals{0};
    bool converged{false};
};

namespace detail {

template <typename Scalar>
struct Segment {
    Scalar a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename Scalar, typename F>
Segment<Scalar> kronrod15(F& f, Scalar a, Scalar b)
{
    static constexpr std::array<double, 8> xgk{
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
    static constexpr std::array<double, 8> wgk{
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr std::array<double, 4> wg{
        0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
        0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

    const Scalar centre = (a + b) / 2;
    const Scalar half = (b - a) / 2;
    const Scalar fc = f(centre);
    Scalar kronrod = fc * Scalar(wgk[7]);
    Scalar gauss = fc * Scalar(wg[3]);
    for (std::size_t j = 0; j < 7; ++j) {
        const Scalar dx = half * Scalar(xgk[j]);
        const Scalar fsum = f(centre - dx) + f(centre + dx);
        kronrod += Scalar(wgk[j]) * fsum;
        if (j % 2 == 1) gauss += Scalar(wg[j / 2]) * fsum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

} // namespace detail

/// Integrates f over [a, b], bisecting the worst segment until the summed
/// error estimate is below max(abs_tol, rel_tol * |I|). The cut points in
/// `breaks` seed the initial partition.
template <typename Scalar, typename F>
Result<Scalar> integrate(F&& f, const std::vector<Scalar>& breaks, Scalar abs_tol, Scalar rel_tol,
                         std::size_t max_intervals = 4000)
{
    std::priority_queue<detail::Segment<Scalar>> heap;
    Scalar value = 0;
    Scalar error = 0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        auto s = detail::kronrod15<Scalar>(f, breaks[i], breaks[i + 1]);
        value += s.value;
        error += s.error;
        heap.push(s);
    }
    while (error > std::max(abs_tol, rel_tol * std::abs(value)) && heap.size() < max_intervals) {
        const auto worst = heap.top();
        heap.pop();
        const Scalar mid = (worst.a + worst.b) / 2;
        auto left = detail::kronrod15<Scalar>(f, worst.a, mid);
        auto right = detail::kronrod15<Scalar>(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Recompute from scratch; the running sums accumulate cancellation noise.
    Result<Scalar> out;
    out.intervals = heap.size();
    while (!heap.empty()) {
        out.value += heap.top().value;
        out.error += heap.top().error;
        heap.pop();
    }
    out.converged = out.error <= std::max(abs_tol, rel_tol * std::abs(out.value));
    return out;
}

template <typename Scalar, typename F>
Result<Scalar> integrate(F&& f, Scalar a, Scalar b, Scalar abs_tol, Scalar rel_tol,
                         std::size_t max_intervals = 4000)
{
    return integrate<Scalar>(std::forward<F>(f), std::vector<Scalar>{a, b}, abs_tol, rel_tol,
                             max_intervals);
}

} // namespace nmqfi::quad
