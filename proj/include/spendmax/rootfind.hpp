#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "spendmax/errors.hpp"

namespace spendmax {

struct RootResult {
    double x = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Newton iteration for a strictly monotone f on a valid bracket [lo, hi],
// safeguarded by bisection: any step leaving the current bracket falls back
// to the midpoint.  FDf must return {f(x), f'(x)}; `increasing` declares the
// sign convention, which spares evaluating an endpoint just to learn it.
// With a monotone bracket convergence is unconditional.
template <class FDf>
RootResult newton_monotone(FDf&& fdf, double lo, double hi, double x0, bool increasing,
                           double rel_tol = 1e-12, int max_iter = 200) {
    double x = std::clamp(x0, lo, hi);
    for (int it = 1; it <= max_iter; ++it) {
        auto [f, df] = fdf(x);
        if (f == 0.0) return {x, it, true};
        if ((f < 0.0) == increasing)
            lo = x;
        else
            hi = x;

        double xn = (df != 0.0) ? x - f / df : 0.5 * (lo + hi);
        if (!(xn > lo) || !(xn < hi)) xn = 0.5 * (lo + hi);

        const double scale = std::max(1.0, std::abs(xn));
        if (std::abs(xn - x) <= rel_tol * scale || hi - lo <= rel_tol * scale)
            return {xn, it, true};
        x = xn;
    }
    return {x, max_iter, false};
}

}  // namespace spendmax
