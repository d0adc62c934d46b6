#pragma once

#include <cstdint>
#include <vector>

#include "spendmax/primal.hpp"

namespace spendmax {

struct PathConfig {
    double horizon = 100.0;  // years
    double dt = 1e-3;        // step, years
    std::size_t n_paths = 1;
    std::uint64_t seed = 0;
    bool antithetic = false;
    int threads = 1;  // 0 = hardware concurrency
    // Run the noise-free ODE limit (all Brownian increments zero).  Useful
    // for deterministic convergence checks.
    bool zero_noise = false;
};

// One simulated path on the time grid.  Dual-side simulations fill
// times/w/y/h_hat (and c); primal-side simulations fill everything.
struct SimPath {
    std::vector<double> times, w, y, h_hat, x, c, pi;
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    // Deterministic bound on what the truncated tail [T, infinity) could
    // still contribute (value lies in [value + tail_low, value + tail_high]
    // up to sampling error).
    double tail_low = 0.0;
    double tail_high = 0.0;
};

enum class BaselinePolicy {
    ZeroAll,                    // consume nothing, invest nothing
    ConstantReferenceFraction,  // c = lambda * h0 until ruin, no risky asset
    MertonNoReference,          // optimal policy of the lambda = 0 problem
};

// Monte Carlo machinery on top of the closed-form policies: exact sampling
// of the dual process, the running-minimum reference update product, the
// budget-constraint solve, and Euler simulation of the optimal wealth SDE.
// Deterministic given (seed, n_paths) regardless of thread count.
class Simulator {
public:
    explicit Simulator(const PrimalSolution& primal);

    const PrimalSolution& primal() const { return primal_; }

    // Dual process Y (exact lognormal steps) and the reference level driven
    // by its discrete running minimum.  If y0 lies below the floor the
    // reference jumps up at t = 0.
    SimPath simulate_dual_path(double y0, double h0, const PathConfig& cfg,
                               std::size_t path_index) const;

    // Price of the optimal consumption stream under the pricing kernel,
    // E[ integral of c_t M_t dt ], truncated at the horizon (tail_high
    // bounds the remainder).  The stream starts from the wealth carried by
    // the dual point, x0 = g(y, h), so at y = f(x, h) the estimate recovers
    // x: the budget-constraint equation pinning the dual multiplier.
    McEstimate budget_functional(double y, double h, const PathConfig& cfg) const;

    // Dual multiplier matching an initial budget x: bisection on y with
    // common random numbers until the budget matches x within its standard
    // error (or 1e-3 relative).
    double solve_ystar(double x, double h, const PathConfig& cfg) const;

    // Euler-Maruyama simulation of the wealth SDE under the feedback
    // policy.  Wealth is floored at zero (absorbing); the reference is
    // updated after the consumption decision.
    SimPath simulate_primal_path(double x0, double h0, const PathConfig& cfg,
                                 std::size_t path_index) const;

    // Sample mean of the discounted utility integral over [0, T] under the
    // optimal policy; tail_low is the worst-case truncated remainder.
    McEstimate mc_value_estimate(double x0, double h0, const PathConfig& cfg) const;

    // Same estimate under a deliberately suboptimal policy (for dominance
    // checks against the optimal one on shared seeds).
    McEstimate mc_value_baseline(double x0, double h0, const PathConfig& cfg,
                                 BaselinePolicy policy) const;

    // Average over paths of sup_t |X_t - g(Y_t, H_t)| / (1 + |X_t|), with the
    // dual path driven by y* = f(x0, h0) and both sides sharing Brownian
    // increments.  O(sqrt(dt)) for the Euler scheme.
    double dual_primal_consistency(double x0, double h0, const PathConfig& cfg) const;

    // The same metric at cfg.dt and cfg.dt/2 on a shared Brownian path
    // (fine increments pairwise-summed for the coarse grid), so the
    // strong-order ratio coarse/fine is stable path by path.
    struct ConsistencyPair {
        double coarse = 0.0, fine = 0.0;
    };
    ConsistencyPair dual_primal_consistency_refined(double x0, double h0,
                                                    const PathConfig& cfg) const;

    // Sample mean of e^{-rho T} v(Y_T, H_T) at T = cfg.horizon; tends to 0
    // as the horizon grows.
    double transversality_probe(double y0, double h0, const PathConfig& cfg) const;

private:
    PrimalSolution primal_;
};

}  // namespace spendmax
