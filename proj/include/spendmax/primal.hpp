#pragma once

#include <limits>

#include "spendmax/dual.hpp"

namespace spendmax {

// Wealth thresholds separating the consumption patterns at reference level h:
// consumption is zero below x_zero, stays under lambda*h below x_modr,
// reaches the reference at x_aggv, and creates a new spending maximum at
// x_splg.  lambda = 0 collapses everything to x_zero (x_aggv, x_splg
// infinite); lambda = 1 has x_modr == x_aggv and x_splg == h/r, the
// subsistence wealth whose interest finances consumption at h forever.
struct Boundaries {
    double x_zero, x_modr, x_aggv, x_splg;
};

struct PolicyPoint {
    double c;       // consumption rate
    double pi;      // amount in the risky asset
    double u;       // value
    double f;       // marginal value u_x (infinite at x == 0)
    Regime regime;
};

// Inverse of the dual transform: wealth boundaries, the marginal-value map
// f(x,h), the value u(x,h) and the feedback policies.  Pure and thread-safe.
class PrimalSolution {
public:
    explicit PrimalSolution(const DualSolution& dual);

    const DualSolution& dual() const { return dual_; }
    const ModelParams& params() const { return dual_.params(); }
    const DerivedConstants& constants() const { return dual_.constants(); }

    // Per-reference-level workspace: thresholds, coefficients and the
    // normalized peak-region weights.  Rebuilding it only when h changes is
    // what keeps pathwise simulation cheap.
    struct Context {
        double h;
        DualCoefficients coeff;
        double y_upper, y_lower, y_floor;
        double d5, d6;  // c5 * y_lower^{r1-1}, c6 * y_lower^{r2-1}
        Boundaries bounds;
    };
    Context context(double h) const;

    Boundaries boundaries(double h) const;

    // Wealth carried by a dual state: g = -v_y.  Strictly decreasing in y.
    double g(double y, double h) const;

    // Marginal value f(x, h) = u_x, the inverse of g.  Solved in closed form
    // below x_zero and by safeguarded Newton in the other regions.
    // Requires 0 <= x <= x_splg(h) (up to a 1e-12 relative slack).
    double f(double x, double h) const;
    double f(double x, const Context& ctx) const;

    // Inverse of the strictly increasing boundary x_splg: the reference
    // level whose splurge threshold equals x.  Requires x >= x_splg(0).
    double h_tilde(double x) const;

    struct Projected {
        double x, h;
        bool jumped;
    };
    // States with x > x_splg(h) jump the reference up to h_tilde(x); others
    // pass through unchanged.
    Projected project_to_domain(double x, double h) const;

    // Warm-start state for the marginal-value solves.  A simulation keeps
    // one per path; successive states are close, so Newton converges in a
    // step or two.
    struct Warm {
        double t_interior = std::numeric_limits<double>::quiet_NaN();  // ln f
        double z_peak = std::numeric_limits<double>::quiet_NaN();      // f / y_lower
    };

    // Value and feedback policy; the (x, h) overloads project internally,
    // the Context overloads require x <= x_splg up to the boundary slack.
    double value_u(double x, double h) const;
    PolicyPoint policy(double x, double h) const;
    PolicyPoint policy(double x, const Context& ctx) const;
    PolicyPoint policy(double x, const Context& ctx, Warm& warm) const;

    // Consumption and allocation only; the simulation hot path (skips the
    // value and, below x_zero, the marginal-value power).
    void policy_rates(double x, const Context& ctx, Warm& warm, double& c, double& pi) const;

    struct AsymptoticLimits {
        double consumption_wealth_ratio;  // c*/x along the splurge boundary
        double pi;                        // limiting risky amount
    };
    // Large-wealth behavior along x_splg (0 < lambda < 1 only).
    AsymptoticLimits asymptotic_limits() const;

private:
    DualSolution dual_;

    struct InteriorRoot {
        double t, e1, e2;  // t = ln f, e_i = f^{r_i - 1}
    };
    struct PeakRoot {
        double f, z, zr1, zr2;  // z = f / y_lower, zr_i = z^{r_i - 1}
    };
    InteriorRoot f_interior(double x, const Context& ctx,
                            double t_init = std::numeric_limits<double>::quiet_NaN()) const;
    PeakRoot f_peak(double x, const Context& ctx,
                    double z_init = std::numeric_limits<double>::quiet_NaN()) const;
};

}  // namespace spendmax
