#pragma once

#include <string>

#include "spendmax/model.hpp"

namespace spendmax {

// Regions of the dual state (y, h).  For a reference level h the thresholds
//
//     y_floor(h) = (1-lambda) e^{(lambda-1) beta h}
//     y_lower(h) = e^{(lambda-1) beta h}
//     y_upper(h) = e^{lambda beta h}
//
// split the half-line: consumption is zero above y_upper, interior between
// the two inner thresholds, pinned at the reference on (y_floor, y_lower],
// and pushes the reference upward exactly on y == y_floor.  States below
// y_floor are outside the effective domain (the reference jumps up first).
enum class Regime {
    ZeroConsumption,
    Interior,
    PeakTracking,
    SingularBoundary,
    BelowDomain,
};

std::string to_string(Regime r);

// Coefficients of the homogeneous parts y^{r1}, y^{r2} of the dual value in
// the three regions, as functions of the reference level h.
// c2: zero-consumption region; c3/c4: interior; c5/c6: peak-tracking.
// lambda = 0 uses only c2/c3 (constants); lambda = 1 has c6 == 0.
struct DualCoefficients {
    double c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0, c6 = 0.0;
};

// Closed-form dual value function v(y, h) together with its y-derivatives,
// regime classification and the defining ODE residual.  Immutable after
// construction; all evaluations are pure and thread-safe.
class DualSolution {
public:
    DualSolution(const ModelParams& params, const DerivedConstants& constants);

    const ModelParams& params() const { return params_; }
    const DerivedConstants& constants() const { return constants_; }

    double y_upper(double h) const;
    double y_lower(double h) const;
    double y_floor(double h) const;

    DualCoefficients coefficients(double h) const;  // throws DomainError if h < 0

    Regime classify(double y, double h) const;

    // Dual value and derivatives.  Throw DomainError for states below the
    // effective domain (project the reference level first).
    double v(double y, double h) const;
    double v_y(double y, double h) const;
    double v_yy(double y, double h) const;

    // Central finite difference in h (one-sided next to the domain edge).
    // Verification probe only; step 1e-5 * max(1, h).
    double v_h(double y, double h) const;

    // Right-hand side of the dual variational equality, and the residual
    //   kappa^2/2 y^2 v_yy + (rho - r) y v_y - rho v - rhs
    // which the closed form should solve to rounding error.
    double rhs(double y, double h) const;
    double ode_residual(double y, double h) const;

    // The general-rho closed form solves the ODE for any admissible
    // parameters but is only the value function where it stays convex; a
    // probe grid is scanned at construction.  When this is false the dual
    // remains evaluable for diagnostics, but inversion is refused.
    bool convexity_verified() const { return convex_ok_; }

private:
    ModelParams params_;
    DerivedConstants constants_;
    double log_slope_const_;  // (rho - r + kappa^2/2) / r
    bool convex_ok_ = true;

    bool probe_convexity() const;  // general-rho guard, run at construction
};

}  // namespace spendmax
