#include "spendmax/dual.hpp"

#include <cmath>

namespace spendmax {

namespace {
constexpr double kTieTol = 1e-14;  // relative tolerance for threshold ties
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::ZeroConsumption: return "zero";
        case Regime::Interior: return "interior";
        case Regime::PeakTracking: return "peak";
        case Regime::SingularBoundary: return "singular";
        case Regime::BelowDomain: return "below-domain";
    }
    return "?";
}

DualSolution::DualSolution(const ModelParams& params, const DerivedConstants& constants)
    : params_(params), constants_(constants) {
    log_slope_const_ = (params_.rho - params_.r + 0.5 * constants_.kappa * constants_.kappa) / params_.r;
    if (params_.tag.rho_case == RhoCase::General) convex_ok_ = probe_convexity();
}

double DualSolution::y_upper(double h) const {
    return std::exp(params_.lambda * params_.beta * h);
}

double DualSolution::y_lower(double h) const {
    if (params_.tag.lambda_case == LambdaCase::Zero) return 0.0;
    return std::exp((params_.lambda - 1.0) * params_.beta * h);
}

double DualSolution::y_floor(double h) const {
    return (1.0 - params_.lambda) * y_lower(h);
}

DualCoefficients DualSolution::coefficients(double h) const {
    if (h < 0.0) throw DomainError("reference level h must be nonnegative");

    const double r = params_.r, rho = params_.rho, beta = params_.beta, lam = params_.lambda;
    const double kappa = constants_.kappa, r1 = constants_.r1, r2 = constants_.r2;
    const double A = r1 - r2;

    DualCoefficients c;
    if (params_.tag.lambda_case == LambdaCase::Zero) {
        const double W = kappa * kappa / (2.0 * r * r * beta);
        c.c2 = (r1 - 1.0) / A * W;
        c.c3 = (r2 - 1.0) / A * W;
        return c;
    }

    // Shared exponentials.  Each coefficient is a combination of these five;
    // computing them once keeps large h both cheap and accurate.
    const double e1 = std::exp((lam - 1.0) * (1.0 - r2) * beta * h);
    const double e2 = std::exp((lam * (1.0 - r2) - A) * beta * h);
    const double e3 = std::exp(lam * (1.0 - r2) * beta * h);
    const double e4 = std::exp((lam - 1.0) * (1.0 - r1) * beta * h);
    const double e5 = std::exp(lam * (1.0 - r1) * beta * h);

    if (params_.tag.rho_case == RhoCase::EqualsR) {
        const double W = kappa * kappa / (2.0 * r * r * beta);
        const double P = std::pow(1.0 - lam, A) / (A * beta * r);
        const double bracket = e1 / (1.0 - r2) - lam / (lam * (1.0 - r2) - A) * e2;
        c.c6 = P * bracket;
        c.c4 = c.c6 + (1.0 - r1) / A * W * e1;
        c.c2 = c.c6 + (1.0 - r1) / A * W * (e1 - e3);
        c.c3 = (r2 - 1.0) / A * W * e5;
        c.c5 = (1.0 - r2) / A * W * (e4 - e5);
        if (params_.tag.lambda_case == LambdaCase::One) c.c6 = 0.0;
        return c;
    }

    // General rho.  Same structure with the two root-dependent weights
    //   Qi = ri (1/rho - 1/r) - (ri - 1)/r * (r - rho - kappa^2/2)/r,
    // which collapse to (ri - 1) kappa^2 / (2 r^2) when rho == r.
    const double m = (r - rho - 0.5 * kappa * kappa) / r;
    const double q1w = r1 * (1.0 / rho - 1.0 / r) - (r1 - 1.0) / r * m;
    const double q2w = r2 * (1.0 / rho - 1.0 / r) - (r2 - 1.0) / r * m;
    const double g0 = -(1.0 / (r * beta) - 1.0 / (rho * beta)) * std::pow(1.0 - lam, -r2) / (1.0 - r2) * e1;
    const double bracket2 = (1.0 - r1) / (1.0 - r2) * e1 - lam * (1.0 - r1) / (lam * (1.0 - r2) - A) * e2;
    c.c6 = g0 - q2w / ((r2 - r1) * beta) * std::pow(1.0 - lam, A) * bracket2;
    c.c4 = c.c6 + q1w / ((r2 - r1) * beta) * e1;
    c.c2 = c.c6 + q1w / ((r2 - r1) * beta) * (e1 - e3);
    c.c3 = q2w / ((r1 - r2) * beta) * e5;
    c.c5 = q2w / ((r2 - r1) * beta) * (e4 - e5);
    return c;
}

Regime DualSolution::classify(double y, double h) const {
    if (!(y > 0.0)) throw DomainError("dual state y must be positive");
    if (h < 0.0) throw DomainError("reference level h must be nonnegative");

    if (params_.tag.lambda_case == LambdaCase::Zero)
        return y >= 1.0 - kTieTol ? Regime::ZeroConsumption : Regime::Interior;

    const double yu = y_upper(h);
    if (y >= yu * (1.0 - kTieTol)) return Regime::ZeroConsumption;
    const double yl = y_lower(h);
    if (y > yl * (1.0 + kTieTol)) return Regime::Interior;
    const double yf = y_floor(h);
    if (y > yf * (1.0 + kTieTol)) return Regime::PeakTracking;
    if (y >= yf * (1.0 - kTieTol)) return Regime::SingularBoundary;
    return Regime::BelowDomain;
}

double DualSolution::v(double y, double h) const {
    const Regime reg = classify(y, h);
    const double r = params_.r, rho = params_.rho, beta = params_.beta, lam = params_.lambda;
    const double r1 = constants_.r1, r2 = constants_.r2;
    const DualCoefficients c = coefficients(h);

    switch (reg) {
        case Regime::ZeroConsumption:
            return c.c2 * std::pow(y, r2) - std::exp(lam * beta * h) / (rho * beta);
        case Regime::Interior:
            return c.c3 * std::pow(y, r1) + c.c4 * std::pow(y, r2) +
                   y / (r * beta) * (std::log(y) - lam * beta * h + log_slope_const_ - 1.0);
        case Regime::PeakTracking:
        case Regime::SingularBoundary:
            return c.c5 * std::pow(y, r1) + c.c6 * std::pow(y, r2) - h * y / r -
                   std::exp((lam - 1.0) * beta * h) / (rho * beta);
        case Regime::BelowDomain:
            break;
    }
    throw DomainError("dual state below the effective domain; project the reference first");
}

double DualSolution::v_y(double y, double h) const {
    const Regime reg = classify(y, h);
    const double r = params_.r, beta = params_.beta, lam = params_.lambda;
    const double r1 = constants_.r1, r2 = constants_.r2;
    const DualCoefficients c = coefficients(h);

    switch (reg) {
        case Regime::ZeroConsumption:
            return c.c2 * r2 * std::pow(y, r2 - 1.0);
        case Regime::Interior:
            return c.c3 * r1 * std::pow(y, r1 - 1.0) + c.c4 * r2 * std::pow(y, r2 - 1.0) +
                   (std::log(y) - lam * beta * h + log_slope_const_) / (r * beta);
        case Regime::PeakTracking:
        case Regime::SingularBoundary:
            return c.c5 * r1 * std::pow(y, r1 - 1.0) + c.c6 * r2 * std::pow(y, r2 - 1.0) - h / r;
        case Regime::BelowDomain:
            break;
    }
    throw DomainError("dual state below the effective domain; project the reference first");
}

double DualSolution::v_yy(double y, double h) const {
    const Regime reg = classify(y, h);
    const double r = params_.r, beta = params_.beta;
    const double r1 = constants_.r1, r2 = constants_.r2;
    const DualCoefficients c = coefficients(h);

    switch (reg) {
        case Regime::ZeroConsumption:
            return c.c2 * r2 * (r2 - 1.0) * std::pow(y, r2 - 2.0);
        case Regime::Interior:
            return c.c3 * r1 * (r1 - 1.0) * std::pow(y, r1 - 2.0) +
                   c.c4 * r2 * (r2 - 1.0) * std::pow(y, r2 - 2.0) + 1.0 / (r * beta * y);
        case Regime::PeakTracking:
        case Regime::SingularBoundary:
            return c.c5 * r1 * (r1 - 1.0) * std::pow(y, r1 - 2.0) +
                   c.c6 * r2 * (r2 - 1.0) * std::pow(y, r2 - 2.0);
        case Regime::BelowDomain:
            break;
    }
    throw DomainError("dual state below the effective domain; project the reference first");
}

double DualSolution::v_h(double y, double h) const {
    if (params_.tag.lambda_case == LambdaCase::Zero) return 0.0;

    const double delta = 1e-5 * std::max(1.0, h);
    const bool down_ok = h - delta >= 0.0 &&
                         classify(y, std::max(0.0, h - delta)) != Regime::BelowDomain;
    if (down_ok)
        return (v(y, h + delta) - v(y, h - delta)) / (2.0 * delta);
    // One-sided second-order stencil away from the domain edge.
    return (-3.0 * v(y, h) + 4.0 * v(y, h + delta) - v(y, h + 2.0 * delta)) / (2.0 * delta);
}

double DualSolution::rhs(double y, double h) const {
    const Regime reg = classify(y, h);
    const double beta = params_.beta, lam = params_.lambda;
    switch (reg) {
        case Regime::ZeroConsumption:
            return std::exp(lam * beta * h) / beta;
        case Regime::Interior:
            return y / beta - y * (std::log(y) / beta - lam * h);
        case Regime::PeakTracking:
        case Regime::SingularBoundary:
            return std::exp((lam - 1.0) * beta * h) / beta + h * y;
        case Regime::BelowDomain:
            break;
    }
    throw DomainError("dual state below the effective domain; project the reference first");
}

double DualSolution::ode_residual(double y, double h) const {
    const double kappa = constants_.kappa;
    double lhs = 0.5 * kappa * kappa * y * y * v_yy(y, h) - params_.rho * v(y, h);
    if (params_.tag.rho_case == RhoCase::General) lhs += (params_.rho - params_.r) * y * v_y(y, h);
    return lhs - rhs(y, h);
}

bool DualSolution::probe_convexity() const {
    // The general-rho closed form needs extra parameter conditions for the
    // dual to stay convex; scan a coarse grid.
    for (double h : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const double lo = y_floor(h), hi = 10.0 * y_upper(h);
        for (int i = 0; i <= 40; ++i) {
            const double y = lo * std::pow(hi / lo, i / 40.0);
            if (classify(y, h) == Regime::BelowDomain) continue;
            if (!(v_yy(y, h) > 0.0)) return false;
        }
    }
    return true;
}

}  // namespace spendmax
