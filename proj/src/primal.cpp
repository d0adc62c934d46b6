#include "spendmax/primal.hpp"

#include <cmath>

#include "spendmax/rootfind.hpp"

namespace spendmax {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBoundarySlack = 1e-12;  // x this far above x_splg counts as on it
}

PrimalSolution::PrimalSolution(const DualSolution& dual) : dual_(dual) {
    // Inversion needs a strictly convex dual; the general-rho closed form
    // does not guarantee that for all parameters.
    if (!dual_.convexity_verified())
        throw DomainError("general-rho parameters violate dual convexity; "
                          "policies and inversion are unavailable");
}

PrimalSolution::Context PrimalSolution::context(double h) const {
    if (h < 0.0) throw DomainError("reference level h must be nonnegative");
    const ModelParams& p = params();
    const DerivedConstants& k = constants();
    const double r1 = k.r1, r2 = k.r2, A = r1 - r2;
    const double lam = p.lambda, beta = p.beta, r = p.r;

    Context ctx;
    ctx.h = h;
    ctx.coeff = dual_.coefficients(h);
    ctx.y_upper = dual_.y_upper(h);
    ctx.y_lower = dual_.y_lower(h);
    ctx.y_floor = dual_.y_floor(h);

    switch (p.tag.lambda_case) {
        case LambdaCase::Zero: {
            ctx.d5 = ctx.d6 = 0.0;
            const double x0 = -ctx.coeff.c2 * r2;
            ctx.bounds = {x0, x0, kInf, kInf};
            return ctx;
        }
        case LambdaCase::One: {
            const double W = k.kappa * k.kappa / (2.0 * r * r * beta);
            ctx.d5 = (1.0 - r2) / A * W * (1.0 - std::exp(-(r1 - 1.0) * beta * h));
            ctx.d6 = 0.0;
            const double x_zero = -ctx.coeff.c2 * r2 * std::pow(ctx.y_upper, r2 - 1.0);
            const double x_aggv = -ctx.d5 * r1 + h / r;
            ctx.bounds = {x_zero, x_aggv, x_aggv, h / r};
            return ctx;
        }
        case LambdaCase::Interior:
            break;
    }

    if (p.tag.rho_case == RhoCase::EqualsR) {
        // Boundary formulas in cancellation-free form: after folding the
        // threshold powers into the coefficients only decaying exponentials
        // of h remain, so the curves stay finite for arbitrarily large h.
        const double W = k.kappa * k.kappa / (2.0 * r * r * beta);
        const double P = std::pow(1.0 - lam, A) / (A * beta * r);
        const double q1 = std::exp(-(r1 - 1.0) * beta * h);
        const double q2 = std::exp(-(1.0 - r2) * beta * h);
        const double denom = lam * (1.0 - r2) - A;  // < 0
        ctx.d5 = (1.0 - r2) / A * W * (1.0 - q1);
        ctx.d6 = P * (1.0 / (1.0 - r2) - lam / denom * q1);
        const double x_zero =
            -r2 * (P * (q2 / (1.0 - r2) - lam / denom * q1 * q2) + (1.0 - r1) / A * W * (q2 - 1.0));
        const double x_modr = -ctx.coeff.c3 * r1 - ctx.coeff.c4 * r2 + lam * h / r - W;
        const double x_aggv = -ctx.d5 * r1 - ctx.d6 * r2 + h / r;
        const double x_splg = -ctx.d5 * r1 * std::pow(1.0 - lam, r1 - 1.0) -
                              ctx.d6 * r2 * std::pow(1.0 - lam, r2 - 1.0) + h / r;
        ctx.bounds = {x_zero, x_modr, x_aggv, x_splg};
        return ctx;
    }

    // General rho: moderate h only; fold the threshold powers numerically.
    const double S = (p.rho - r + 0.5 * k.kappa * k.kappa) / r;
    ctx.d5 = ctx.coeff.c5 * std::pow(ctx.y_lower, r1 - 1.0);
    ctx.d6 = ctx.coeff.c6 * std::pow(ctx.y_lower, r2 - 1.0);
    const double x_zero = -ctx.coeff.c2 * r2 * std::pow(ctx.y_upper, r2 - 1.0);
    const double x_modr =
        -ctx.coeff.c3 * r1 - ctx.coeff.c4 * r2 + lam * h / r - S / (r * beta);
    const double x_aggv = -ctx.d5 * r1 - ctx.d6 * r2 + h / r;
    const double x_splg = -ctx.d5 * r1 * std::pow(1.0 - lam, r1 - 1.0) -
                          ctx.d6 * r2 * std::pow(1.0 - lam, r2 - 1.0) + h / r;
    ctx.bounds = {x_zero, x_modr, x_aggv, x_splg};
    return ctx;
}

Boundaries PrimalSolution::boundaries(double h) const { return context(h).bounds; }

double PrimalSolution::g(double y, double h) const { return -dual_.v_y(y, h); }

PrimalSolution::InteriorRoot PrimalSolution::f_interior(double x, const Context& ctx,
                                                        double t_init) const {
    // Solve g(y) = x in log space; t = ln y keeps the bracket well scaled
    // even when the thresholds differ by many orders of magnitude.
    const ModelParams& p = params();
    const DerivedConstants& k = constants();
    const double r1 = k.r1, r2 = k.r2;
    const double rb = p.r * p.beta;
    const double S = (p.rho - p.r + 0.5 * k.kappa * k.kappa) / p.r;
    const double c3 = ctx.coeff.c3, c4 = ctx.coeff.c4;
    const double lbh = p.lambda * p.beta * ctx.h;

    auto eval = [&](double t, double& e1, double& e2, double& val, double& der) {
        e1 = std::exp((r1 - 1.0) * t);
        e2 = std::exp((r2 - 1.0) * t);
        val = -c3 * r1 * e1 - c4 * r2 * e2 - (t - lbh + S) / rb - x;
        der = -c3 * r1 * (r1 - 1.0) * e1 - c4 * r2 * (r2 - 1.0) * e2 - 1.0 / rb;
    };

    double t_hi = lbh;  // ln y_upper
    double t_lo;
    double e1, e2, val, der;
    if (p.tag.lambda_case == LambdaCase::Zero) {
        t_lo = -1.0;  // expand downward until the bracket encloses x
        int tries = 0;
        for (;;) {
            eval(t_lo, e1, e2, val, der);
            if (val >= 0.0) break;
            t_lo *= 2.0;
            if (++tries > 80) throw BracketError("interior bracket expansion failed");
        }
    } else {
        t_lo = (p.lambda - 1.0) * p.beta * ctx.h;  // ln y_lower
    }

    // Safeguarded Newton (value strictly decreasing in t).  A warm start
    // from the previous step usually lands within tolerance immediately, in
    // which case the exponentials from the single evaluation are reused.
    double t = std::clamp(std::isnan(t_init) ? 0.5 * (t_lo + t_hi) : t_init, t_lo, t_hi);
    for (int it = 0; it < 200; ++it) {
        eval(t, e1, e2, val, der);
        const double step = val / der;
        if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(t))) {
            InteriorRoot out;
            out.t = t;
            out.e1 = e1;
            out.e2 = e2;
            return out;
        }
        if (val > 0.0)
            t_lo = t;
        else
            t_hi = t;
        double tn = t - step;
        if (!(tn > t_lo) || !(tn < t_hi)) tn = 0.5 * (t_lo + t_hi);
        t = tn;
    }
    throw BracketError("interior marginal-value solve did not converge");
}

PrimalSolution::PeakRoot PrimalSolution::f_peak(double x, const Context& ctx,
                                                double z_init) const {
    // Peak region normalized by the lower threshold: y = z * y_lower with
    // z in [1 - lambda, 1].  The folded weights d5/d6 stay O(1) in h.
    const DerivedConstants& k = constants();
    const double r1 = k.r1, r2 = k.r2;
    const double z_lo = 1.0 - params().lambda;
    const double rhs = ctx.h / params().r - x;

    double lo = z_lo, hi = 1.0;
    double z = std::clamp(std::isnan(z_init) ? 0.5 * (1.0 + z_lo) : z_init, lo, hi);
    for (int it = 0; it < 200; ++it) {
        const double zr1 = std::pow(z, r1 - 1.0);
        const double zr2 = std::pow(z, r2 - 1.0);
        const double val = -ctx.d5 * r1 * zr1 - ctx.d6 * r2 * zr2 + rhs;
        const double der = (-ctx.d5 * r1 * (r1 - 1.0) * zr1 - ctx.d6 * r2 * (r2 - 1.0) * zr2) / z;
        const double step = val / der;
        if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(z))) {
            PeakRoot out;
            out.z = z;
            out.f = z * ctx.y_lower;
            out.zr1 = zr1;
            out.zr2 = zr2;
            return out;
        }
        if (val > 0.0)
            lo = z;
        else
            hi = z;
        double zn = z - step;
        if (!(zn > lo) || !(zn < hi)) zn = 0.5 * (lo + hi);
        z = zn;
    }
    throw BracketError("peak-region marginal-value solve did not converge");
}

double PrimalSolution::f(double x, const Context& ctx) const {
    const ModelParams& p = params();
    const double r2 = constants().r2;

    if (x < 0.0) throw DomainError("wealth must be nonnegative");
    if (x == 0.0) return kInf;
    if (x <= ctx.bounds.x_zero)
        return std::pow(-x / (ctx.coeff.c2 * r2), 1.0 / (r2 - 1.0));
    if (x < ctx.bounds.x_aggv) return std::exp(f_interior(x, ctx).t);

    if (p.tag.lambda_case == LambdaCase::One && x >= ctx.bounds.x_splg) return 0.0;
    if (x > ctx.bounds.x_splg) {
        if (x <= ctx.bounds.x_splg * (1.0 + kBoundarySlack)) return ctx.y_floor;
        throw DomainError("wealth above the splurge boundary; project the reference first");
    }
    return f_peak(x, ctx).f;
}

double PrimalSolution::f(double x, double h) const { return f(x, context(h)); }

double PrimalSolution::h_tilde(double x) const {
    const ModelParams& p = params();
    if (p.tag.lambda_case == LambdaCase::Zero)
        throw DomainError("no splurge boundary exists for lambda = 0");
    if (p.tag.lambda_case == LambdaCase::One)
        throw DomainError("the reference never increases for lambda = 1");

    const double x_splg0 = boundaries(0.0).x_splg;
    if (x < x_splg0 * (1.0 - kBoundarySlack))
        throw DomainError("wealth below the splurge boundary at h = 0");
    if (x <= x_splg0) return 0.0;

    // x_splg is strictly increasing and asymptotically linear (slope 1/r),
    // so doubling finds an upper bracket quickly.
    double h_hi = 1.0;
    int tries = 0;
    while (boundaries(h_hi).x_splg < x) {
        h_hi *= 2.0;
        if (++tries > 80) throw BracketError("splurge-boundary bracket expansion failed");
    }

    const DerivedConstants& k = constants();
    const double r1 = k.r1, r2 = k.r2, A = r1 - r2;
    const double lam = p.lambda, beta = p.beta, r = p.r;
    const double W = k.kappa * k.kappa / (2.0 * r * r * beta);
    const double P = std::pow(1.0 - lam, A) / (A * beta * r);
    const double pow_r1 = std::pow(1.0 - lam, r1 - 1.0);
    const double pow_r2 = std::pow(1.0 - lam, r2 - 1.0);
    const double denom = lam * (1.0 - r2) - A;

    auto fdf = [&](double h) {
        const double val = context(h).bounds.x_splg - x;
        double der;
        if (p.tag.rho_case == RhoCase::EqualsR) {
            const double q1 = std::exp(-(r1 - 1.0) * beta * h);
            const double d5p = (1.0 - r2) / A * W * (r1 - 1.0) * beta * q1;
            const double d6p = P * lam / denom * (r1 - 1.0) * beta * q1;
            der = -d5p * r1 * pow_r1 - d6p * r2 * pow_r2 + 1.0 / r;
        } else {
            const double dh = 1e-6 * std::max(1.0, h);
            der = (context(h + dh).bounds.x_splg - context(h).bounds.x_splg) / dh;
        }
        return std::pair{val, der};
    };
    RootResult res = newton_monotone(fdf, 0.0, h_hi, 0.5 * h_hi, /*increasing=*/true);
    if (!res.converged) throw BracketError("splurge-boundary inversion did not converge");
    return res.x;
}

PrimalSolution::Projected PrimalSolution::project_to_domain(double x, double h) const {
    if (x < 0.0) throw DomainError("wealth must be nonnegative");
    if (h < 0.0) throw DomainError("reference level h must be nonnegative");
    // The reference only ratchets for interior weights; otherwise the whole
    // quadrant is already the effective domain.
    if (params().tag.lambda_case != LambdaCase::Interior) return {x, h, false};
    const double x_splg = boundaries(h).x_splg;
    if (x <= x_splg * (1.0 + kBoundarySlack)) return {x, h, false};
    return {x, h_tilde(x), true};
}

PolicyPoint PrimalSolution::policy(double x, const Context& ctx, Warm& warm) const {
    const ModelParams& p = params();
    const DerivedConstants& k = constants();
    const double r1 = k.r1, r2 = k.r2;
    const double lam = p.lambda, beta = p.beta, r = p.r;
    const double rb = r * beta;
    const double S = (p.rho - r + 0.5 * k.kappa * k.kappa) / r;
    const double risk = (p.mu - p.r) / (p.sigma * p.sigma);

    if (x < 0.0) throw DomainError("wealth must be nonnegative");

    PolicyPoint pt{};
    if (x == 0.0) {
        pt.c = 0.0;
        pt.pi = 0.0;
        pt.f = kInf;
        pt.u = -ctx.y_upper / (p.rho * beta);
        pt.regime = Regime::ZeroConsumption;
        return pt;
    }
    if (p.tag.lambda_case == LambdaCase::One && x >= ctx.bounds.x_splg) {
        // At or above subsistence wealth the bank account pays the reference.
        pt.c = ctx.h;
        pt.pi = 0.0;
        pt.f = 0.0;
        pt.u = -1.0 / rb;
        pt.regime = Regime::PeakTracking;
        return pt;
    }

    if (x <= ctx.bounds.x_zero) {
        pt.f = std::pow(-x / (ctx.coeff.c2 * r2), 1.0 / (r2 - 1.0));
        pt.c = 0.0;
        pt.pi = risk * (1.0 - r2) * x;  // c2 r2 (r2-1) f^{r2-1} == (1-r2) x
        pt.u = x * pt.f * (1.0 - 1.0 / r2) - ctx.y_upper / (p.rho * beta);
        pt.regime = Regime::ZeroConsumption;
        return pt;
    }

    if (x < ctx.bounds.x_aggv) {
        InteriorRoot root = f_interior(x, ctx, warm.t_interior);
        warm.t_interior = root.t;
        pt.f = std::exp(root.t);
        pt.c = lam * ctx.h - root.t / beta;
        pt.pi = risk * (ctx.coeff.c3 * r1 * (r1 - 1.0) * root.e1 +
                        ctx.coeff.c4 * r2 * (r2 - 1.0) * root.e2 + 1.0 / rb);
        pt.u = pt.f * (ctx.coeff.c3 * root.e1 + ctx.coeff.c4 * root.e2 +
                       (root.t - lam * beta * ctx.h + S - 1.0) / rb) +
               x * pt.f;
        pt.regime = Regime::Interior;
        return pt;
    }

    double x_eval = x;
    if (x > ctx.bounds.x_splg) {
        if (x > ctx.bounds.x_splg * (1.0 + kBoundarySlack))
            throw DomainError("wealth above the splurge boundary; project the reference first");
        x_eval = ctx.bounds.x_splg;
    }
    PeakRoot root = f_peak(x_eval, ctx, warm.z_peak);
    warm.z_peak = root.z;
    pt.f = root.f;
    pt.c = ctx.h;
    pt.pi = risk * (ctx.d5 * r1 * (r1 - 1.0) * root.zr1 + ctx.d6 * r2 * (r2 - 1.0) * root.zr2);
    pt.u = pt.f * (ctx.d5 * root.zr1 + ctx.d6 * root.zr2 - ctx.h / r) -
           ctx.y_lower / (p.rho * beta) + x * pt.f;
    pt.regime = (x_eval >= ctx.bounds.x_splg * (1.0 - kBoundarySlack)) ? Regime::SingularBoundary
                                                                       : Regime::PeakTracking;
    return pt;
}

void PrimalSolution::policy_rates(double x, const Context& ctx, Warm& warm, double& c,
                                  double& pi) const {
    const ModelParams& p = params();
    const DerivedConstants& k = constants();
    const double r1 = k.r1, r2 = k.r2;
    const double risk = (p.mu - p.r) / (p.sigma * p.sigma);

    if (x <= ctx.bounds.x_zero) {
        c = 0.0;
        pi = risk * (1.0 - r2) * x;
        return;
    }
    if (p.tag.lambda_case == LambdaCase::One && x >= ctx.bounds.x_splg) {
        c = ctx.h;
        pi = 0.0;
        return;
    }
    if (x < ctx.bounds.x_aggv) {
        InteriorRoot root = f_interior(x, ctx, warm.t_interior);
        warm.t_interior = root.t;
        c = p.lambda * ctx.h - root.t / p.beta;
        pi = risk * (ctx.coeff.c3 * r1 * (r1 - 1.0) * root.e1 +
                     ctx.coeff.c4 * r2 * (r2 - 1.0) * root.e2 + 1.0 / (p.r * p.beta));
        return;
    }
    PeakRoot root = f_peak(std::min(x, ctx.bounds.x_splg), ctx, warm.z_peak);
    warm.z_peak = root.z;
    c = ctx.h;
    pi = risk * (ctx.d5 * r1 * (r1 - 1.0) * root.zr1 + ctx.d6 * r2 * (r2 - 1.0) * root.zr2);
}

PolicyPoint PrimalSolution::policy(double x, const Context& ctx) const {
    Warm warm;
    return policy(x, ctx, warm);
}

PolicyPoint PrimalSolution::policy(double x, double h) const {
    Projected st = project_to_domain(x, h);
    return policy(st.x, context(st.h));
}

double PrimalSolution::value_u(double x, double h) const {
    Projected st = project_to_domain(x, h);
    return policy(st.x, context(st.h)).u;
}

PrimalSolution::AsymptoticLimits PrimalSolution::asymptotic_limits() const {
    const ModelParams& p = params();
    if (p.tag.lambda_case != LambdaCase::Interior)
        throw DomainError("asymptotic limits are defined for 0 < lambda < 1");
    const DerivedConstants& k = constants();
    const double pi_lim = (p.mu - p.r) * std::pow(1.0 - p.lambda, k.r1 - 1.0) /
                          (p.r * p.beta * p.sigma * p.sigma);
    return {p.r, pi_lim};
}

}  // namespace spendmax
