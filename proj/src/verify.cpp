#include "spendmax/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "spendmax/rng.hpp"

namespace spendmax::verify {

namespace {

std::string point_label(double a, double b) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(%.6g, %.6g)", a, b);
    return buf;
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Tridiagonal solve (Thomas).  Overwrites inputs.
std::vector<double> solve_tridiag(std::vector<double>& a, std::vector<double>& b,
                                  std::vector<double>& c, std::vector<double>& d) {
    const std::size_t n = b.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double m = a[i] / b[i - 1];
        b[i] -= m * c[i - 1];
        d[i] -= m * d[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = d[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (d[i] - c[i] * x[i + 1]) / b[i];
    return x;
}

}  // namespace

BvpReport bvp_oracle(const PrimalSolution& primal, double h, std::size_t n,
                     double y_max_factor) {
    if (n < 200) throw GridError("bvp oracle needs at least 200 grid points");
    if (y_max_factor < 10.0) throw GridError("bvp oracle grid must reach 10x the upper threshold");
    const DualSolution& dual = primal.dual();
    const ModelParams& p = dual.params();
    const double kappa = dual.constants().kappa;

    const bool lambda_zero = p.tag.lambda_case == LambdaCase::Zero;
    const bool lambda_one = p.tag.lambda_case == LambdaCase::One;
    const double y_right = y_max_factor * dual.y_upper(h);
    double y_left;
    if (lambda_zero)
        y_left = 1e-4;
    else if (lambda_one)
        y_left = 1e-4 * dual.y_lower(h);
    else
        y_left = dual.y_floor(h);

    const double tau0 = std::log(y_left), tau1 = std::log(y_right);
    const double dtau = (tau1 - tau0) / static_cast<double>(n - 1);

    // In tau = ln y the ODE reads
    //   (kappa^2/2)(v_tt - v_t) + (rho - r) v_t - rho v = rhs(e^tau).
    const double k2 = 0.5 * kappa * kappa;
    const double b1 = -k2 + (p.rho - p.r);

    std::vector<double> lo(n, 0.0), di(n, 0.0), up(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double y = std::exp(tau0 + dtau * static_cast<double>(i));
        lo[i] = k2 / (dtau * dtau) - b1 / (2.0 * dtau);
        di[i] = -2.0 * k2 / (dtau * dtau) - p.rho;
        up[i] = k2 / (dtau * dtau) + b1 / (2.0 * dtau);
        rhs[i] = dual.rhs(y, h);
    }

    if (lambda_zero) {
        di[0] = 1.0;
        rhs[0] = dual.v(y_left, h);
    } else {
        // Ghost-node Neumann row: v_tau(tau0) = y_left * v_y = -y_left * x_splg(h).
        const double s = -y_left * primal.boundaries(h).x_splg;
        di[0] = -kappa * kappa / (dtau * dtau) - p.rho;
        up[0] = kappa * kappa / (dtau * dtau);
        rhs[0] = dual.rhs(y_left, h) + k2 * (2.0 * s / dtau + s) - (p.rho - p.r) * s;
    }
    di[n - 1] = 1.0;
    rhs[n - 1] = dual.v(y_right, h);

    std::vector<double> sol = solve_tridiag(lo, di, up, rhs);

    double max_dev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = std::exp(tau0 + dtau * static_cast<double>(i));
        const double vc = dual.v(y, h);
        max_dev = std::max(max_dev, std::abs(sol[i] - vc) / (1.0 + std::abs(vc)));
    }
    return BvpReport{max_dev, n};
}

double bvp_convergence_order(const PrimalSolution& primal, double h, std::size_t n) {
    const double d1 = bvp_oracle(primal, h, n).max_rel_dev;
    const double d2 = bvp_oracle(primal, h, 2 * n).max_rel_dev;
    return std::log2(d1 / d2);
}

HjbResidual hjb_residual_primal(const PrimalSolution& primal, double x, double h) {
    const ModelParams& p = primal.params();
    const DerivedConstants& k = primal.constants();
    PrimalSolution::Context ctx = primal.context(h);

    auto region_of = [&](double xx) {
        if (xx <= ctx.bounds.x_zero) return 0;
        if (xx < ctx.bounds.x_aggv) return 1;
        return 2;
    };
    const int reg = region_of(x);

    // Second derivative by central difference of the analytic u_x = f;
    // shrink the step until the stencil stays inside one region.
    double delta = 1e-6 * std::max(1.0, x);
    for (int attempt = 0;; ++attempt) {
        if (x - delta > 0.0 && region_of(x - delta) == reg && region_of(x + delta) == reg &&
            x + delta <= ctx.bounds.x_splg)
            break;
        delta *= 0.25;
        if (attempt >= 12) throw StencilError("point too close to a region boundary");
    }

    const PolicyPoint pol = primal.policy(x, ctx);
    const double uxx = (primal.f(x + delta, ctx) - primal.f(x - delta, ctx)) / (2.0 * delta);

    const double c_opt =
        std::clamp(p.lambda * h - std::log(pol.f) / p.beta, 0.0, h);
    const double gain = utility(c_opt - p.lambda * h, p.beta) - c_opt * pol.f;
    const double residual = gain - p.rho * pol.u + p.r * x * pol.f -
                            0.5 * k.kappa * k.kappa * pol.f * pol.f / uxx;
    return HjbResidual{residual, c_opt, pol.u};
}

CheckResult convexity_check(const DualSolution& dual, const ScanGrid& grid,
                            const std::function<double(double, double)>& vyy_override) {
    CheckResult res{"dual-convexity", "", std::numeric_limits<double>::infinity(), 0.0, true};
    for (int j = 0; j < grid.n_h; ++j) {
        const double h = grid.h_min + (grid.h_max - grid.h_min) * j / std::max(1, grid.n_h - 1);
        const double y_lo =
            dual.params().tag.lambda_case == LambdaCase::Interior
                ? dual.y_floor(h)
                : 1e-3 * std::min(1.0, dual.y_lower(h) > 0.0 ? dual.y_lower(h) : 1.0);
        const double y_hi = grid.y_span * dual.y_upper(h);
        for (int i = 0; i < grid.n_y; ++i) {
            const double y = y_lo * std::pow(y_hi / y_lo, (i + 0.5) / grid.n_y);
            const double vyy = vyy_override ? vyy_override(y, h) : dual.v_yy(y, h);
            if (vyy < res.value) {
                res.value = vyy;
                res.grid_point = point_label(y, h);
            }
        }
    }
    res.pass = res.value > 0.0;
    return res;
}

namespace {

struct Worst {
    CheckResult res;
    explicit Worst(std::string name, double tol) {
        res.name = std::move(name);
        res.tolerance = tol;
        res.value = 0.0;
    }
    void update(double value, double a, double b) {
        if (std::abs(value) >= std::abs(res.value)) {
            res.value = value;
            res.grid_point = point_label(a, b);
        }
    }
    CheckResult finish() {
        res.pass = std::abs(res.value) <= res.tolerance;
        return res;
    }
    // For checks that must hold as "condition everywhere"; value carries the
    // worst margin (negative = violated).
    CheckResult finish_sign() {
        res.pass = res.value >= -res.tolerance;
        return res;
    }
};

}  // namespace

ScanReport scan_report(const PrimalSolution& primal, const ScanGrid& grid) {
    const DualSolution& dual = primal.dual();
    const ModelParams& p = primal.params();
    const DerivedConstants& kc = primal.constants();
    const bool interior = p.tag.lambda_case == LambdaCase::Interior;
    const bool lambda_zero = p.tag.lambda_case == LambdaCase::Zero;
    const bool lambda_one = p.tag.lambda_case == LambdaCase::One;

    ScanReport report;
    auto add = [&](CheckResult c) {
        report.all_pass = report.all_pass && c.pass;
        report.checks.push_back(std::move(c));
    };

    std::vector<double> hs;
    for (int j = 0; j < grid.n_h; ++j)
        hs.push_back(grid.h_min + (grid.h_max - grid.h_min) * j / std::max(1, grid.n_h - 1));

    // Dual ODE residual over all regimes.
    {
        Worst w("dual-ode-residual", 1e-9);
        for (double h : hs) {
            const double y_lo = interior ? dual.y_floor(h) : 1e-3 * std::min(1.0, dual.y_upper(h));
            const double y_hi = grid.y_span * dual.y_upper(h);
            for (int i = 0; i < grid.n_y; ++i) {
                const double y = y_lo * std::pow(y_hi / y_lo, (i + 0.5) / grid.n_y);
                const double rel =
                    dual.ode_residual(y, h) / (1.0 + std::abs(dual.v(y, h)));
                w.update(rel, y, h);
            }
        }
        add(w.finish());
    }

    // Smooth fit of v and v_y across the thresholds.
    {
        Worst wv("smooth-fit-v", 1e-10), wd("smooth-fit-vy", 1e-10);
        const double eps = 5e-13;
        for (double h : {0.1, 0.5, 1.0, 2.0, 5.0}) {
            std::vector<double> thresholds;
            if (lambda_zero)
                thresholds = {1.0};
            else
                thresholds = {dual.y_upper(h), dual.y_lower(h)};
            for (double yt : thresholds) {
                const double vm = dual.v(yt * (1.0 - eps), h), vp = dual.v(yt * (1.0 + eps), h);
                wv.update((vp - vm) / (1.0 + std::abs(vp)), yt, h);
                const double dm = dual.v_y(yt * (1.0 - eps), h), dp = dual.v_y(yt * (1.0 + eps), h);
                wd.update((dp - dm) / (1.0 + std::abs(dp)), yt, h);
            }
        }
        add(wv.finish());
        add(wd.finish());
    }

    add(convexity_check(dual, grid));

    // Free boundary: the dual value is insensitive to the reference exactly
    // on the floor.
    if (interior) {
        Worst w("free-boundary-vh", 1e-5);
        for (double h : {0.1, 1.0, 5.0}) w.update(dual.v_h(dual.y_floor(h), h), dual.y_floor(h), h);
        add(w.finish());
        Worst ws("vh-nonpositive", 1e-8);
        for (double h : hs) {
            const double y_lo = dual.y_floor(h) * 1.02, y_hi = grid.y_span * dual.y_upper(h);
            for (int i = 0; i < 16; ++i) {
                const double y = y_lo * std::pow(y_hi / y_lo, (i + 0.5) / 16.0);
                ws.update(std::max(0.0, dual.v_h(y, h)), y, h);
            }
        }
        add(ws.finish());
    }

    // Far field: v approaches -e^{lambda beta h}/(rho beta) and y v_y -> 0.
    {
        Worst w("far-field-v", 1e-3);
        for (double h : {0.1, 1.0, 5.0}) {
            const double vlim = -dual.y_upper(h) / (p.rho * p.beta);
            const double y = 1e8 * dual.y_upper(h);
            w.update((dual.v(y, h) - vlim) / std::abs(vlim), y, h);
            w.update(y * dual.v_y(y, h) / std::abs(vlim), y, h);
        }
        add(w.finish());
    }

    // Coefficient signs (used by the convexity proof).
    if (interior) {
        Worst w("coefficient-signs", 0.0);
        w.res.value = std::numeric_limits<double>::infinity();
        for (double h : hs) {
            if (h <= 0.0) continue;
            const DualCoefficients c = dual.coefficients(h);
            for (double margin : {c.c2, -c.c3, c.c5, c.c6})
                if (margin < w.res.value) {
                    w.res.value = margin;
                    w.res.grid_point = point_label(h, 0.0);
                }
        }
        add(w.finish_sign());
    }

    // Boundary curves: ordering and monotonicity in h.
    {
        Worst worder("boundary-order", 0.0);
        worder.res.value = std::numeric_limits<double>::infinity();
        Worst wmono("boundary-increasing", 0.0);
        wmono.res.value = std::numeric_limits<double>::infinity();
        Boundaries prev{};
        bool have_prev = false;
        for (double h : hs) {
            const Boundaries b = primal.boundaries(h);
            if (interior) {
                for (double gap : {b.x_modr - b.x_zero, b.x_aggv - b.x_modr, b.x_splg - b.x_aggv})
                    if (gap < worder.res.value) {
                        worder.res.value = gap;
                        worder.res.grid_point = point_label(h, 0.0);
                    }
            }
            if (have_prev) {
                double step = std::min(b.x_zero - prev.x_zero, b.x_modr - prev.x_modr);
                if (interior)
                    step = std::min({step, b.x_aggv - prev.x_aggv, b.x_splg - prev.x_splg});
                if (lambda_one) step = std::min(step, b.x_splg - prev.x_splg);
                if (step < wmono.res.value) {
                    wmono.res.value = step;
                    wmono.res.grid_point = point_label(h, 0.0);
                }
            }
            prev = b;
            have_prev = true;
        }
        if (interior) add(worder.finish_sign());
        add(wmono.finish_sign());
    }

    // Inversion round trips and threshold identities.
    {
        Worst wr("roundtrip-g-of-f", 1e-10);
        Worst wt("threshold-identities", 1e-10);
        std::mt19937_64 eng(grid.seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (double h : hs) {
            const Boundaries b = primal.boundaries(h);
            const double x_max = interior ? b.x_splg : (lambda_one ? b.x_splg : 4.0 * b.x_zero);
            for (int i = 0; i < grid.n_roundtrip; ++i) {
                const double x = unif(eng) * x_max;
                if (lambda_one && x >= b.x_splg) continue;
                const double y = primal.f(x, h);
                if (!std::isfinite(y) || y <= 0.0) continue;
                wr.update((primal.g(y, h) - x) / (1.0 + x), x, h);
            }
            wt.update((primal.g(dual.y_upper(h), h) - b.x_zero) / (1.0 + b.x_zero),
                      dual.y_upper(h), h);
            if (h > 0.0 && !lambda_zero)
                wt.update((primal.g(1.0, h) - b.x_modr) / (1.0 + b.x_modr), 1.0, h);
            if (interior) {
                wt.update((primal.g(dual.y_lower(h), h) - b.x_aggv) / (1.0 + b.x_aggv),
                          dual.y_lower(h), h);
                wt.update((primal.g(dual.y_floor(h), h) - b.x_splg) / (1.0 + b.x_splg),
                          dual.y_floor(h), h);
            }
        }
        add(wr.finish());
        add(wt.finish());
    }

    // Marginal value against a finite difference of the value, value
    // monotone in the reference, policy range, consumption characterization,
    // allocation sensitivity bound.
    {
        Worst wux("ux-matches-f", 1e-6);
        Worst wuh("uh-nonpositive", 1e-8);
        Worst wrange("policy-range", 1e-12);
        wrange.res.value = std::numeric_limits<double>::infinity();
        Worst wchar("consumption-characterization", 1e-9);
        Worst wlip("pi-sensitivity-bound", 0.0);
        wlip.res.value = std::numeric_limits<double>::infinity();
        const double pi_slope_bound =
            (p.mu - p.r) * (1.0 - kc.r2) / (p.sigma * p.sigma) * (1.0 + 1e-6);

        for (double h : hs) {
            const Boundaries b = primal.boundaries(h);
            const double x_max =
                interior ? b.x_splg : (lambda_one ? 1.2 * b.x_splg : 4.0 * b.x_zero);
            for (int i = 0; i < grid.n_x; ++i) {
                const double x = (i + 0.5) / grid.n_x * x_max;
                const PolicyPoint pol = primal.policy(x, h);

                // relative step: the marginal value has a power singularity
                // at x = 0, so an absolute step loses accuracy there
                const double dx = 1e-5 * x;
                {
                    const double ufd =
                        (primal.value_u(x + dx, h) - primal.value_u(x - dx, h)) / (2.0 * dx);
                    if (pol.f > 0.0 && std::isfinite(pol.f))
                        wux.update((ufd - pol.f) / pol.f, x, h);
                }
                const double dh = 1e-5 * std::max(1.0, h);
                const double uh = (primal.value_u(x, h + dh) - primal.value_u(x, h)) / dh;
                wuh.update(std::max(0.0, uh), x, h);

                double margin = pol.c;  // c >= 0 always; c <= h unless unconstrained
                if (!lambda_zero) margin = std::min(margin, h - pol.c + 1e-12);
                if (interior) margin = std::min(margin, pol.pi);
                if (margin < wrange.res.value) {
                    wrange.res.value = margin;
                    wrange.res.grid_point = point_label(x, h);
                }

                // c == 0 iff x <= x_zero; 0 < c < lambda h strictly between
                // x_zero and x_modr; c == h on [x_aggv, x_splg].
                double viol = 0.0;
                if (x <= b.x_zero) viol = std::abs(pol.c);
                if (x > b.x_zero * (1.0 + 1e-9) && x < b.x_modr * (1.0 - 1e-9) && h > 0.0)
                    if (!(pol.c > 0.0 && pol.c < p.lambda * h)) viol = 1.0;
                if (interior && x >= b.x_aggv && x <= b.x_splg) viol = std::abs(pol.c - h);
                wchar.update(viol, x, h);

                if (x - dx > 0.0 && x + dx < x_max) {
                    const PolicyPoint pm = primal.policy(x - dx, h);
                    const PolicyPoint pp = primal.policy(x + dx, h);
                    const double slope = std::abs(pp.pi - pm.pi) / (2.0 * dx);
                    if (pi_slope_bound - slope < wlip.res.value) {
                        wlip.res.value = pi_slope_bound - slope;
                        wlip.res.grid_point = point_label(x, h);
                    }
                }
            }
        }
        add(wux.finish());
        add(wuh.finish());
        add(wrange.finish_sign());
        add(wchar.finish());
        add(wlip.finish_sign());
    }

    // Large-wealth limits along the splurge boundary.
    if (interior) {
        const auto lim = primal.asymptotic_limits();
        const double h_big = primal.h_tilde(1.5e4);
        const Boundaries b = primal.boundaries(h_big);
        const PolicyPoint pol = primal.policy(b.x_splg, h_big);
        Worst w("asymptotic-limits", 0.01);
        w.update((pol.c / b.x_splg - lim.consumption_wealth_ratio) / lim.consumption_wealth_ratio,
                 b.x_splg, h_big);
        w.update((pol.pi - lim.pi) / lim.pi, b.x_splg, h_big);
        add(w.finish());
    }

    return report;
}

double brownian_max_expectation(double a, double b, double zeta, double k, double T) {
    if (!(k >= 0.0)) throw DomainError("k must be nonnegative");
    if (!(T > 0.0)) throw DomainError("T must be positive");
    const double c1 = 2.0 * a + b + 2.0 * zeta;
    const double scale = std::max({1.0, std::abs(a), std::abs(b), std::abs(zeta)});
    if (std::abs(c1) < 1e-12 * scale)
        throw DomainError("2a + b + 2 zeta must be nonzero");

    const double gamma = a + b + zeta;
    const double alpha = a + zeta;
    const double sqT = std::sqrt(T);

    const double term1 = 2.0 * gamma / c1 *
                         std::exp(0.5 * (a + b) * (a + b + 2.0 * zeta) * T) *
                         (norm_cdf(gamma * sqT) - norm_cdf(gamma * sqT - k / sqT));
    const double term2 =
        2.0 * alpha / c1 *
        (std::exp(0.5 * a * (a + 2.0 * zeta) * T) * norm_cdf(-alpha * sqT) -
         std::exp(c1 * k + 0.5 * a * (a + 2.0 * zeta) * T) * norm_cdf(-alpha * sqT - k / sqT));
    return term1 + term2;
}

McCheck brownian_max_mc(double a, double b, double zeta, double k, double T,
                        std::size_t n_paths, std::uint64_t seed) {
    std::mt19937_64 eng(splitmix64(seed));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    // Exact pair sampling: Gaussian endpoint, then the running maximum from
    // the Brownian-bridge law  P(M >= m | B_T = w) = exp(-2 m (m - w) / T).
    double sum = 0.0, sumsq = 0.0;
    const double sqT = std::sqrt(T);
    for (std::size_t i = 0; i < n_paths; ++i) {
        const double w = zeta * T + sqT * normal(eng);
        const double u = 1.0 - unif(eng);  // in (0, 1]
        const double m = 0.5 * (w + std::sqrt(w * w - 2.0 * T * std::log(u)));
        const double val = (m <= k) ? std::exp(a * w + b * m) : 0.0;
        sum += val;
        sumsq += val * val;
    }
    const double nd = static_cast<double>(n_paths);
    McCheck out;
    out.mean = sum / nd;
    out.std_error = std::sqrt(std::max(0.0, (sumsq / nd - out.mean * out.mean) / (nd - 1.0)));
    return out;
}

}  // namespace spendmax::verify
