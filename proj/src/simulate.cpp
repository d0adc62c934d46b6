#include "spendmax/simulate.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include "spendmax/rng.hpp"

namespace spendmax {

namespace {

void check_config(const PathConfig& cfg) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("dt must be positive");
    if (!(cfg.horizon >= cfg.dt)) throw ConfigError("horizon must cover at least one step");
    if (cfg.n_paths < 1) throw ConfigError("n_paths must be at least 1");
    if (cfg.threads < 0) throw ConfigError("threads must be nonnegative");
}

std::size_t step_count(const PathConfig& cfg) {
    return static_cast<std::size_t>(std::llround(cfg.horizon / cfg.dt));
}

int resolve_threads(const PathConfig& cfg, std::size_t n_paths) {
    unsigned hw = std::thread::hardware_concurrency();
    int t = cfg.threads > 0 ? cfg.threads : static_cast<int>(hw ? hw : 1);
    return static_cast<int>(std::min<std::size_t>(t, n_paths));
}

// results[i] = fn(i), work-stealing over a shared counter.  Slot placement
// depends only on the index, so the output is thread-count independent.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, int threads, Fn&& fn) {
    std::vector<T> out(n);
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        try {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                out[i] = fn(i);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

double pairwise_sum(const double* a, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += a[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(a, half) + pairwise_sum(a + half, n - half);
}

struct MeanSe {
    double mean = 0.0, se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    const std::size_t n = v.size();
    MeanSe out;
    out.mean = pairwise_sum(v.data(), n) / static_cast<double>(n);
    if (n < 2) return out;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = v[i] - out.mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq.data(), n) / static_cast<double>(n - 1);
    out.se = std::sqrt(var / static_cast<double>(n));
    return out;
}

// Reference level whose floor threshold equals y.
double ref_from_y(double y, double lambda, double beta) {
    return std::log(y / (1.0 - lambda)) / ((lambda - 1.0) * beta);
}

// Exact stepping of the dual process together with the running-minimum
// reference update.  log_y is also tracked additively so classification and
// interior consumption need no per-step log.
struct DualStepper {
    double lambda, beta;
    bool interior_lambda;  // 0 < lambda < 1
    double y, log_y;
    double ymin;
    double h;
    double log_floor, log_yu, log_yl;
    bool jumped_at_zero = false;

    DualStepper(const ModelParams& p, double y0, double h0)
        : lambda(p.lambda), beta(p.beta) {
        interior_lambda = p.tag.lambda_case == LambdaCase::Interior;
        y = y0;
        log_y = std::log(y0);
        ymin = y0;
        h = h0;
        if (interior_lambda && y0 < (1.0 - lambda) * std::exp((lambda - 1.0) * beta * h0)) {
            h = ref_from_y(y0, lambda, beta);  // reference jumps up at t = 0
            jumped_at_zero = true;
        }
        refresh_thresholds();
    }

    void refresh_thresholds() {
        log_yu = lambda * beta * h;
        log_yl = (lambda - 1.0) * beta * h;
        log_floor = interior_lambda ? std::log1p(-lambda) + log_yl
                                    : -std::numeric_limits<double>::infinity();
        if (lambda == 0.0) log_yl = -std::numeric_limits<double>::infinity();
    }

    void advance(double dlog) {
        log_y += dlog;
        y *= std::exp(dlog);
        if (y < ymin) {
            ymin = y;
            if (interior_lambda && log_y < log_floor) {
                h = ref_from_y(ymin, lambda, beta);
                refresh_thresholds();
            }
        }
    }

    double consumption() const {
        if (log_y >= log_yu) return 0.0;
        if (log_y > log_yl) return lambda * h - log_y / beta;
        return h;
    }
};

// Euler stepping of the wealth SDE under the feedback policy, rebuilding the
// per-reference context only when the reference moves.
struct PrimalStepper {
    const PrimalSolution& primal;
    PrimalSolution::Context ctx;
    PrimalSolution::Warm warm;
    double x, h;
    double r, mu_r, sigma, lambda;
    bool interior_lambda;
    double c = 0.0, pi = 0.0;

    PrimalStepper(const PrimalSolution& ps, double x0, double h0) : primal(ps) {
        const ModelParams& p = ps.params();
        r = p.r;
        mu_r = p.mu - p.r;
        sigma = p.sigma;
        lambda = p.lambda;
        interior_lambda = p.tag.lambda_case == LambdaCase::Interior;
        auto st = ps.project_to_domain(x0, h0);
        x = st.x;
        h = st.h;
        ctx = ps.context(h);
    }

    void evaluate_policy() { primal.policy_rates(x, ctx, warm, c, pi); }

    void advance(double dt, double dw) {
        x += (r * x + pi * mu_r - c) * dt + pi * sigma * dw;
        if (x < 0.0) x = 0.0;  // no bankruptcy: zero wealth absorbs
        if (interior_lambda && x > ctx.bounds.x_splg * (1.0 + 1e-12)) {
            h = primal.h_tilde(x);
            ctx = primal.context(h);
            warm.z_peak = 1.0 - lambda;  // the new state sits on the boundary
        }
    }
};

}  // namespace

Simulator::Simulator(const PrimalSolution& primal) : primal_(primal) {}

SimPath Simulator::simulate_dual_path(double y0, double h0, const PathConfig& cfg,
                                      std::size_t path_index) const {
    check_config(cfg);
    if (!(y0 > 0.0)) throw ConfigError("y0 must be positive");
    if (h0 < 0.0) throw ConfigError("h0 must be nonnegative");

    const ModelParams& p = primal_.params();
    const double kappa = primal_.constants().kappa;
    const std::size_t n = step_count(cfg);
    const double dt = cfg.dt, sqrt_dt = std::sqrt(dt);
    const double drift = (p.rho - p.r - 0.5 * kappa * kappa) * dt;

    PathRng rng(cfg.seed, path_index, cfg.antithetic);
    DualStepper ds(p, y0, h0);

    SimPath path;
    path.times.reserve(n + 1);
    path.w.reserve(n + 1);
    path.y.reserve(n + 1);
    path.h_hat.reserve(n + 1);
    path.c.reserve(n + 1);

    double w = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        path.times.push_back(static_cast<double>(i) * dt);
        path.w.push_back(w);
        path.y.push_back(ds.y);
        path.h_hat.push_back(ds.h);
        path.c.push_back(ds.consumption());
        if (i == n) break;
        const double z = cfg.zero_noise ? 0.0 : rng.normal();
        w += sqrt_dt * z;
        ds.advance(drift - kappa * sqrt_dt * z);
    }
    return path;
}

McEstimate Simulator::budget_functional(double y, double h, const PathConfig& cfg) const {
    check_config(cfg);
    if (!(y > 0.0)) throw ConfigError("y must be positive");
    if (h < 0.0) throw ConfigError("h must be nonnegative");

    const ModelParams& p = primal_.params();
    const double kappa = primal_.constants().kappa;
    const std::size_t n = step_count(cfg);
    const double dt = cfg.dt, sqrt_dt = std::sqrt(dt);

    // Price the optimal consumption stream started from the state the dual
    // point carries: x0 = g(y, h), with the t=0 reference jump when y lies
    // below the floor.  The wealth/reference pair then evolves under the
    // feedback policy, and the stream is priced by the kernel
    // M_t = exp(-(r + kappa^2/2) t - kappa W_t).
    double h0 = h;
    if (p.tag.lambda_case == LambdaCase::Interior) {
        const double floor0 = primal_.dual().y_floor(h);
        if (y < floor0) h0 = ref_from_y(y, p.lambda, p.beta);
    }
    const double x0 = primal_.g(std::max(y, primal_.dual().y_floor(h0)), h0);

    struct PathOut {
        double integral = 0.0, tail = 0.0;
    };
    auto run_one = [&](std::size_t idx) {
        PathRng rng(cfg.seed, idx, cfg.antithetic);
        PrimalStepper ps(primal_, x0, h0);
        double log_m = 0.0;
        ps.evaluate_policy();
        double acc = 0.5 * ps.c;
        for (std::size_t i = 1; i <= n; ++i) {
            const double z = cfg.zero_noise ? 0.0 : rng.normal();
            const double dw = sqrt_dt * z;
            ps.advance(dt, dw);
            ps.evaluate_policy();
            log_m += -(p.r + 0.5 * kappa * kappa) * dt - kappa * dw;
            acc += (i == n ? 0.5 : 1.0) * ps.c * std::exp(log_m);
        }
        PathOut out;
        out.integral = acc * dt;
        // Consumption beyond T stays near the reference; one more kernel
        // integral bounds the remainder.
        out.tail = ps.h * std::exp(log_m) / p.r;
        return out;
    };

    auto results = parallel_map<PathOut>(cfg.n_paths, resolve_threads(cfg, cfg.n_paths), run_one);
    std::vector<double> vals(results.size()), tails(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        vals[i] = results[i].integral;
        tails[i] = results[i].tail;
    }
    const MeanSe ms = mean_se(vals);
    McEstimate est;
    est.value = ms.mean;
    est.std_error = ms.se;
    est.tail_low = 0.0;
    est.tail_high = mean_se(tails).mean;
    return est;
}

double Simulator::solve_ystar(double x, double h, const PathConfig& cfg) const {
    check_config(cfg);
    if (!(x > 0.0)) throw ConfigError("x must be positive");

    auto budget = [&](double y) { return budget_functional(y, h, cfg); };
    auto matches = [&](const McEstimate& b) {
        return std::abs(b.value - x) < std::max(b.std_error, 1e-3 * x);
    };

    double y0 = primal_.f(x, h);
    if (!std::isfinite(y0)) throw ConfigError("x must lie inside the effective domain");
    McEstimate b0 = budget(y0);
    if (matches(b0)) return y0;

    // The budget is decreasing in y under common random numbers, so expand
    // multiplicatively until it brackets x.
    double y_lo = y0, y_hi = y0;
    int tries = 0;
    if (b0.value > x) {
        do {
            y_lo = y_hi;
            y_hi *= 4.0;
            if (++tries > 60) throw BracketError("budget bracket expansion failed");
        } while (budget(y_hi).value > x);
    } else {
        do {
            y_hi = y_lo;
            y_lo /= 4.0;
            if (++tries > 60) throw BracketError("budget bracket expansion failed");
        } while (budget(y_lo).value < x);
    }

    while (y_hi / y_lo - 1.0 > 1e-3) {
        const double ym = std::sqrt(y_lo * y_hi);
        const McEstimate bm = budget(ym);
        if (matches(bm)) return ym;
        if (bm.value > x)
            y_lo = ym;
        else
            y_hi = ym;
    }
    return std::sqrt(y_lo * y_hi);
}

SimPath Simulator::simulate_primal_path(double x0, double h0, const PathConfig& cfg,
                                        std::size_t path_index) const {
    check_config(cfg);
    if (x0 < 0.0) throw ConfigError("x0 must be nonnegative");
    if (h0 < 0.0) throw ConfigError("h0 must be nonnegative");

    const ModelParams& p = primal_.params();
    const std::size_t n = step_count(cfg);
    const double dt = cfg.dt, sqrt_dt = std::sqrt(dt);

    PathRng rng(cfg.seed, path_index, cfg.antithetic);
    PrimalStepper ps(primal_, x0, h0);

    SimPath path;
    for (auto* col : {&path.times, &path.w, &path.x, &path.h_hat, &path.c, &path.pi})
        col->reserve(n + 1);

    double w = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        ps.evaluate_policy();
        path.times.push_back(static_cast<double>(i) * dt);
        path.w.push_back(w);
        path.x.push_back(ps.x);
        path.h_hat.push_back(ps.h);
        path.c.push_back(ps.c);
        path.pi.push_back(ps.pi);
        if (i == n) break;
        const double z = cfg.zero_noise ? 0.0 : rng.normal();
        const double dw = sqrt_dt * z;
        w += dw;
        ps.advance(dt, dw);
    }
    return path;
}

McEstimate Simulator::mc_value_estimate(double x0, double h0, const PathConfig& cfg) const {
    check_config(cfg);
    const ModelParams& p = primal_.params();
    const std::size_t n = step_count(cfg);
    const double dt = cfg.dt, sqrt_dt = std::sqrt(dt);
    const double decay = std::exp(-p.rho * dt);
    const double lam = p.lambda, beta = p.beta;

    struct PathOut {
        double integral = 0.0, h_final = 0.0;
    };
    auto run_one = [&](std::size_t idx) {
        PathRng rng(cfg.seed, idx, cfg.antithetic);
        PrimalStepper ps(primal_, x0, h0);
        double disc = 1.0;
        ps.evaluate_policy();
        double acc = 0.5 * utility(ps.c - lam * ps.h, beta);
        for (std::size_t i = 1; i <= n; ++i) {
            const double z = cfg.zero_noise ? 0.0 : rng.normal();
            ps.advance(dt, sqrt_dt * z);
            ps.evaluate_policy();
            disc *= decay;
            acc += (i == n ? 0.5 : 1.0) * disc * utility(ps.c - lam * ps.h, beta);
        }
        return PathOut{acc * dt, ps.h};
    };

    auto results = parallel_map<PathOut>(cfg.n_paths, resolve_threads(cfg, cfg.n_paths), run_one);
    std::vector<double> vals(results.size());
    double h_max = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        vals[i] = results[i].integral;
        h_max = std::max(h_max, results[i].h_final);
    }
    const MeanSe ms = mean_se(vals);
    McEstimate est;
    est.value = ms.mean;
    est.std_error = ms.se;
    // The integrand is bounded below by -(1/beta) e^{lambda beta H}; discount
    // the bound at the largest reference level reached.
    est.tail_low = -std::exp(-p.rho * cfg.horizon) * std::exp(lam * beta * h_max) / (p.rho * beta);
    est.tail_high = 0.0;
    return est;
}

McEstimate Simulator::mc_value_baseline(double x0, double h0, const PathConfig& cfg,
                                        BaselinePolicy policy) const {
    check_config(cfg);
    const ModelParams& p = primal_.params();
    const std::size_t n = step_count(cfg);
    const double dt = cfg.dt, sqrt_dt = std::sqrt(dt);
    const double decay = std::exp(-p.rho * dt);
    const double lam = p.lambda, beta = p.beta;

    // The no-reference comparison runs the lambda = 0 feedback rule while
    // the utility keeps the real reference.
    std::unique_ptr<PrimalSolution> merton;
    if (policy == BaselinePolicy::MertonNoReference) {
        RawParams raw{p.r, p.r, p.mu, p.sigma, p.beta, 0.0};
        ModelParams mp = validate_params(raw);
        merton = std::make_unique<PrimalSolution>(DualSolution(mp, derive_constants(mp)));
    }
    const PrimalSolution::Context merton_ctx =
        merton ? merton->context(0.0) : PrimalSolution::Context{};

    struct PathOut {
        double integral = 0.0, h_final = 0.0;
    };
    auto run_one = [&](std::size_t idx) {
        PathRng rng(cfg.seed, idx, cfg.antithetic);
        double x = x0, h = h0, disc = 1.0, acc = 0.0;
        PrimalSolution::Warm warm;
        auto rates = [&](double& c, double& pi) {
            switch (policy) {
                case BaselinePolicy::ZeroAll:
                    c = 0.0;
                    pi = 0.0;
                    break;
                case BaselinePolicy::ConstantReferenceFraction:
                    c = x > 0.0 ? lam * h0 : 0.0;
                    pi = 0.0;
                    break;
                case BaselinePolicy::MertonNoReference:
                    merton->policy_rates(x, merton_ctx, warm, c, pi);
                    break;
            }
        };
        double c = 0.0, pi = 0.0;
        rates(c, pi);
        h = std::max(h, c);
        acc += 0.5 * utility(c - lam * h, beta);
        for (std::size_t i = 1; i <= n; ++i) {
            const double z = cfg.zero_noise ? 0.0 : rng.normal();
            x += (p.r * x + pi * (p.mu - p.r) - c) * dt + pi * p.sigma * sqrt_dt * z;
            if (x < 0.0) x = 0.0;
            rates(c, pi);
            h = std::max(h, c);
            disc *= decay;
            acc += (i == n ? 0.5 : 1.0) * disc * utility(c - lam * h, beta);
        }
        return PathOut{acc * dt, h};
    };

    auto results = parallel_map<PathOut>(cfg.n_paths, resolve_threads(cfg, cfg.n_paths), run_one);
    std::vector<double> vals(results.size());
    double h_max = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        vals[i] = results[i].integral;
        h_max = std::max(h_max, results[i].h_final);
    }
    const MeanSe ms = mean_se(vals);
    McEstimate est;
    est.value = ms.mean;
    est.std_error = ms.se;
    est.tail_low = -std::exp(-p.rho * cfg.horizon) * std::exp(lam * beta * h_max) / (p.rho * beta);
    est.tail_high = 0.0;
    return est;
}

namespace {

// Wealth carried by the driving exponential state, with the reference taken
// from the wealth side: the state is clamped at the floor, which is where
// the reference reflection keeps it while it ratchets.
double transform_wealth(const DualSolution& dual, double y, double h) {
    return -dual.v_y(std::max(y, dual.y_floor(h)), h);
}

}  // namespace

double Simulator::dual_primal_consistency(double x0, double h0, const PathConfig& cfg) const {
    check_config(cfg);
    const ModelParams& p = primal_.params();
    const DualSolution& dual = primal_.dual();
    const double kappa = primal_.constants().kappa;
    const std::size_t n = step_count(cfg);
    const double dt = cfg.dt, sqrt_dt = std::sqrt(dt);
    const double drift = (p.rho - p.r - 0.5 * kappa * kappa) * dt;

    const double ystar = primal_.f(x0, h0);
    if (!std::isfinite(ystar)) throw ConfigError("x0 must lie inside the effective domain");

    auto run_one = [&](std::size_t idx) {
        PathRng rng(cfg.seed, idx, cfg.antithetic);
        PrimalStepper ps(primal_, x0, h0);
        double y = ystar;
        double dev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            ps.evaluate_policy();
            const double z = cfg.zero_noise ? 0.0 : rng.normal();
            const double dw = sqrt_dt * z;
            ps.advance(dt, dw);
            y *= std::exp(drift - kappa * dw);
            const double xg = transform_wealth(dual, y, ps.h);
            dev = std::max(dev, std::abs(ps.x - xg) / (1.0 + std::abs(ps.x)));
        }
        return dev;
    };
    auto devs = parallel_map<double>(cfg.n_paths, resolve_threads(cfg, cfg.n_paths), run_one);
    return mean_se(devs).mean;
}

Simulator::ConsistencyPair Simulator::dual_primal_consistency_refined(
    double x0, double h0, const PathConfig& cfg) const {
    check_config(cfg);
    const ModelParams& p = primal_.params();
    const DualSolution& dual = primal_.dual();
    const double kappa = primal_.constants().kappa;
    const std::size_t n = step_count(cfg);
    const double dt = cfg.dt, dt_f = 0.5 * dt;
    const double sq_f = std::sqrt(dt_f);
    const double drift_c = (p.rho - p.r - 0.5 * kappa * kappa) * dt;
    const double drift_f = 0.5 * drift_c;

    const double ystar = primal_.f(x0, h0);
    if (!std::isfinite(ystar)) throw ConfigError("x0 must lie inside the effective domain");

    struct PathOut {
        double coarse = 0.0, fine = 0.0;
    };
    auto run_one = [&](std::size_t idx) {
        PathRng rng(cfg.seed, idx, cfg.antithetic);
        PrimalStepper ps_c(primal_, x0, h0), ps_f(primal_, x0, h0);
        double y_c = ystar, y_f = ystar;
        PathOut out;
        for (std::size_t i = 0; i < n; ++i) {
            const double dw1 = cfg.zero_noise ? 0.0 : sq_f * rng.normal();
            const double dw2 = cfg.zero_noise ? 0.0 : sq_f * rng.normal();
            for (double dw : {dw1, dw2}) {
                ps_f.evaluate_policy();
                ps_f.advance(dt_f, dw);
                y_f *= std::exp(drift_f - kappa * dw);
                const double xg = transform_wealth(dual, y_f, ps_f.h);
                out.fine = std::max(out.fine,
                                    std::abs(ps_f.x - xg) / (1.0 + std::abs(ps_f.x)));
            }
            ps_c.evaluate_policy();
            ps_c.advance(dt, dw1 + dw2);
            y_c *= std::exp(drift_c - kappa * (dw1 + dw2));
            const double xg = transform_wealth(dual, y_c, ps_c.h);
            out.coarse =
                std::max(out.coarse, std::abs(ps_c.x - xg) / (1.0 + std::abs(ps_c.x)));
        }
        return out;
    };
    auto res = parallel_map<PathOut>(cfg.n_paths, resolve_threads(cfg, cfg.n_paths), run_one);
    std::vector<double> cs(res.size()), fs(res.size());
    for (std::size_t i = 0; i < res.size(); ++i) {
        cs[i] = res[i].coarse;
        fs[i] = res[i].fine;
    }
    return {mean_se(cs).mean, mean_se(fs).mean};
}

double Simulator::transversality_probe(double y0, double h0, const PathConfig& cfg) const {
    check_config(cfg);
    const ModelParams& p = primal_.params();
    const DualSolution& dual = primal_.dual();
    const double kappa = primal_.constants().kappa;
    const std::size_t n = step_count(cfg);
    const double dt = cfg.dt, sqrt_dt = std::sqrt(dt);
    const double drift = (p.rho - p.r - 0.5 * kappa * kappa) * dt;
    const double disc_T = std::exp(-p.rho * cfg.horizon);

    auto run_one = [&](std::size_t idx) {
        PathRng rng(cfg.seed, idx, cfg.antithetic);
        DualStepper ds(p, y0, h0);
        for (std::size_t i = 0; i < n; ++i) {
            const double z = cfg.zero_noise ? 0.0 : rng.normal();
            ds.advance(drift - kappa * sqrt_dt * z);
        }
        return disc_T * dual.v(ds.y, ds.h);
    };
    auto vals = parallel_map<double>(cfg.n_paths, resolve_threads(cfg, cfg.n_paths), run_one);
    return mean_se(vals).mean;
}

}  // namespace spendmax
