#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spendmax/params_io.hpp"
#include "spendmax/simulate.hpp"
#include "spendmax/verify.hpp"

using nlohmann::json;
using namespace spendmax;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct OutFile {
    std::ofstream file;
    std::ostream* os = &std::cout;
    explicit OutFile(const std::string& path) {
        if (!path.empty() && path != "-") {
            file.open(path);
            if (!file) throw ConfigError("cannot open output file: " + path);
            os = &file;
        }
    }
    std::ostream& stream() { return *os; }
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write_csv(std::ostream& os) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            os << header[i] << (i + 1 < header.size() ? "," : "\n");
        for (const auto& row : rows)
            for (std::size_t i = 0; i < row.size(); ++i)
                os << row[i] << (i + 1 < row.size() ? "," : "\n");
    }
    void write_json(std::ostream& os) const {
        json rows_json = json::array();
        for (const auto& row : rows) {
            json obj;
            for (std::size_t i = 0; i < header.size(); ++i) {
                try {
                    std::size_t pos = 0;
                    double v = std::stod(row[i], &pos);
                    if (pos == row[i].size()) {
                        obj[header[i]] = v;
                        continue;
                    }
                } catch (...) {
                }
                obj[header[i]] = row[i];
            }
            rows_json.push_back(std::move(obj));
        }
        os << json{{"schema", "spendmax-table/1"}, {"rows", rows_json}}.dump(2) << "\n";
    }
    void write(std::ostream& os, const std::string& format) const {
        if (format == "json")
            write_json(os);
        else
            write_csv(os);
    }
};

int threads_from_env() {
    if (const char* env = std::getenv("SPENDMAX_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 0;  // hardware concurrency
}

PrimalSolution make_solution(const std::string& params_path, bool allow_rho_general) {
    RawParams raw = load_params_file(params_path);
    raw.allow_rho_general = allow_rho_general;
    ModelParams p = validate_params(raw);
    return PrimalSolution(DualSolution(p, derive_constants(p)));
}

json params_json(const ModelParams& p) {
    return json{{"r", p.r},         {"rho", p.rho},       {"mu", p.mu},
                {"sigma", p.sigma}, {"beta", p.beta},     {"lambda", p.lambda},
                {"lambda_case", to_string(p.tag.lambda_case)},
                {"rho_case", to_string(p.tag.rho_case)}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Closed-form solver, simulator and verifier for optimal "
                 "investment-consumption with a spending-maximum reference"};
    app.require_subcommand(1);

    std::string params_path, out_path, format = "csv";
    bool allow_rho_general = false;
    int threads = threads_from_env();
    std::uint64_t seed = 0;
    app.add_option("--params", params_path, "parameter file")->required();
    app.add_option("--out", out_path, "output path (default stdout)");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--seed", seed, "base RNG seed");
    app.add_option("--threads", threads, "worker threads (0 = all cores)");
    app.add_flag("--allow-rho-general", allow_rho_general, "enable the rho != r branch");

    // boundaries
    auto* cmd_b = app.add_subcommand("boundaries", "wealth boundary curves");
    double h_min = 0.0, h_max = 3.0, b_h = 1.0, lam_min = 0.01, lam_max = 0.98;
    int b_n = 301;
    bool sweep_lambda = false;
    cmd_b->add_option("--h-min", h_min);
    cmd_b->add_option("--h-max", h_max);
    cmd_b->add_option("-n,--points", b_n);
    cmd_b->add_flag("--sweep-lambda", sweep_lambda, "sweep lambda at fixed --h instead of h");
    cmd_b->add_option("--h", b_h, "reference level for the lambda sweep");
    cmd_b->add_option("--lambda-min", lam_min);
    cmd_b->add_option("--lambda-max", lam_max);

    // policy
    auto* cmd_p = app.add_subcommand("policy", "value and feedback policy over wealth");
    double p_h = 1.0, x_min = 0.0, x_max = 20.0;
    int p_n = 201;
    cmd_p->add_option("--h", p_h);
    cmd_p->add_option("--x-min", x_min);
    cmd_p->add_option("--x-max", x_max);
    cmd_p->add_option("-n,--points", p_n);

    // simulate
    auto* cmd_s = app.add_subcommand("simulate", "Monte Carlo run with summary");
    double s_x = 10.0, s_h = 1.0, s_T = 60.0, s_dt = 1e-3;
    std::size_t s_paths = 1000;
    int dump_paths = 1;
    bool antithetic = false;
    cmd_s->add_option("--x", s_x);
    cmd_s->add_option("--h", s_h);
    cmd_s->add_option("--horizon", s_T);
    cmd_s->add_option("--dt", s_dt);
    cmd_s->add_option("--paths", s_paths);
    cmd_s->add_option("--dump-paths", dump_paths, "paths written to the path table");
    cmd_s->add_flag("--antithetic", antithetic);
    std::string paths_out;
    cmd_s->add_option("--paths-out", paths_out, "path-table output (default <out>.paths.csv)");

    // verify
    auto* cmd_v = app.add_subcommand("verify", "run the full invariant scan");

    // sweep
    auto* cmd_w = app.add_subcommand("sweep", "parameter sweep of policy tables");
    std::string sweep_param = "lambda";
    std::vector<double> sweep_values;
    double w_h = 1.0, w_x_min = 0.0, w_x_max = 20.0;
    int w_n = 201;
    cmd_w->add_option("--param", sweep_param)->check(CLI::IsMember({"lambda", "mu", "sigma"}));
    cmd_w->add_option("--values", sweep_values)->required()->expected(-1);
    cmd_w->add_option("--h", w_h);
    cmd_w->add_option("--x-min", w_x_min);
    cmd_w->add_option("--x-max", w_x_max);
    cmd_w->add_option("-n,--points", w_n);

    CLI11_PARSE(app, argc, argv);

    try {
        OutFile out(out_path);

        if (cmd_b->parsed()) {
            if (b_n < 2) throw ConfigError("boundaries needs at least 2 grid points");
            Table t;
            if (!sweep_lambda) {
                PrimalSolution primal = make_solution(params_path, allow_rho_general);
                t.header = {"h", "x_zero", "x_modr", "x_aggv", "x_splg"};
                for (int i = 0; i < b_n; ++i) {
                    const double h = h_min + (h_max - h_min) * i / (b_n - 1);
                    const Boundaries b = primal.boundaries(h);
                    t.rows.push_back({fmt(h), fmt(b.x_zero), fmt(b.x_modr), fmt(b.x_aggv),
                                      fmt(b.x_splg)});
                }
            } else {
                RawParams raw = load_params_file(params_path);
                raw.allow_rho_general = allow_rho_general;
                t.header = {"lambda", "x_zero", "x_modr", "x_aggv", "x_splg"};
                for (int i = 0; i < b_n; ++i) {
                    raw.lambda = lam_min + (lam_max - lam_min) * i / (b_n - 1);
                    ModelParams p = validate_params(raw);
                    PrimalSolution primal(DualSolution(p, derive_constants(p)));
                    const Boundaries b = primal.boundaries(b_h);
                    t.rows.push_back({fmt(raw.lambda), fmt(b.x_zero), fmt(b.x_modr),
                                      fmt(b.x_aggv), fmt(b.x_splg)});
                }
            }
            t.write(out.stream(), format);
            return 0;
        }

        if (cmd_p->parsed()) {
            if (p_n < 2) throw ConfigError("policy needs at least 2 grid points");
            PrimalSolution primal = make_solution(params_path, allow_rho_general);
            Table t;
            t.header = {"x", "u", "c", "pi", "regime"};
            for (int i = 0; i < p_n; ++i) {
                const double x = x_min + (x_max - x_min) * i / (p_n - 1);
                const PolicyPoint pol = primal.policy(x, p_h);
                t.rows.push_back({fmt(x), fmt(pol.u), fmt(pol.c), fmt(pol.pi),
                                  to_string(pol.regime)});
            }
            t.write(out.stream(), format);
            return 0;
        }

        if (cmd_w->parsed()) {
            if (w_n < 2) throw ConfigError("sweep needs at least 2 grid points");
            if (sweep_values.empty()) throw ConfigError("sweep needs at least one value");
            RawParams raw = load_params_file(params_path);
            raw.allow_rho_general = allow_rho_general;
            Table t;
            t.header = {sweep_param, "x", "u", "c", "pi", "regime"};
            for (double value : sweep_values) {
                RawParams rv = raw;
                if (sweep_param == "lambda")
                    rv.lambda = value;
                else if (sweep_param == "mu")
                    rv.mu = value;
                else
                    rv.sigma = value;
                ModelParams p = validate_params(rv);
                PrimalSolution primal(DualSolution(p, derive_constants(p)));
                for (int i = 0; i < w_n; ++i) {
                    const double x = w_x_min + (w_x_max - w_x_min) * i / (w_n - 1);
                    const PolicyPoint pol = primal.policy(x, w_h);
                    t.rows.push_back({fmt(value), fmt(x), fmt(pol.u), fmt(pol.c), fmt(pol.pi),
                                      to_string(pol.regime)});
                }
            }
            t.write(out.stream(), format);
            return 0;
        }

        if (cmd_s->parsed()) {
            PrimalSolution primal = make_solution(params_path, allow_rho_general);
            Simulator sim(primal);
            PathConfig cfg;
            cfg.horizon = s_T;
            cfg.dt = s_dt;
            cfg.n_paths = s_paths;
            cfg.seed = seed;
            cfg.antithetic = antithetic;
            cfg.threads = threads;

            const auto proj = primal.project_to_domain(s_x, s_h);
            const double u_closed = primal.value_u(s_x, s_h);
            const McEstimate value = sim.mc_value_estimate(s_x, s_h, cfg);

            const double ystar = primal.f(proj.x, proj.h);
            PathConfig budget_cfg = cfg;
            budget_cfg.dt = std::max(cfg.dt, 2e-3);
            budget_cfg.n_paths = std::min<std::size_t>(cfg.n_paths, 2000);
            const McEstimate budget = sim.budget_functional(ystar, proj.h, budget_cfg);

            PathConfig cons_cfg = cfg;
            cons_cfg.horizon = std::min(cfg.horizon, 5.0);
            cons_cfg.n_paths = std::min<std::size_t>(cfg.n_paths, 16);
            const double consistency = sim.dual_primal_consistency(proj.x, proj.h, cons_cfg);

            json summary{
                {"schema", "spendmax-simulate/1"},
                {"params", params_json(primal.params())},
                {"state", {{"x", s_x}, {"h", s_h}}},
                {"initial_reference_jump",
                 {{"jumped", proj.jumped}, {"h_effective", proj.h}}},
                {"closed_form_u", u_closed},
                {"mc_value",
                 {{"estimate", value.value},
                  {"std_error", value.std_error},
                  {"tail_low", value.tail_low},
                  {"tail_high", value.tail_high}}},
                {"budget_check",
                 {{"y_star", ystar},
                  {"estimate", budget.value},
                  {"std_error", budget.std_error},
                  {"tail_high", budget.tail_high},
                  {"target_x", proj.x}}},
                {"consistency_deviation", consistency},
                {"config",
                 {{"horizon", cfg.horizon},
                  {"dt", cfg.dt},
                  {"paths", cfg.n_paths},
                  {"seed", cfg.seed},
                  {"antithetic", cfg.antithetic}}},
            };
            out.stream() << summary.dump(2) << "\n";

            if (dump_paths > 0) {
                std::string ppath = paths_out;
                if (ppath.empty())
                    ppath = (out_path.empty() || out_path == "-") ? "paths.csv"
                                                                  : out_path + ".paths.csv";
                std::ofstream pf(ppath);
                if (!pf) throw ConfigError("cannot open path output: " + ppath);
                pf << "path,t,w,x,h,c,pi\n";
                for (int pi = 0; pi < dump_paths; ++pi) {
                    SimPath path = sim.simulate_primal_path(s_x, s_h, cfg, pi);
                    for (std::size_t i = 0; i < path.times.size(); ++i)
                        pf << pi << ',' << fmt(path.times[i]) << ',' << fmt(path.w[i]) << ','
                           << fmt(path.x[i]) << ',' << fmt(path.h_hat[i]) << ','
                           << fmt(path.c[i]) << ',' << fmt(path.pi[i]) << "\n";
                }
            }
            return 0;
        }

        if (cmd_v->parsed()) {
            PrimalSolution primal = make_solution(params_path, allow_rho_general);
            const verify::ScanReport scan = verify::scan_report(primal);

            json checks = json::array();
            for (const auto& c : scan.checks)
                checks.push_back(json{{"name", c.name},
                                      {"grid_point", c.grid_point},
                                      {"value", c.value},
                                      {"tolerance", c.tolerance},
                                      {"pass", c.pass}});

            bool all_pass = scan.all_pass;
            const verify::BvpReport bvp = verify::bvp_oracle(primal, 1.0, 2000);
            const double order = verify::bvp_convergence_order(primal, 1.0, 500);
            const bool bvp_pass = bvp.max_rel_dev < 1e-5 && std::abs(order - 2.0) < 0.5;
            checks.push_back(json{{"name", "bvp-oracle"},
                                  {"grid_point", "h=1"},
                                  {"value", bvp.max_rel_dev},
                                  {"tolerance", 1e-5},
                                  {"pass", bvp_pass}});
            all_pass = all_pass && bvp_pass;

            if (primal.params().tag.rho_case == RhoCase::EqualsR) {
                const Boundaries b = primal.boundaries(1.0);
                double worst = 0.0;
                for (double x : {0.5 * b.x_zero, 0.5 * (b.x_zero + b.x_modr),
                                 0.5 * (b.x_modr + b.x_aggv)}) {
                    const auto hjb = verify::hjb_residual_primal(primal, x, 1.0);
                    worst = std::max(worst,
                                     std::abs(hjb.residual) / (1.0 + std::abs(hjb.u)));
                }
                const bool hjb_pass = worst < 1e-5;
                checks.push_back(json{{"name", "hjb-residual"},
                                      {"grid_point", "h=1"},
                                      {"value", worst},
                                      {"tolerance", 1e-5},
                                      {"pass", hjb_pass}});
                all_pass = all_pass && hjb_pass;
            }

            json report{{"schema", "spendmax-verify/1"},
                        {"params", params_json(primal.params())},
                        {"all_pass", all_pass},
                        {"checks", checks}};
            out.stream() << report.dump(2) << "\n";
            return all_pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
