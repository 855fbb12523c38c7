#pragma once

// Command implementations behind the rgmb executable. Each command returns a
// process exit status: 0 success, 1 solver or check failure, 2 bad input.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "io.hpp"
#include "mc_solver.hpp"
#include "pathsim.hpp"
#include "priors.hpp"
#include "timechange.hpp"
#include "volterra.hpp"

namespace rgmb::cli {

using json = nlohmann::ordered_json;

// Constant of the first-order shift between discretely and continuously
// exercised stopping boundaries, in units of the one-step standard deviation.
inline constexpr double discrete_exercise_shift = 0.5826;

struct RunOptions {
    std::string out_dir;  // empty: take the configuration's [output] dir
    std::size_t workers = 0;  // 0: take the configuration's value
    std::ostream* log = &std::cerr;
};

inline json curve_json(const CoefficientCurve& c) { return c.describe(); }

inline json law_json(const Law& law) {
    struct Visitor {
        json operator()(const Dirac& d) const { return {{"point", d.point}}; }
        json operator()(const Discrete& d) const { return {{"points", d.points}, {"weights", d.weights}}; }
        json operator()(const Gaussian& g) const { return {{"mean", g.mean}, {"variance", g.variance}}; }
        json operator()(const TruncatedGaussian& g) const {
            json j = {{"mean", g.mean}, {"variance", g.variance}};
            j["lower"] = std::isfinite(g.lower) ? json(g.lower) : json(g.lower < 0 ? "-inf" : "inf");
            j["upper"] = std::isfinite(g.upper) ? json(g.upper) : json(g.upper < 0 ? "-inf" : "inf");
            return j;
        }
        json operator()(const Tabulated& t) const {
            return {{"nodes", t.grid.size()}, {"z_min", t.grid.front()}, {"z_max", t.grid.back()}};
        }
    };
    return std::visit(Visitor{}, law);
}

inline json prior_json(const Prior& p) {
    json j = {{"kind", p.kind_name()}, {"frame", frame_name(p.frame())}};
    j["parameters"] = law_json(p.law());
    return j;
}

inline json meta_json(const config::ExperimentConfig& cfg) {
    json j;
    j["model"] = {{"alpha", curve_json(cfg.model.alpha)},
                  {"beta", curve_json(cfg.model.beta)},
                  {"zeta", curve_json(cfg.model.zeta)},
                  {"T", cfg.model.horizon},
                  {"x0", cfg.model.x0}};
    j["prior"] = prior_json(cfg.prior);
    if (cfg.prior_variance > 0.0) j["prior"]["resolved_variance"] = cfg.prior_variance;
    j["grid"] = {{"N", cfg.grid.N}, {"M", cfg.grid.M}, {"K", cfg.grid.K},
                 {"x_lo", cfg.grid.x_lo}, {"x_hi", cfg.grid.x_hi}};
    j["seed"] = cfg.grid.seed;
    j["rng"] = cfg.solve.rng == RngScheme::per_cell ? "per_cell" : "per_slice";
    j["config"] = cfg.doc.text();
    return j;
}

inline void write_json(const std::string& path, const json& j) {
    auto out = io::open_out(path);
    out << j.dump(2) << '\n';
}

inline std::string prepare_out(const config::ExperimentConfig& cfg, const RunOptions& opt) {
    const std::string dir = opt.out_dir.empty() ? cfg.out_dir : opt.out_dir;
    std::filesystem::create_directories(dir);
    return dir;
}

inline SolveOptions solve_options(const config::ExperimentConfig& cfg, const RunOptions& opt) {
    SolveOptions s = cfg.solve;
    if (opt.workers > 0) s.workers = opt.workers;
    return s;
}

/// Gain for the prior if it belongs to a case with an integral equation.
inline std::optional<OuGain> volterra_gain(const TimeChange& tc, const Prior& prior) {
    const Prior bridge = to_frame(prior, Frame::bridge, tc);
    if (std::holds_alternative<Dirac>(bridge.law())) return build_dirac_gain(tc, bridge);
    if (std::holds_alternative<Gaussian>(bridge.law())) return build_gaussian_gain(tc, bridge);
    return std::nullopt;
}

inline BoundarySolution run_volterra(const config::ExperimentConfig& cfg, const TimeChange& tc,
                                     const std::string& dir, json& meta) {
    const auto gain = volterra_gain(tc, cfg.prior);
    if (!gain) {
        throw ConfigurationError("the integral-equation solver needs a Dirac or Gaussian prior, got " +
                                 cfg.prior.kind_name());
    }
    const BoundarySolution sol = picard_solve(*gain, volterra_grid(), cfg.picard);
    io::write_volterra_boundary(dir, boundary_rows(tc, sol));
    meta["volterra"] = {{"case", volterra_case_name(sol.kind)},
                        {"iterations", sol.iterations},
                        {"residual", sol.residual},
                        {"terminal_value", gain->terminal_value},
                        {"nodes", sol.s_grid.size()}};
    return sol;
}

// ---------------------------------------------------------------------------
// solve / volterra
// ---------------------------------------------------------------------------

inline int cmd_solve(const config::ExperimentConfig& cfg, const RunOptions& opt = {}) {
    try {
        const std::string dir = prepare_out(cfg, opt);
        const TimeChange tc = TimeChange::build(cfg.model);
        json meta = meta_json(cfg);
        double runtime = 0.0;
        if (cfg.method != config::Method::volterra) {
            const SolveResult r = solve(tc, cfg.prior, cfg.solver_grid(), solve_options(cfg, opt));
            io::write_result(dir, r);
            const Boundary b = extract_boundary(r);
            io::write_mc_boundary(dir + "/boundary.csv", b);
            runtime += r.runtime_seconds;
            meta["solver"] = {{"failed_cells", r.failed_cells},
                              {"max_posterior_variance", r.max_posterior_variance},
                              {"single_boundary", b.single_boundary},
                              {"max_intervals", b.max_intervals},
                              {"warnings", r.warnings}};
            for (const auto& w : r.warnings) *opt.log << "warning: " << w << '\n';
        }
        if (cfg.method != config::Method::mc) {
            const auto started = std::chrono::steady_clock::now();
            const std::string name = cfg.method == config::Method::both ? "volterra_boundary.csv" : "boundary.csv";
            const BoundarySolution sol = run_volterra(cfg, tc, dir + "/" + name, meta);
            io::write_convergence_log(dir + "/convergence.log", sol);
            runtime += std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        }
        meta["runtime_seconds"] = runtime;
        write_json(dir + "/meta.json", meta);
        return 0;
    } catch (const ConvergenceError& e) {
        *opt.log << "error: " << e.what() << " (residual " << e.residual() << ")\n";
        return 1;
    } catch (const std::exception& e) {
        *opt.log << "error: " << e.what() << '\n';
        return 1;
    }
}

inline int cmd_volterra(const config::ExperimentConfig& cfg, const RunOptions& opt = {}) {
    config::ExperimentConfig c = cfg;
    c.method = config::Method::volterra;
    return cmd_solve(c, opt);
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

inline int cmd_render(const std::string& dir, const RunOptions& opt = {}) {
    for (const char* f : {"/V.csv", "/D.csv"}) {
        if (!std::filesystem::exists(dir + f)) {
            *opt.log << "error: missing " << dir << f << '\n';
            return 2;
        }
    }
    try {
        const io::GridTable d = io::read_grid_csv(dir + "/D.csv");
        auto out = io::open_out(dir + "/heatmap.svg");
        out << io::heatmap_svg(d);
        return 0;
    } catch (const ConfigurationError& e) {
        *opt.log << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        *opt.log << "error: " << e.what() << '\n';
        return 1;
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline int cmd_simulate(const config::ExperimentConfig& cfg, const RunOptions& opt = {}) {
    try {
        const std::string dir = prepare_out(cfg, opt);
        const TimeChange tc = TimeChange::build(cfg.model);
        const auto times = quad::linspace(0.0, cfg.model.horizon, cfg.simulate.steps + 1);
        const std::size_t workers = opt.workers > 0 ? opt.workers : cfg.solve.workers;
        const PathBatch batch = simulate(tc, cfg.prior, times, cfg.simulate.paths, cfg.grid.seed, workers);

        const Prior original = to_frame(cfg.prior, Frame::original, tc);
        const MeanVar target = mean_var(original.law());
        std::vector<double> terminal(batch.paths.rows());
        for (std::size_t p = 0; p < terminal.size(); ++p) terminal[p] = batch.paths(p, times.size() - 1);
        const MonteCarloEstimate est = detail::summarize(terminal);
        double var = 0.0;
        for (double v : terminal) var += (v - est.mean) * (v - est.mean);
        var /= std::max<std::size_t>(1, terminal.size() - 1);

        json report = meta_json(cfg);
        report["paths"] = cfg.simulate.paths;
        report["steps"] = cfg.simulate.steps;
        report["terminal"] = {{"mean", est.mean},
                              {"std_error", est.std_error},
                              {"variance", var},
                              {"prior_mean", target.mean},
                              {"prior_variance", target.variance}};
        if (std::holds_alternative<Dirac>(cfg.prior.law()) && cfg.simulate.paths > 1) {
            const CovarianceReport cov = check_cov_factorization(batch, tc);
            report["covariance"] = {{"cells", cov.cells.size()}, {"passed", cov.passed}, {"pass_rate", cov.pass_rate}};
        }
        write_json(dir + "/report.json", report);
        if (cfg.simulate.dump) io::write_grid_csv(dir + "/paths.csv", std::vector<double>(batch.pins), times, batch.paths);
        return 0;
    } catch (const std::exception& e) {
        *opt.log << "error: " << e.what() << '\n';
        return 1;
    }
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct CheckOutcome {
    std::string name;
    std::string status;  // "pass", "fail" or "skipped"
    json details = json::object();
};

/// Upper edge of the box minus the total width of the stopping cells of row i,
/// each cell spanning the midpoints to its neighbours. For a single stopping
/// run attached to the upper edge this is the run's lower end; isolated
/// misclassified cells move it by one cell width each.
inline std::optional<double> measure_threshold(const SolveResult& r, std::size_t i) {
    const auto& x = r.grid.x;
    double measure = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!r.stop(i, j)) continue;
        any = true;
        const double lo = j > 0 ? 0.5 * (x[j - 1] + x[j]) : x[j];
        const double hi = j + 1 < x.size() ? 0.5 * (x[j] + x[j + 1]) : x[j];
        measure += hi - lo;
    }
    if (!any) return std::nullopt;
    return x.back() - measure;
}

inline double lower_support(const Law& law) {
    struct Visitor {
        double operator()(const Dirac& d) const { return d.point; }
        double operator()(const Discrete& d) const { return d.points.front(); }
        double operator()(const Gaussian&) const { return -std::numeric_limits<double>::infinity(); }
        double operator()(const TruncatedGaussian& g) const { return g.lower; }
        double operator()(const Tabulated& t) const {
            for (std::size_t k = 0; k < t.grid.size(); ++k) {
                if (t.density[k] > 0.0) return k > 0 ? t.grid[k - 1] : t.grid[k];
            }
            return t.grid.back();
        }
    };
    return std::visit(Visitor{}, law);
}

/// Continuation cells of `dirac` that stop in `general`, ignoring cells that
/// lie within one cell of either region edge and the terminal slice.
inline std::vector<std::pair<std::size_t, std::size_t>> dirac_bound_violations(const SolveResult& dirac,
                                                                               const SolveResult& general) {
    std::vector<std::pair<std::size_t, std::size_t>> bad;
    const std::size_t rows = dirac.stop.rows(), cols = dirac.stop.cols();
    const auto near_edge = [&](const Matrix<std::uint8_t>& d, std::size_t i, std::size_t j) {
        for (std::size_t k = j > 0 ? j - 1 : j; k <= std::min(cols - 1, j + 1); ++k) {
            if (d(i, k) != d(i, j)) return true;
        }
        return false;
    };
    for (std::size_t i = 0; i + 1 < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (dirac.stop(i, j) || !general.stop(i, j)) continue;
            if (near_edge(dirac.stop, i, j) || near_edge(general.stop, i, j)) continue;
            bad.emplace_back(i, j);
        }
    }
    return bad;
}

struct OrderingResult {
    std::size_t cells = 0;
    std::size_t holding = 0;
    std::vector<std::pair<std::size_t, std::size_t>> failing;
    double fraction() const { return cells ? static_cast<double>(holding) / cells : 1.0; }
};

/// Cellwise V1 <= V2 + k * sqrt(se1^2 + se2^2).
inline OrderingResult value_ordering(const SolveResult& v1, const SolveResult& v2, double k) {
    OrderingResult out;
    for (std::size_t i = 0; i < v1.value.rows(); ++i) {
        for (std::size_t j = 0; j < v1.value.cols(); ++j) {
            ++out.cells;
            const double se = std::hypot(v1.std_error(i, j), v2.std_error(i, j));
            if (v1.value(i, j) <= v2.value(i, j) + k * se) {
                ++out.holding;
            } else {
                out.failing.emplace_back(i, j);
            }
        }
    }
    return out;
}

struct CrossCheck {
    double raw_sup = 0.0;        // sup |b_mc - b_volterra|
    double corrected_sup = 0.0;  // against the boundary shifted by the discrete-exercise term
    std::size_t slices = 0;
    std::size_t missing = 0;     // slices without any stopping cell
};

/// Compares the Monte Carlo stopping threshold with the integral-equation
/// boundary on t <= t_max.
inline CrossCheck cross_check(const SolveResult& r, const BoundarySolution& sol, const TimeChange& tc,
                              double t_max) {
    CrossCheck out;
    const auto& t = r.grid.t;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (t[i] > t_max) break;
        ++out.slices;
        const auto th = measure_threshold(r, i);
        if (!th) {
            ++out.missing;
            continue;
        }
        const double s = tc.s_of_t(t[i]);
        const double exact = boundary_at(sol, s);
        const double step_sd = std::sqrt(tc.kernel().variance(t[i], t[i + 1]));
        out.raw_sup = std::max(out.raw_sup, std::abs(*th - exact));
        out.corrected_sup =
            std::max(out.corrected_sup, std::abs(*th - (exact - discrete_exercise_shift * step_sd)));
    }
    return out;
}

inline json cells_json(const std::vector<std::pair<std::size_t, std::size_t>>& cells, const SolverGrid& g,
                       std::size_t limit = 20) {
    json arr = json::array();
    for (std::size_t k = 0; k < std::min(limit, cells.size()); ++k) {
        const auto [i, j] = cells[k];
        arr.push_back({{"i", i}, {"j", j}, {"t", g.t[i]}, {"x", g.x[j]}});
    }
    return arr;
}

inline int cmd_validate(const config::ExperimentConfig& cfg, const RunOptions& opt = {}) {
    std::vector<CheckOutcome> checks;
    json report;
    try {
        const std::string dir = prepare_out(cfg, opt);
        const TimeChange tc = TimeChange::build(cfg.model);
        const SolveOptions sopt = solve_options(cfg, opt);
        const SolverGrid grid = cfg.solver_grid();
        const SolveResult main = solve(tc, cfg.prior, grid, sopt);
        const Boundary boundary = extract_boundary(main);
        const Prior bridge = to_frame(cfg.prior, Frame::bridge, tc);

        // Covariance factorization of Dirac-pinned paths.
        {
            CheckOutcome c{"covariance", "pass"};
            const Prior pin = Prior::dirac(0.0, Frame::bridge);
            const auto times = quad::linspace(0.0, cfg.model.horizon, 11);
            const PathBatch batch = simulate(tc, pin, times, cfg.validate.bound_paths, cfg.grid.seed + 1, sopt.workers);
            const CovarianceReport cov = check_cov_factorization(batch, tc);
            c.details = {{"cells", cov.cells.size()}, {"passed", cov.passed}, {"pass_rate", cov.pass_rate}};
            if (cov.pass_rate < 0.95) c.status = "fail";
            checks.push_back(c);
        }
        // Maximal bounds.
        {
            MaximalBoundParams p;
            p.y = 0.3;
            p.z = 0.5;
            p.y2 = -0.2;
            p.z2 = -0.4;
            p.s = 0.2;
            p.n_paths = cfg.validate.bound_paths;
            p.seed = cfg.grid.seed + 2;
            const MaximalBoundsReport r = check_maximal_bounds(p);
            CheckOutcome c{"maximal_bounds", r.all_passed() ? "pass" : "fail"};
            for (const BoundCheck* b : {&r.sup_bridge, &r.space_difference, &r.time_difference}) {
                c.details[b->name] = {{"estimate", b->lhs}, {"std_error", b->std_error}, {"bound", b->bound},
                                      {"passed", b->passed}};
            }
            checks.push_back(c);
        }
        // Single-boundary criterion.
        {
            std::vector<double> s_grid, y_grid;
            for (std::size_t i = 0; i + 1 < grid.t.size(); ++i) s_grid.push_back(tc.s_of_t(grid.t[i]));
            for (std::size_t i = 0; i + 1 < grid.t.size(); ++i) {
                for (double x : grid.x) y_grid.push_back(tc.to_bridge_coords(grid.t[i], x).y);
            }
            std::sort(y_grid.begin(), y_grid.end());
            y_grid.erase(std::unique(y_grid.begin(), y_grid.end()), y_grid.end());
            std::vector<double> y_sub;
            const std::size_t stride = std::max<std::size_t>(1, y_grid.size() / 201);
            for (std::size_t k = 0; k < y_grid.size(); k += stride) y_sub.push_back(y_grid[k]);
            const SingleBoundaryReport sb = single_boundary_condition(bridge, tc.y0(), s_grid, y_sub);
            CheckOutcome c{"single_boundary", "pass"};
            c.details = {{"condition_sign", variance_sign_name(sb.sign)},
                         {"violations", sb.violations},
                         {"max_excess", sb.max_excess},
                         {"extracted_single_boundary", boundary.single_boundary},
                         {"max_intervals", boundary.max_intervals}};
            if (sb.violations > 0) {
                c.status = "skipped";
                c.details["reason"] = "posterior variance exceeds 1 - s; no single-boundary claim";
            } else if (!boundary.single_boundary) {
                c.status = "fail";
            }
            checks.push_back(c);
        }
        // Dirac bound.
        {
            const Prior original = to_frame(cfg.prior, Frame::original, tc);
            const double zstar = lower_support(original.law());
            CheckOutcome c{"dirac_bound", "pass"};
            if (!std::isfinite(zstar)) {
                c.status = "skipped";
                c.details["reason"] = "prior support is unbounded below";
            } else {
                const SolveResult dirac = solve(tc, Prior::dirac(zstar, Frame::original), grid, sopt);
                const auto bad = dirac_bound_violations(dirac, main);
                c.details = {{"z_star", zstar}, {"violations", bad.size()}, {"cells", cells_json(bad, grid)}};
                if (!bad.empty()) c.status = "fail";
            }
            checks.push_back(c);
        }
        // Likelihood-ratio ordering against the [compare] prior.
        {
            CheckOutcome c{"ordering", "pass"};
            if (!cfg.compare) {
                c.status = "skipped";
                c.details["reason"] = "no [compare] prior";
            } else {
                bool ordered = false;
                try {
                    ordered = lr_order_leq(bridge, to_frame(*cfg.compare, Frame::bridge, tc));
                } catch (const IndeterminateError& e) {
                    c.details["lr_error"] = e.what();
                }
                const SolveResult other = solve(tc, *cfg.compare, grid, sopt);
                const OrderingResult o = value_ordering(main, other, cfg.validate.ordering_se);
                c.details = {{"lr_ordered", ordered},
                             {"cells", o.cells},
                             {"holding", o.holding},
                             {"fraction", o.fraction()},
                             {"failing_cells", cells_json(o.failing, grid)}};
                if (!ordered || o.fraction() < 0.99) c.status = "fail";
            }
            checks.push_back(c);
        }
        // Cross-solver agreement with the integral equation.
        {
            CheckOutcome c{"cross_solver", "pass"};
            std::optional<OuGain> gain;
            try {
                gain = volterra_gain(tc, cfg.prior);
            } catch (const ConfigurationError& e) {
                c.details["reason"] = e.what();
            }
            if (!cfg.validate.cross_solver) {
                c.status = "skipped";
                c.details["reason"] = "disabled in [validate]";
            } else if (!gain) {
                c.status = "skipped";
                if (!c.details.contains("reason")) c.details["reason"] = "no integral equation for this prior";
            } else {
                const BoundarySolution sol = picard_solve(*gain, volterra_grid(), cfg.picard);
                const CrossCheck x = cross_check(main, sol, tc, 0.9 * cfg.model.horizon);
                // The MC threshold is resolved to one x-cell.
                const double tol = cfg.validate.cross_tol + (grid.x[1] - grid.x[0]);
                c.details = {{"volterra_iterations", sol.iterations},
                             {"volterra_b0", sol.b_values.front()},
                             {"raw_sup", x.raw_sup},
                             {"corrected_sup", x.corrected_sup},
                             {"tolerance", tol},
                             {"slices", x.slices},
                             {"missing_slices", x.missing}};
                if (x.missing > 0 || x.corrected_sup > tol) c.status = "fail";
            }
            checks.push_back(c);
        }

        report = meta_json(cfg);
        bool all = true;
        json arr = json::array();
        for (const auto& c : checks) {
            arr.push_back({{"name", c.name}, {"status", c.status}, {"details", c.details}});
            if (c.status == "fail") {
                all = false;
                *opt.log << "FAILED " << c.name << ": " << c.details.dump() << '\n';
            }
        }
        report["checks"] = arr;
        report["all_passed"] = all;
        write_json(dir + "/report.json", report);
        return all ? 0 : 1;
    } catch (const std::exception& e) {
        *opt.log << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace rgmb::cli
