#pragma once

// Backward-induction Monte Carlo solver for the stopping problem in original
// (t, x) coordinates.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "pathsim.hpp"
#include "priors.hpp"
#include "rng.hpp"
#include "timechange.hpp"

namespace rgmb {

struct SolverGrid {
    std::vector<double> t;  // t[0] = 0, t[N] = T
    std::vector<double> x;  // x[0] = lower bound, x[M] = upper bound
    std::size_t samples = 10000;
    std::uint64_t seed = 0;

    std::size_t N() const { return t.size() - 1; }
    std::size_t M() const { return x.size() - 1; }

    void validate(double horizon, double x0) const {
        if (t.size() < 3 || x.size() < 3) throw ConfigurationError("grid needs N, M >= 2");
        if (t.front() != 0.0 || t.back() != horizon) {
            throw ConfigurationError("time grid must run from 0 to T");
        }
        for (std::size_t k = 1; k < t.size(); ++k) {
            if (!(t[k] > t[k - 1])) throw ConfigurationError("time grid must be strictly increasing");
        }
        for (std::size_t k = 1; k < x.size(); ++k) {
            if (!(x[k] > x[k - 1])) throw ConfigurationError("space grid must be strictly increasing");
        }
        if (x0 < x.front() || x0 > x.back()) throw ConfigurationError("x0 must lie inside the space grid");
        if (samples < 1) throw ConfigurationError("Monte Carlo sample size must be >= 1");
    }
};

/// Times T ln(1 + i(e - 1)/N) for i = 0..N and M + 1 equispaced space nodes
/// from x_lo to x_hi.
inline SolverGrid default_grid(double T, std::size_t N = 1000, std::size_t M = 1000,
                               std::size_t K = 10000, double x_lo = -3.0, double x_hi = 3.0,
                               std::uint64_t seed = 0) {
    if (N < 2 || M < 2) throw ConfigurationError("grid needs N, M >= 2");
    if (!(x_hi > x_lo)) throw ConfigurationError("grid needs x_lo < x_hi");
    SolverGrid g;
    g.t.resize(N + 1);
    const double e1 = std::numbers::e - 1.0;
    for (std::size_t i = 0; i <= N; ++i) {
        g.t[i] = T * std::log1p(static_cast<double>(i) * e1 / static_cast<double>(N));
    }
    g.t[N] = T;
    g.x.resize(M + 1);
    for (std::size_t j = 0; j <= M; ++j) {
        g.x[j] = x_lo + static_cast<double>(j) * (x_hi - x_lo) / static_cast<double>(M);
    }
    g.x[M] = x_hi;
    g.samples = K;
    g.seed = seed;
    return g;
}

enum class RngScheme {
    per_cell,   // substream keyed by (seed, i, j)
    per_slice,  // substream keyed by (seed, i), shared by every cell of the slice
};

struct SolveOptions {
    std::size_t workers = 1;
    double variance_cap = std::numeric_limits<double>::infinity();
    RngScheme rng = RngScheme::per_cell;
};

struct SolveResult {
    SolverGrid grid;
    Matrix<double> value;
    Matrix<std::uint8_t> stop;
    Matrix<double> std_error;  // standard error of each continuation estimate
    std::vector<std::string> warnings;
    std::size_t failed_cells = 0;
    double max_posterior_variance = 0.0;
    double y0 = 0.0;
    double runtime_seconds = 0.0;
};

/// Piecewise-linear interpolation of `row` over `grid`. Outside the grid the
/// edge segment is extended linearly and floored at the gain x.
inline double interpolate_value(std::span<const double> grid, std::span<const double> row, double x) {
    const std::size_t n = grid.size();
    if (x <= grid[0]) {
        const double slope = (row[1] - row[0]) / (grid[1] - grid[0]);
        return std::max(x, row[0] + slope * (x - grid[0]));
    }
    if (x >= grid[n - 1]) {
        const double slope = (row[n - 1] - row[n - 2]) / (grid[n - 1] - grid[n - 2]);
        return std::max(x, row[n - 1] + slope * (x - grid[n - 1]));
    }
    const auto k = static_cast<std::size_t>(std::upper_bound(grid.begin(), grid.end(), x) - grid.begin());
    const double w = (x - grid[k - 1]) / (grid[k] - grid[k - 1]);
    return (1.0 - w) * row[k - 1] + w * row[k];
}

/// Value and decision matrices by backward induction. The prior may be given
/// in either frame.
inline SolveResult solve(const TimeChange& tc, const Prior& prior, const SolverGrid& grid,
                         const SolveOptions& options = {}) {
    const auto started = std::chrono::steady_clock::now();
    grid.validate(tc.horizon(), tc.model().x0);
    const Prior bridge_prior = to_frame(prior, Frame::bridge, tc);
    const double pin_shift = tc.a0(1.0);
    const double pin_scale = tc.a1(1.0);
    const double y0 = tc.y0();
    const double sqrt_tbar = std::sqrt(tc.Tbar());
    const std::size_t N = grid.N();
    const std::size_t cols = grid.x.size();
    const std::size_t K = grid.samples;

    SolveResult out;
    out.grid = grid;
    out.y0 = y0;
    out.value = Matrix<double>(N + 1, cols);
    out.stop = Matrix<std::uint8_t>(N + 1, cols, 1);
    out.std_error = Matrix<double>(N + 1, cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) out.value(N, j) = grid.x[j];

    std::vector<std::uint8_t> failed(cols);
    std::vector<double> post_var(cols);
    for (std::size_t i = N; i-- > 0;) {
        const double t = grid.t[i];
        const StepCoefficients step = tc.kernel().step_coefficients(t, grid.t[i + 1]);
        const double step_sd = std::sqrt(step.variance);
        const double s = tc.s_of_t(t);
        const double m = tc.m(t);
        const double scale = std::exp(tc.kernel().log_phi0(t)) * sqrt_tbar;
        const auto next = out.value.row(i + 1);
        std::fill(failed.begin(), failed.end(), 0);
        std::fill(post_var.begin(), post_var.end(), 0.0);

        parallel_for(cols, options.workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t j = lo; j < hi; ++j) {
                const double x = grid.x[j];
                std::optional<Posterior> post;
                try {
                    post = posterior(bridge_prior, s, (x - m) / scale, y0);
                } catch (const NumericalError&) {
                    failed[j] = 1;
                    out.value(i, j) = x;
                    out.stop(i, j) = 1;
                    continue;
                }
                post_var[j] = posterior_mean_var(*post).variance;
                RandomStream rng = options.rng == RngScheme::per_cell ? substream(grid.seed, i, j)
                                                                      : substream(grid.seed, i);
                double sum = 0.0, sum_sq = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    const double z = pin_shift + pin_scale * quantile(post->law, rng.uniform());
                    const double mean = step.offset + step.x_coef * x + step.z_coef * z;
                    const double b = step_sd > 0.0 ? mean + step_sd * rng.normal() : mean;
                    const double v = interpolate_value(grid.x, next, b);
                    sum += v;
                    sum_sq += v * v;
                }
                const double kd = static_cast<double>(K);
                const double cont = sum / kd;
                const double var = K > 1 ? std::max(0.0, (sum_sq - kd * cont * cont) / (kd - 1.0)) : 0.0;
                out.std_error(i, j) = std::sqrt(var / kd);
                const bool stop_here = !(cont > x);
                out.value(i, j) = stop_here ? x : cont;
                out.stop(i, j) = stop_here ? 1 : 0;
            }
        });

        for (std::size_t j = 0; j < cols; ++j) {
            out.max_posterior_variance = std::max(out.max_posterior_variance, post_var[j]);
            if (failed[j]) {
                ++out.failed_cells;
                out.warnings.push_back("posterior failed at t=" + std::to_string(t) +
                                       ", x=" + std::to_string(grid.x[j]) + "; cell marked stopping");
            }
        }
    }
    if (out.max_posterior_variance > options.variance_cap) {
        out.warnings.push_back("posterior variance " + std::to_string(out.max_posterior_variance) +
                               " exceeds the configured cap " + std::to_string(options.variance_cap));
    }
    out.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return out;
}

// ---------------------------------------------------------------------------
// Boundary extraction
// ---------------------------------------------------------------------------

struct StopInterval {
    double low = 0.0;
    double high = 0.0;
    bool touches_lower = false;
    bool touches_upper = false;
};

struct BoundarySlice {
    double t = 0.0;
    std::vector<StopInterval> intervals;

    /// The inner end of a single edge-anchored stopping interval.
    std::optional<double> threshold() const {
        if (intervals.size() != 1) return std::nullopt;
        const auto& iv = intervals.front();
        if (iv.touches_upper && !iv.touches_lower) return iv.low;
        if (iv.touches_lower && !iv.touches_upper) return iv.high;
        return std::nullopt;
    }
};

struct Boundary {
    std::vector<BoundarySlice> slices;
    bool single_boundary = true;
    std::size_t max_intervals = 0;
};

/// Maximal runs of stopping cells per time slice. Run ends sit at midpoints
/// between the last continuation node and the first stopping node.
inline Boundary extract_boundary(const SolveResult& result) {
    const auto& x = result.grid.x;
    const std::size_t cols = x.size();
    Boundary out;
    bool upper_ok = true, lower_ok = true;
    for (std::size_t i = 0; i < result.stop.rows(); ++i) {
        BoundarySlice slice;
        slice.t = result.grid.t[i];
        std::size_t j = 0;
        while (j < cols) {
            if (!result.stop(i, j)) {
                ++j;
                continue;
            }
            const std::size_t a = j;
            while (j + 1 < cols && result.stop(i, j + 1)) ++j;
            StopInterval iv;
            iv.touches_lower = a == 0;
            iv.touches_upper = j == cols - 1;
            iv.low = iv.touches_lower ? x.front() : 0.5 * (x[a - 1] + x[a]);
            iv.high = iv.touches_upper ? x.back() : 0.5 * (x[j] + x[j + 1]);
            slice.intervals.push_back(iv);
            ++j;
        }
        out.max_intervals = std::max(out.max_intervals, slice.intervals.size());
        if (slice.intervals.size() > 1) {
            upper_ok = lower_ok = false;
        } else if (slice.intervals.size() == 1) {
            upper_ok = upper_ok && slice.intervals[0].touches_upper;
            lower_ok = lower_ok && slice.intervals[0].touches_lower;
        }
        out.slices.push_back(std::move(slice));
    }
    out.single_boundary = upper_ok || lower_ok;
    return out;
}

// ---------------------------------------------------------------------------
// Policy evaluation
// ---------------------------------------------------------------------------

inline std::size_t nearest_index(std::span<const double> grid, double x) {
    auto it = std::lower_bound(grid.begin(), grid.end(), x);
    if (it == grid.begin()) return 0;
    if (it == grid.end()) return grid.size() - 1;
    const auto k = static_cast<std::size_t>(it - grid.begin());
    return (x - grid[k - 1] <= grid[k] - x) ? k - 1 : k;
}

/// Mean stopped payoff X_tau of the first-entry rule into the stopping cells,
/// over exactly simulated conditioned paths on the solver's time grid.
inline MonteCarloEstimate policy_value(const SolveResult& result, const TimeChange& tc,
                                       const Prior& prior, std::size_t n_paths, std::uint64_t seed,
                                       std::size_t workers = 1) {
    if (n_paths == 0) throw PreconditionError("policy evaluation needs at least one path");
    const BridgeSimulator sim(tc, prior, result.grid.t);
    const auto& xg = result.grid.x;
    std::vector<double> payoff(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> path(result.grid.t.size());
        for (std::size_t p = lo; p < hi; ++p) {
            sim.fill(seed, p, path);
            std::size_t i = 0;
            while (i + 1 < path.size() && !result.stop(i, nearest_index(xg, path[i]))) ++i;
            payoff[p] = path[i];
        }
    });
    return detail::summarize(payoff);
}

}  // namespace rgmb
