#pragma once

// Exact simulation of randomized Gauss-Markov bridges: draw the pin from the
// terminal law, then fill the path with pinned Gaussian transitions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "gmp_kernel.hpp"
#include "matrix.hpp"
#include "parallel.hpp"
#include "priors.hpp"
#include "rng.hpp"
#include "timechange.hpp"

namespace rgmb {

struct PathBatch {
    std::vector<double> times;
    Matrix<double> paths;  // one path per row
    std::vector<double> pins;
    std::uint64_t seed = 0;
};

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

class BridgeSimulator {
public:
    /// `prior` may be given in either frame; pins are drawn in the original frame.
    BridgeSimulator(const TimeChange& tc, const Prior& prior, std::vector<double> times)
        : times_(std::move(times)), law_(to_frame(prior, Frame::original, tc).law()) {
        const double T = tc.horizon();
        if (times_.size() < 2 || times_.front() != 0.0 || times_.back() != T) {
            throw PreconditionError("simulation times must start at 0 and end at T");
        }
        for (std::size_t k = 1; k < times_.size(); ++k) {
            if (!(times_[k] > times_[k - 1])) {
                throw PreconditionError("simulation times must be strictly increasing");
            }
            steps_.push_back(tc.kernel().step_coefficients(times_[k - 1], times_[k]));
        }
        x0_ = tc.model().x0;
    }

    const std::vector<double>& times() const { return times_; }

    /// Fills `out` (one value per time) for path `index`; returns the pin.
    double fill(std::uint64_t seed, std::size_t index, std::span<double> out) const {
        RandomStream rng = substream(seed, index);
        const double z = quantile(law_, rng.uniform());
        double x = x0_;
        out[0] = x;
        for (std::size_t k = 0; k < steps_.size(); ++k) {
            const auto& c = steps_[k];
            const double mean = c.offset + c.x_coef * x + c.z_coef * z;
            x = c.variance > 0.0 ? mean + std::sqrt(c.variance) * rng.normal() : mean;
            out[k + 1] = x;
        }
        return z;
    }

private:
    std::vector<double> times_;
    Law law_;
    std::vector<StepCoefficients> steps_;
    double x0_ = 0.0;
};

inline PathBatch simulate(const TimeChange& tc, const Prior& prior, std::vector<double> times,
                          std::size_t n_paths, std::uint64_t seed, std::size_t workers = 1) {
    BridgeSimulator sim(tc, prior, std::move(times));
    PathBatch batch;
    batch.times = sim.times();
    batch.paths = Matrix<double>(n_paths, batch.times.size());
    batch.pins.resize(n_paths);
    batch.seed = seed;
    parallel_for(n_paths, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) batch.pins[p] = sim.fill(seed, p, batch.paths.row(p));
    });
    return batch;
}

// ---------------------------------------------------------------------------
// Covariance factorization of the pinned gain process
// ---------------------------------------------------------------------------

struct CovarianceCell {
    std::size_t a = 0, b = 0;  // column indices, a <= b
    double empirical = 0.0;
    double theoretical = 0.0;
    double std_error = 0.0;
    bool passed = false;
};

struct CovarianceReport {
    std::vector<CovarianceCell> cells;
    std::size_t passed = 0;
    double pass_rate = 0.0;
};

/// Compares empirical covariances of a Dirac-pinned batch against
/// R1(min) R2(max) with R1(s) = a1(s) s and R2(s) = a1(s)(1 - s). Only
/// interior times are used; a cell passes within 4 standard errors.
inline CovarianceReport check_cov_factorization(const PathBatch& batch, const TimeChange& tc) {
    for (double z : batch.pins) {
        if (z != batch.pins.front()) throw PreconditionError("covariance check needs a Dirac batch");
    }
    const std::size_t n = batch.paths.rows();
    if (n < 2) throw PreconditionError("covariance check needs at least two paths");
    std::vector<std::size_t> cols;
    for (std::size_t k = 0; k < batch.times.size(); ++k) {
        if (batch.times[k] > 0.0 && batch.times[k] < tc.horizon()) cols.push_back(k);
    }
    std::vector<double> mean(cols.size(), 0.0);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (std::size_t p = 0; p < n; ++p) mean[c] += batch.paths(p, cols[c]);
        mean[c] /= static_cast<double>(n);
    }
    CovarianceReport report;
    for (std::size_t ca = 0; ca < cols.size(); ++ca) {
        for (std::size_t cb = ca; cb < cols.size(); ++cb) {
            double sum = 0.0, sum_sq = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                const double prod = (batch.paths(p, cols[ca]) - mean[ca]) *
                                    (batch.paths(p, cols[cb]) - mean[cb]);
                sum += prod;
                sum_sq += prod * prod;
            }
            const double nd = static_cast<double>(n);
            CovarianceCell cell;
            cell.a = cols[ca];
            cell.b = cols[cb];
            cell.empirical = sum / (nd - 1.0);
            const double m = sum / nd;
            cell.std_error = std::sqrt(std::max(0.0, sum_sq / nd - m * m) / nd);
            const double sa = tc.s_of_t(batch.times[cell.a]);
            const double sb = tc.s_of_t(batch.times[cell.b]);
            cell.theoretical = tc.a1(sa) * sa * tc.a1(sb) * (1.0 - sb);
            const double gap = std::abs(cell.empirical - cell.theoretical);
            cell.passed = gap <= 4.0 * cell.std_error || gap <= 1e-12;
            report.passed += cell.passed ? 1 : 0;
            report.cells.push_back(cell);
        }
    }
    report.pass_rate = report.cells.empty()
                           ? 1.0
                           : static_cast<double>(report.passed) / static_cast<double>(report.cells.size());
    return report;
}

// ---------------------------------------------------------------------------
// Brownian bridge maximal bounds
// ---------------------------------------------------------------------------

inline const double bridge_sup_constant = std::sqrt(std::numbers::pi / 2.0) * std::numbers::ln2;

namespace detail {

inline MonteCarloEstimate summarize(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    // Centred on the first sample so constant samples are summarized exactly.
    const double ref = v.empty() ? 0.0 : v[0];
    double m = 0.0;
    for (double x : v) m += x - ref;
    m = ref + m / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

/// Brownian path on `n` equal steps of [0, span], W[0] = 0.
inline void brownian_path(RandomStream& rng, double span, std::span<double> w) {
    const double sd = std::sqrt(span / static_cast<double>(w.size() - 1));
    w[0] = 0.0;
    for (std::size_t k = 1; k < w.size(); ++k) w[k] = w[k - 1] + sd * rng.normal();
}

}  // namespace detail

/// Monte Carlo estimate of E[sup |Y|] for a standard bridge 0 -> 0 on
/// [0, 1], sampled at n_steps + 1 equispaced points.
inline MonteCarloEstimate sup_abs_bridge_mean(std::size_t n_paths, std::size_t n_steps,
                                              std::uint64_t seed, std::size_t workers = 1) {
    if (n_paths == 0 || n_steps < 1) throw PreconditionError("need paths and steps");
    std::vector<double> sup(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> w(n_steps + 1);
        for (std::size_t p = lo; p < hi; ++p) {
            RandomStream rng = substream(seed, p);
            detail::brownian_path(rng, 1.0, w);
            const double end = w.back();
            double best = 0.0;
            for (std::size_t k = 0; k <= n_steps; ++k) {
                const double r = static_cast<double>(k) / static_cast<double>(n_steps);
                best = std::max(best, std::abs(w[k] - r * end));
            }
            sup[p] = best;
        }
    });
    return detail::summarize(sup);
}

struct MaximalBoundParams {
    double s = 0.0;
    double y = 0.0;
    double z = 0.0;
    double y2 = 0.0;   // second start for the space bound
    double z2 = 0.0;   // second pin for the space and time bounds
    double s2 = 0.5;   // second start time for the time bound, s <= s2 < 1
    std::size_t n_paths = 20000;
    std::size_t n_steps = 1024;
    std::uint64_t seed = 1;
};

struct BoundCheck {
    std::string name;
    double lhs = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    double margin = 0.0;  // bound - lhs
    bool passed = false;
};

struct MaximalBoundsReport {
    BoundCheck sup_bridge;
    BoundCheck space_difference;
    BoundCheck time_difference;

    bool all_passed() const {
        return sup_bridge.passed && space_difference.passed && time_difference.passed;
    }
};

/// Empirical left-hand sides of the three maximal bounds, with coupled
/// bridges driven by one Brownian path. A bound passes when the estimate
/// does not exceed it by more than 3 standard errors.
inline MaximalBoundsReport check_maximal_bounds(const MaximalBoundParams& p) {
    if (!(p.s >= 0.0 && p.s <= p.s2 && p.s2 < 1.0)) {
        throw PreconditionError("maximal bounds need 0 <= s <= s2 < 1");
    }
    const std::size_t n = p.n_steps;
    const double len = 1.0 - p.s;
    std::vector<double> sup1(p.n_paths), sup2(p.n_paths), sup3(p.n_paths);

    // Time-difference bound: bridges from (s_i, y) to z_i in the form
    // (z r + B_r + y(1 + t)) / (1 + t + r), t = s/(1 - s), sharing B.
    const double s1 = p.s, s2 = p.s2;
    auto clock = [](double s) { return s / (1.0 - s); };
    const double t1 = clock(s1), t2 = clock(s2);
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> r1(n + 1), r2(n + 1);
    std::vector<double> r_all;
    for (std::size_t k = 0; k <= n; ++k) {
        const double u = len * static_cast<double>(k) / static_cast<double>(n);
        r1[k] = k == n ? inf : clock(s1 + u) - t1;
        r2[k] = u >= 1.0 - s2 ? inf : clock(s2 + u) - t2;
        for (double r : {r1[k], r2[k]}) {
            if (std::isfinite(r)) r_all.push_back(r);
        }
    }
    std::sort(r_all.begin(), r_all.end());
    r_all.erase(std::unique(r_all.begin(), r_all.end()), r_all.end());
    auto index_of = [&](double r) {
        return static_cast<std::size_t>(std::lower_bound(r_all.begin(), r_all.end(), r) - r_all.begin());
    };

    std::vector<double> w(n + 1), b_r(r_all.size());
    for (std::size_t path = 0; path < p.n_paths; ++path) {
        RandomStream rng = substream(p.seed, path);
        detail::brownian_path(rng, len, w);
        const double end = w.back();
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            const double frac = static_cast<double>(k) / static_cast<double>(n);
            const double noise = w[k] - frac * end;
            const double ya = p.y + (p.z - p.y) * frac + noise;
            const double yb = p.y2 + (p.z2 - p.y2) * frac + noise;
            m1 = std::max(m1, std::abs(ya));
            m2 = std::max(m2, std::abs(ya - yb));
        }
        sup1[path] = m1;
        sup2[path] = m2;

        double b = 0.0, prev = 0.0;
        for (std::size_t k = 0; k < r_all.size(); ++k) {
            b += std::sqrt(r_all[k] - prev) * rng.normal();
            prev = r_all[k];
            b_r[k] = b;
        }
        auto value = [&](double r, double t, double zz) {
            if (!std::isfinite(r)) return zz;
            return (zz * r + b_r[index_of(r)] + p.y * (1.0 + t)) / (1.0 + t + r);
        };
        double m3 = 0.0;
        for (std::size_t k = 0; k <= n; ++k) {
            m3 = std::max(m3, std::abs(value(r1[k], t1, p.z) - value(r2[k], t2, p.z2)));
        }
        sup3[path] = m3;
    }

    auto finish = [](std::string name, std::span<const double> v, double bound) {
        const auto est = detail::summarize(v);
        BoundCheck c{std::move(name), est.mean, est.std_error, bound, bound - est.mean, false};
        c.passed = est.mean <= bound + 3.0 * est.std_error + 1e-12;
        return c;
    };
    MaximalBoundsReport report;
    report.sup_bridge = finish("sup_bridge", sup1,
                               std::sqrt(len) * bridge_sup_constant + std::abs(p.y) + std::abs(p.z));
    report.space_difference =
        finish("space_difference", sup2, std::abs(p.y - p.y2) + std::abs(p.z - p.z2));
    report.time_difference = finish(
        "time_difference", sup3,
        std::abs(p.z - p.z2) + (s2 - s1) / ((1.0 - s1) * (1.0 - s2)) *
                                   (std::abs(p.z2) + std::abs(p.y) + 5.0 * std::sqrt(std::numbers::pi / 2.0)) / 4.0);
    return report;
}

}  // namespace rgmb
