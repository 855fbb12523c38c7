#pragma once

// Terminal densities of the randomized bridge and their Bayesian updates.
//
// In the bridge frame the terminal value Z of the unit-time Brownian motion Y
// (started at y0) follows the prior nu. Given Y_s = y the pinning point has
// density
//   nu_{s,y}(z) = phi(z; y, 1-s) / phi(z; y0, 1) * nu(z) / psi(s, y),
// where psi is the normalizing integral. Closed forms are used for Dirac,
// discrete, Gaussian and truncated Gaussian priors; tabulated priors are
// reweighted on their grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "normal.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "timechange.hpp"

namespace rgmb {

enum class Frame { bridge, original };

inline const char* frame_name(Frame f) { return f == Frame::bridge ? "bridge" : "original"; }

struct Dirac {
    double point = 0.0;
};

/// Atoms sorted by position; `cumulative` holds running sums of `weights`.
struct Discrete {
    std::vector<double> points;
    std::vector<double> weights;
    std::vector<double> cumulative;
};

struct Gaussian {
    double mean = 0.0;
    double variance = 1.0;
};

/// Normal(mean, variance) restricted to [lower, upper]; bounds may be infinite.
struct TruncatedGaussian {
    double mean = 0.0;
    double variance = 1.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
};

/// Density values on a grid, normalized by the trapezoid rule; `cdf` is the
/// cumulative trapezoid sum.
struct Tabulated {
    std::vector<double> grid;
    std::vector<double> density;
    std::vector<double> cdf;
};

using Law = std::variant<Dirac, Discrete, Gaussian, TruncatedGaussian, Tabulated>;

struct MeanVar {
    double mean = 0.0;
    double variance = 0.0;
};

namespace detail {

inline Discrete make_discrete(std::vector<double> points, std::vector<double> weights) {
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return points[a] < points[b]; });
    Discrete d;
    double acc = 0.0;
    for (auto k : order) {
        d.points.push_back(points[k]);
        d.weights.push_back(weights[k]);
        acc += weights[k];
        d.cumulative.push_back(acc);
    }
    return d;
}

inline double trapezoid(std::span<const double> x, std::span<const double> f) {
    double acc = 0.0;
    for (std::size_t k = 1; k < x.size(); ++k) acc += 0.5 * (x[k] - x[k - 1]) * (f[k] + f[k - 1]);
    return acc;
}

/// Builds a normalized tabulation; `density` is divided by its trapezoid mass.
inline Tabulated make_tabulated(std::vector<double> grid, std::vector<double> density) {
    const double mass = trapezoid(grid, density);
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw NumericalError("tabulated density has no mass");
    }
    Tabulated t;
    t.grid = std::move(grid);
    t.density = std::move(density);
    for (double& v : t.density) v /= mass;
    t.cdf.assign(t.grid.size(), 0.0);
    for (std::size_t k = 1; k < t.grid.size(); ++k) {
        t.cdf[k] = t.cdf[k - 1] + 0.5 * (t.grid[k] - t.grid[k - 1]) * (t.density[k] + t.density[k - 1]);
    }
    return t;
}

inline double table_density(const Tabulated& t, double z) {
    if (z < t.grid.front() || z > t.grid.back()) return 0.0;
    auto it = std::upper_bound(t.grid.begin(), t.grid.end(), z);
    if (it == t.grid.end()) return t.density.back();
    const std::size_t k = static_cast<std::size_t>(it - t.grid.begin());
    const double w = (z - t.grid[k - 1]) / (t.grid[k] - t.grid[k - 1]);
    return (1.0 - w) * t.density[k - 1] + w * t.density[k];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Law-level operations
// ---------------------------------------------------------------------------

inline bool is_atomic(const Law& law) {
    return std::holds_alternative<Dirac>(law) || std::holds_alternative<Discrete>(law);
}

/// Density of a continuous law; throws for atomic laws.
inline double density(const Law& law, double z) {
    struct Visitor {
        double z;
        double operator()(const Dirac&) const { throw PreconditionError("Dirac law has no density"); }
        double operator()(const Discrete&) const {
            throw PreconditionError("discrete law has no density");
        }
        double operator()(const Gaussian& g) const { return normal::pdf(z, g.mean, g.variance); }
        double operator()(const TruncatedGaussian& g) const {
            if (z < g.lower || z > g.upper) return 0.0;
            const double sd = std::sqrt(g.variance);
            const double log_z = normal::log_mass((g.lower - g.mean) / sd, (g.upper - g.mean) / sd);
            return std::exp(normal::log_pdf(z, g.mean, g.variance) - log_z);
        }
        double operator()(const Tabulated& t) const { return detail::table_density(t, z); }
    };
    return std::visit(Visitor{z}, law);
}

inline MeanVar mean_var(const Law& law) {
    struct Visitor {
        MeanVar operator()(const Dirac& d) const { return {d.point, 0.0}; }
        MeanVar operator()(const Discrete& d) const {
            double m = 0.0;
            for (std::size_t k = 0; k < d.points.size(); ++k) m += d.weights[k] * d.points[k];
            double v = 0.0;
            for (std::size_t k = 0; k < d.points.size(); ++k) {
                v += d.weights[k] * (d.points[k] - m) * (d.points[k] - m);
            }
            return {m, v};
        }
        MeanVar operator()(const Gaussian& g) const { return {g.mean, g.variance}; }
        MeanVar operator()(const TruncatedGaussian& g) const {
            const double sd = std::sqrt(g.variance);
            const auto m = normal::truncated_moments((g.lower - g.mean) / sd, (g.upper - g.mean) / sd);
            return {g.mean + sd * m.mean, g.variance * m.variance};
        }
        MeanVar operator()(const Tabulated& t) const {
            // Trapezoid sums: spectrally accurate for smooth densities that vanish at the ends.
            double mass = 0.0, first = 0.0;
            for (std::size_t k = 1; k < t.grid.size(); ++k) {
                const double h = 0.5 * (t.grid[k] - t.grid[k - 1]);
                mass += h * (t.density[k] + t.density[k - 1]);
                first += h * (t.grid[k] * t.density[k] + t.grid[k - 1] * t.density[k - 1]);
            }
            const double m = first / mass;
            double second = 0.0;
            for (std::size_t k = 1; k < t.grid.size(); ++k) {
                const double h = 0.5 * (t.grid[k] - t.grid[k - 1]);
                const double da = t.grid[k - 1] - m, db = t.grid[k] - m;
                second += h * (db * db * t.density[k] + da * da * t.density[k - 1]);
            }
            return {m, std::max(0.0, second / mass)};
        }
    };
    return std::visit(Visitor{}, law);
}

/// Quantile function; sampling draws quantile(law, U) with U uniform.
inline double quantile(const Law& law, double u) {
    struct Visitor {
        double u;
        double operator()(const Dirac& d) const { return d.point; }
        double operator()(const Discrete& d) const {
            const double total = d.cumulative.back();
            auto it = std::lower_bound(d.cumulative.begin(), d.cumulative.end(), u * total);
            if (it == d.cumulative.end()) --it;
            return d.points[static_cast<std::size_t>(it - d.cumulative.begin())];
        }
        double operator()(const Gaussian& g) const {
            return g.mean + std::sqrt(g.variance) * normal::quantile(u);
        }
        double operator()(const TruncatedGaussian& g) const {
            const double sd = std::sqrt(g.variance);
            return g.mean + sd * normal::truncated_quantile((g.lower - g.mean) / sd,
                                                            (g.upper - g.mean) / sd, u);
        }
        double operator()(const Tabulated& t) const {
            const double target = u * t.cdf.back();
            auto it = std::lower_bound(t.cdf.begin(), t.cdf.end(), target);
            if (it == t.cdf.begin()) return t.grid.front();
            if (it == t.cdf.end()) return t.grid.back();
            const std::size_t k = static_cast<std::size_t>(it - t.cdf.begin());
            const double span = t.cdf[k] - t.cdf[k - 1];
            const double w = span > 0.0 ? (target - t.cdf[k - 1]) / span : 0.0;
            return t.grid[k - 1] + w * (t.grid[k] - t.grid[k - 1]);
        }
    };
    return std::visit(Visitor{u}, law);
}

/// Interval outside of which the law has (numerically) no mass.
inline std::pair<double, double> effective_support(const Law& law) {
    struct Visitor {
        std::pair<double, double> operator()(const Dirac& d) const { return {d.point, d.point}; }
        std::pair<double, double> operator()(const Discrete& d) const {
            return {d.points.front(), d.points.back()};
        }
        std::pair<double, double> operator()(const Gaussian& g) const {
            const double r = 12.0 * std::sqrt(g.variance);
            return {g.mean - r, g.mean + r};
        }
        std::pair<double, double> operator()(const TruncatedGaussian& g) const {
            const double r = 12.0 * std::sqrt(g.variance);
            return {std::max(g.lower, g.mean - r), std::min(g.upper, g.mean + r)};
        }
        std::pair<double, double> operator()(const Tabulated& t) const {
            return {t.grid.front(), t.grid.back()};
        }
    };
    return std::visit(Visitor{}, law);
}

/// Law of shift + scale * Z for scale > 0.
inline Law affine_image(const Law& law, double shift, double scale) {
    struct Visitor {
        double c, d;
        Law operator()(const Dirac& x) const { return Dirac{c + d * x.point}; }
        Law operator()(const Discrete& x) const {
            Discrete out = x;
            for (double& p : out.points) p = c + d * p;
            return out;
        }
        Law operator()(const Gaussian& g) const { return Gaussian{c + d * g.mean, d * d * g.variance}; }
        Law operator()(const TruncatedGaussian& g) const {
            return TruncatedGaussian{c + d * g.mean, d * d * g.variance, c + d * g.lower,
                                     c + d * g.upper};
        }
        Law operator()(const Tabulated& t) const {
            Tabulated out = t;
            for (double& z : out.grid) z = c + d * z;
            for (double& f : out.density) f /= d;
            return out;
        }
    };
    return std::visit(Visitor{shift, scale}, law);
}

// ---------------------------------------------------------------------------
// Prior
// ---------------------------------------------------------------------------

class Prior {
public:
    static Prior dirac(double point, Frame frame = Frame::bridge) {
        if (!std::isfinite(point)) throw ConfigurationError("Dirac point must be finite");
        return Prior(Dirac{point}, frame);
    }

    static Prior discrete(std::vector<double> points, std::vector<double> weights,
                          Frame frame = Frame::bridge) {
        if (points.empty() || points.size() != weights.size()) {
            throw ConfigurationError("discrete prior needs matching non-empty points and weights");
        }
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw ConfigurationError("discrete prior weights must be nonnegative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw ConfigurationError("discrete prior weights must sum to 1");
        }
        return Prior(detail::make_discrete(std::move(points), std::move(weights)), frame);
    }

    static Prior gaussian(double mean, double variance, Frame frame = Frame::bridge) {
        if (!(variance > 0.0) || !std::isfinite(mean)) {
            throw ConfigurationError("Gaussian prior needs finite mean and positive variance");
        }
        return Prior(Gaussian{mean, variance}, frame);
    }

    static Prior truncated_gaussian(double mean, double variance, double lower, double upper,
                                    Frame frame = Frame::bridge) {
        if (!(variance > 0.0)) throw ConfigurationError("truncated Gaussian needs positive variance");
        if (!(lower < upper)) throw ConfigurationError("truncation bounds need lower < upper");
        return Prior(TruncatedGaussian{mean, variance, lower, upper}, frame);
    }

    static Prior tabulated(std::vector<double> grid, std::vector<double> density,
                           Frame frame = Frame::bridge) {
        if (grid.size() < 2 || grid.size() != density.size()) {
            throw ConfigurationError("tabulated prior needs at least two (z, density) pairs");
        }
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (k > 0 && !(grid[k] > grid[k - 1])) {
                throw ConfigurationError("tabulated prior grid must be strictly increasing");
            }
            if (!(density[k] >= 0.0) || !std::isfinite(density[k])) {
                throw ConfigurationError("tabulated prior density must be finite and nonnegative");
            }
        }
        const double mass = detail::trapezoid(grid, density);
        if (std::abs(mass - 1.0) > 1e-6) {
            throw ConfigurationError("tabulated prior must integrate to 1 (trapezoid), got " +
                                     std::to_string(mass));
        }
        return Prior(detail::make_tabulated(std::move(grid), std::move(density)), frame);
    }

    static Prior from_law(Law law, Frame frame) { return Prior(std::move(law), frame); }

    const Law& law() const { return law_; }
    Frame frame() const { return frame_; }

    std::string kind_name() const {
        static constexpr const char* names[] = {"dirac", "discrete", "gaussian", "truncated_gaussian",
                                                "tabulated"};
        return names[law_.index()];
    }

private:
    Prior(Law law, Frame frame) : law_(std::move(law)), frame_(frame) {}

    Law law_;
    Frame frame_;
};

/// Maps between the original frame (law of X_T) and the bridge frame (law of
/// Y_1) through X_T = a0(1) + a1(1) Y_1.
inline Prior convert_frame(const Prior& prior, const TimeChange& tc) {
    const double shift = tc.a0(1.0);
    const double scale = tc.a1(1.0);
    if (prior.frame() == Frame::original) {
        return Prior::from_law(affine_image(prior.law(), -shift / scale, 1.0 / scale), Frame::bridge);
    }
    return Prior::from_law(affine_image(prior.law(), shift, scale), Frame::original);
}

inline Prior to_frame(const Prior& prior, Frame frame, const TimeChange& tc) {
    return prior.frame() == frame ? prior : convert_frame(prior, tc);
}

// ---------------------------------------------------------------------------
// Gaussian product / ratio identity
// ---------------------------------------------------------------------------

struct NormalParams {
    double mean = 0.0;
    double variance = 1.0;
};

/// f1 f2 / f3 = scale * Normal(mean, variance) pointwise.
struct RatioProduct {
    double scale = 1.0;
    double log_scale = 0.0;
    double mean = 0.0;
    double variance = 1.0;
    double exponent_c = 0.0;
};

inline RatioProduct gaussian_ratio_product(NormalParams f1, NormalParams f2, NormalParams f3) {
    const double precision = 1.0 / f1.variance + 1.0 / f2.variance - 1.0 / f3.variance;
    if (!(precision > 0.0) || !(f1.variance > 0.0) || !(f2.variance > 0.0) ||
        !(f3.variance > 0.0)) {
        throw PreconditionError("gaussian_ratio_product needs 1/g1^2 + 1/g2^2 - 1/g3^2 > 0");
    }
    RatioProduct r;
    r.variance = 1.0 / precision;
    r.mean = r.variance *
             (f1.mean / f1.variance + f2.mean / f2.variance - f3.mean / f3.variance);
    r.exponent_c = 0.5 * f1.mean * f1.mean / f1.variance + 0.5 * f2.mean * f2.mean / f2.variance -
                   0.5 * f3.mean * f3.mean / f3.variance - 0.5 * r.mean * r.mean / r.variance;
    r.log_scale = 0.5 * (std::log(f3.variance) - std::log(f1.variance) - std::log(f2.variance) +
                         std::log(r.variance)) -
                  r.exponent_c;
    r.scale = std::exp(r.log_scale);
    return r;
}

// ---------------------------------------------------------------------------
// Posterior
// ---------------------------------------------------------------------------

/// Law of the pinning point given Y_s = y, with log psi(s, y).
struct Posterior {
    Law law;
    double s = 0.0;
    double y = 0.0;
    double log_psi = 0.0;
};

namespace detail {

inline double log_kernel_ratio(double z, double s, double y, double y0) {
    return normal::log_pdf(z, y, 1.0 - s) - normal::log_pdf(z, y0, 1.0);
}

inline void check_posterior_args(const Prior& prior, double s) {
    if (prior.frame() != Frame::bridge) {
        throw PreconditionError("posterior updates need a bridge-frame prior");
    }
    if (!(s >= 0.0 && s < 1.0)) throw PreconditionError("posterior needs s in [0, 1)");
}

inline Posterior tabulated_posterior(const Tabulated& t, double s, double y, double y0) {
    const double sigma = std::sqrt(1.0 - s);
    std::vector<double> grid = t.grid;
    const double lo = std::max(y - 8.0 * sigma, t.grid.front());
    const double hi = std::min(y + 8.0 * sigma, t.grid.back());
    if (lo < hi) {
        // Refine where the table is coarse relative to the bridge kernel width.
        const double target = sigma / 16.0;
        auto first = std::lower_bound(t.grid.begin(), t.grid.end(), lo);
        double widest = 0.0;
        for (auto it = first == t.grid.begin() ? first : first - 1; it + 1 != t.grid.end() && *it <= hi;
             ++it) {
            widest = std::max(widest, *(it + 1) - *it);
        }
        if (widest > target) {
            const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / target)) + 1;
            for (double z : quad::linspace(lo, hi, n)) grid.push_back(z);
            std::sort(grid.begin(), grid.end());
            grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        }
    }
    std::vector<double> logw(grid.size());
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double f = grid.size() == t.grid.size() ? t.density[k] : table_density(t, grid[k]);
        logw[k] = f > 0.0 ? std::log(f) + log_kernel_ratio(grid[k], s, y, y0)
                          : -std::numeric_limits<double>::infinity();
        peak = std::max(peak, logw[k]);
    }
    if (!std::isfinite(peak)) throw NumericalError("posterior weights vanish everywhere");
    std::vector<double> w(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) w[k] = std::exp(logw[k] - peak);
    const double mass = trapezoid(grid, w);
    if (!(mass > 0.0)) throw NumericalError("posterior weights vanish everywhere");
    Posterior post{make_tabulated(std::move(grid), std::move(w)), s, y, peak + std::log(mass)};
    return post;
}

}  // namespace detail

/// Posterior of a bridge-frame prior given Y_s = y, for Y started at y0.
inline Posterior posterior(const Prior& prior, double s, double y, double y0) {
    detail::check_posterior_args(prior, s);
    if (s == 0.0 && y == y0) return {prior.law(), s, y, 0.0};
    struct Visitor {
        double s, y, y0;
        Posterior operator()(const Dirac& d) const {
            return {d, s, y, detail::log_kernel_ratio(d.point, s, y, y0)};
        }
        Posterior operator()(const Discrete& d) const {
            std::vector<double> logw(d.points.size());
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < d.points.size(); ++k) {
                logw[k] = d.weights[k] > 0.0
                              ? std::log(d.weights[k]) + detail::log_kernel_ratio(d.points[k], s, y, y0)
                              : -std::numeric_limits<double>::infinity();
                peak = std::max(peak, logw[k]);
            }
            if (!std::isfinite(peak)) throw NumericalError("posterior weights vanish everywhere");
            std::vector<double> w(logw.size());
            double total = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) total += (w[k] = std::exp(logw[k] - peak));
            for (double& v : w) v /= total;
            return {detail::make_discrete(d.points, std::move(w)), s, y, peak + std::log(total)};
        }
        Posterior operator()(const Gaussian& g) const {
            const auto r = gaussian_ratio_product({y, 1.0 - s}, {g.mean, g.variance}, {y0, 1.0});
            return {Gaussian{r.mean, r.variance}, s, y, r.log_scale};
        }
        Posterior operator()(const TruncatedGaussian& g) const {
            const auto r = gaussian_ratio_product({y, 1.0 - s}, {g.mean, g.variance}, {y0, 1.0});
            const double sd_post = std::sqrt(r.variance);
            const double sd_prior = std::sqrt(g.variance);
            const double log_post_mass =
                normal::log_mass((g.lower - r.mean) / sd_post, (g.upper - r.mean) / sd_post);
            const double log_prior_mass =
                normal::log_mass((g.lower - g.mean) / sd_prior, (g.upper - g.mean) / sd_prior);
            if (!std::isfinite(log_post_mass)) {
                throw NumericalError("posterior mass vanishes on the truncation interval");
            }
            return {TruncatedGaussian{r.mean, r.variance, g.lower, g.upper}, s, y,
                    r.log_scale + log_post_mass - log_prior_mass};
        }
        Posterior operator()(const Tabulated& t) const { return detail::tabulated_posterior(t, s, y, y0); }
    };
    Posterior post = std::visit(Visitor{s, y, y0}, prior.law());
    if (std::isnan(post.log_psi) || post.log_psi == -std::numeric_limits<double>::infinity()) {
        throw NumericalError("psi underflows: state is effectively impossible under the prior");
    }
    return post;
}

inline double log_psi(const Prior& prior, double s, double y, double y0) {
    return posterior(prior, s, y, y0).log_psi;
}

/// Radon-Nikodym density of the conditioned law with respect to Brownian motion.
inline double psi(const Prior& prior, double s, double y, double y0) {
    const double v = std::exp(log_psi(prior, s, y, y0));
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw NumericalError("psi is not representable in double precision at this state");
    }
    return v;
}

inline MeanVar posterior_mean_var(const Posterior& post) { return mean_var(post.law); }

/// Information drift (E[Z_{s,y}] - y) / (1 - s).
inline double drift(const Prior& prior, double s, double y, double y0) {
    if (!(s < 1.0)) throw PreconditionError("drift is undefined at s >= 1");
    return (posterior_mean_var(posterior(prior, s, y, y0)).mean - y) / (1.0 - s);
}

inline std::vector<double> sample_posterior(const Posterior& post, std::size_t count,
                                            RandomStream& rng) {
    std::vector<double> out(count);
    for (auto& z : out) z = quantile(post.law, rng.uniform());
    return out;
}

// ---------------------------------------------------------------------------
// Likelihood-ratio order
// ---------------------------------------------------------------------------

namespace detail {

inline double atom_mass(const Law& law, double z) {
    if (const auto* d = std::get_if<Dirac>(&law)) return d->point == z ? 1.0 : 0.0;
    const auto& disc = std::get<Discrete>(law);
    double m = 0.0;
    for (std::size_t k = 0; k < disc.points.size(); ++k) {
        if (disc.points[k] == z) m += disc.weights[k];
    }
    return m;
}

/// Pairwise test nu1(z) nu2(z') >= nu1(z') nu2(z) for all z <= z' in `points`,
/// with f1, f2 given as log values.
inline bool pairwise_lr(std::span<const double> log1, std::span<const double> log2) {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    const std::size_t n = log1.size();
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            const double lhs = log1[a] + log2[b];
            const double rhs = log1[b] + log2[a];
            if (rhs == neg_inf) continue;
            if (lhs == neg_inf) return false;
            if (rhs - lhs > 1e-12) return false;
        }
    }
    return true;
}

}  // namespace detail

/// True iff p1 <=lr p2, i.e. the density ratio p2/p1 is non-decreasing.
///
/// Continuous pairs are tested pairwise on a 2048-point grid spanning both
/// supports; atomic pairs on the union of atoms. A point mass against a
/// continuous law is ordered exactly when the supports are separated.
inline bool lr_order_leq(const Prior& p1, const Prior& p2) {
    if (p1.frame() != p2.frame()) throw PreconditionError("priors must share a coordinate frame");
    const Law& l1 = p1.law();
    const Law& l2 = p2.law();
    const bool a1 = is_atomic(l1);
    const bool a2 = is_atomic(l2);
    if (a1 && a2) {
        auto atoms = [](const Law& l) {
            if (const auto* d = std::get_if<Dirac>(&l)) return std::vector<double>{d->point};
            return std::get<Discrete>(l).points;
        };
        std::vector<double> pts = atoms(l1);
        for (double z : atoms(l2)) pts.push_back(z);
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        std::vector<double> f1, f2;
        for (double z : pts) {
            f1.push_back(std::log(detail::atom_mass(l1, z)));
            f2.push_back(std::log(detail::atom_mass(l2, z)));
        }
        return detail::pairwise_lr(f1, f2);
    }
    const auto s1 = effective_support(l1);
    const auto s2 = effective_support(l2);
    if (a1 != a2) {
        // Ordered only when p1 lies entirely at or below p2.
        return s1.second <= s2.first;
    }
    const double lo = std::min(s1.first, s2.first);
    const double hi = std::max(s1.second, s2.second);
    const auto grid = quad::linspace(lo, hi, 2048);
    std::vector<double> f1(grid.size()), f2(grid.size());
    bool overlap = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double d1 = density(l1, grid[k]);
        const double d2 = density(l2, grid[k]);
        f1[k] = std::log(d1);
        f2[k] = std::log(d2);
        overlap = overlap || (d1 > 0.0 && d2 > 0.0);
    }
    if (!overlap) {
        throw IndeterminateError("densities have disjoint supports; their ratio is undefined");
    }
    return detail::pairwise_lr(f1, f2);
}

// ---------------------------------------------------------------------------
// Single-boundary criterion
// ---------------------------------------------------------------------------

enum class VarianceSign { all_nonpositive, all_nonnegative, mixed };

inline const char* variance_sign_name(VarianceSign s) {
    switch (s) {
        case VarianceSign::all_nonpositive: return "all_nonpositive";
        case VarianceSign::all_nonnegative: return "all_nonnegative";
        case VarianceSign::mixed: return "mixed";
    }
    return "";
}

/// Sign of Var[Z_{s,y}] - (1 - s) on a grid, plus sup Var per time slice.
struct SingleBoundaryReport {
    VarianceSign sign = VarianceSign::all_nonpositive;
    double max_excess = 0.0;   // max of Var - (1 - s)
    double max_deficit = 0.0;  // max of (1 - s) - Var
    double worst_violation = 0.0;
    std::size_t violations = 0;  // cells with Var > 1 - s
    std::vector<double> sup_variance;
};

inline SingleBoundaryReport single_boundary_condition(const Prior& prior, double y0,
                                                      std::span<const double> s_grid,
                                                      std::span<const double> y_grid) {
    constexpr double tie = 1e-12;
    SingleBoundaryReport r;
    r.max_excess = -std::numeric_limits<double>::infinity();
    r.max_deficit = -std::numeric_limits<double>::infinity();
    for (double s : s_grid) {
        double sup_var = 0.0;
        for (double y : y_grid) {
            const double var = posterior_mean_var(posterior(prior, s, y, y0)).variance;
            const double diff = var - (1.0 - s);
            sup_var = std::max(sup_var, var);
            r.max_excess = std::max(r.max_excess, diff);
            r.max_deficit = std::max(r.max_deficit, -diff);
            if (diff > tie) ++r.violations;
        }
        r.sup_variance.push_back(sup_var);
    }
    if (r.max_excess <= tie) {
        r.sign = VarianceSign::all_nonpositive;
    } else if (r.max_deficit <= tie) {
        r.sign = VarianceSign::all_nonnegative;
    } else {
        r.sign = VarianceSign::mixed;
    }
    r.worst_violation = std::max(0.0, std::min(r.max_excess, r.max_deficit));
    return r;
}

// ---------------------------------------------------------------------------
// Wasserstein-1 distance
// ---------------------------------------------------------------------------

/// W1 by quantile coupling: integral over (0, 1) of |Q1(u) - Q2(u)|.
inline double wasserstein_1d(const Law& a, const Law& b) {
    std::vector<double> cuts{0.0, 1.0};
    auto add_cuts = [&cuts](const Law& l) {
        if (const auto* d = std::get_if<Discrete>(&l)) {
            for (double c : d->cumulative) cuts.push_back(c / d->cumulative.back());
        }
    };
    add_cuts(a);
    add_cuts(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double total = 0.0;
    for (std::size_t k = 1; k < cuts.size(); ++k) {
        const double lo = cuts[k - 1], hi = cuts[k];
        if (!(hi > lo)) continue;
        if (is_atomic(a) && is_atomic(b)) {
            const double mid = 0.5 * (lo + hi);
            total += (hi - lo) * std::abs(quantile(a, mid) - quantile(b, mid));
        } else {
            total += quad::integrate(
                [&](double u) {
                    // The end levels carry no mass and may map to infinite quantiles.
                    if (!(u > 0.0 && u < 1.0)) return 0.0;
                    return std::abs(quantile(a, u) - quantile(b, u));
                },
                lo, hi, 1e-9);
        }
    }
    return total;
}

/// Largest ratio W1(nu_{s,y_k}, nu_{s,y_{k+1}}) / |y_{k+1} - y_k| over consecutive grid points.
inline double fitted_w1_lipschitz(const Prior& prior, double y0, double s,
                                  std::span<const double> y_grid) {
    double worst = 0.0;
    for (std::size_t k = 1; k < y_grid.size(); ++k) {
        const auto p1 = posterior(prior, s, y_grid[k - 1], y0);
        const auto p2 = posterior(prior, s, y_grid[k], y0);
        worst = std::max(worst, wasserstein_1d(p1.law, p2.law) / std::abs(y_grid[k] - y_grid[k - 1]));
    }
    return worst;
}

}  // namespace rgmb
