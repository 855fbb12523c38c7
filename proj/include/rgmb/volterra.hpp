#pragma once

// Free-boundary integral equations for Gaussian and Dirac priors, solved by
// damped Picard iteration in gain coordinates.
//
// The gain process solves dG = rate(s)(level(s) - G) ds + a1(s) dW. Its
// stopping boundary b satisfies
//   b(s) = E[G_1 | G_s = b(s)]
//          - int_s^1 rate(u) E[(level(u) - G_u) 1(G_u >= b(u)) | G_s = b(s)] du.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "errors.hpp"
#include "gmp_kernel.hpp"
#include "normal.hpp"
#include "priors.hpp"
#include "quadrature.hpp"
#include "timechange.hpp"

namespace rgmb {

enum class VolterraCase { gaussian_prior, dirac_prior };

inline const char* volterra_case_name(VolterraCase c) {
    return c == VolterraCase::gaussian_prior ? "gaussian_prior" : "dirac_prior";
}

struct OuGain {
    VolterraCase kind = VolterraCase::dirac_prior;
    std::function<double(double)> rate;        // mean-reversion speed
    std::function<double(double)> level;       // mean-reversion level
    std::function<double(double)> vol;         // a1
    std::function<double(double)> log_factor;  // integral of rate over [0, u]
    double terminal_value = 0.0;
    bool singular_at_one = false;
};

namespace detail {

inline void check_nonincreasing_a1(const TimeChange& tc) {
    for (double s : quad::linspace(0.0, 1.0, 1001)) {
        const double d = tc.a1_prime(s);
        if (d > 1e-12 * std::max(1.0, tc.a1(s))) {
            throw ConfigurationError("Gaussian reduction needs a1'(s) <= 0; violated at s=" +
                                     std::to_string(s));
        }
    }
}

}  // namespace detail

/// Gain dynamics under a Gaussian prior N(theta, gamma^2) on the bridge
/// terminal value. Needs gamma^2 < 1 and a non-increasing a1.
inline OuGain build_gaussian_gain(const TimeChange& tc, const Prior& prior) {
    const Prior p = to_frame(prior, Frame::bridge, tc);
    const auto* g = std::get_if<Gaussian>(&p.law());
    if (!g) throw ConfigurationError("Gaussian reduction needs a Gaussian prior");
    if (!(g->variance < 1.0)) {
        throw ConfigurationError("Gaussian reduction needs gamma^2 < 1 (bridge frame), got " +
                                 std::to_string(g->variance));
    }
    detail::check_nonincreasing_a1(tc);
    const double k = 1.0 / g->variance - 1.0;
    const double c0 = g->mean / g->variance - tc.y0();
    const double a1_start = tc.a1(0.0);
    const TimeChange* t = &tc;
    auto a = [k, c0](double s) { return c0 / (1.0 + k * (1.0 - s)); };
    auto b = [k](double s) { return -k / (1.0 + k * (1.0 - s)); };
    auto big_b = [t, b](double s) {
        const auto c = t->coefficients(s);
        return c.a1_prime / c.a1 + b(s);
    };
    for (double s : quad::linspace(0.0, 1.0, 1001)) {
        if (!(big_b(s) < 0.0)) {
            throw ConfigurationError("Gaussian reduction needs B(s) < 0; violated at s=" +
                                     std::to_string(s));
        }
    }
    OuGain out;
    out.kind = VolterraCase::gaussian_prior;
    out.rate = [big_b](double s) { return -big_b(s); };
    out.level = [t, a, b](double s) {
        const auto c = t->coefficients(s);
        const double bb = c.a1_prime / c.a1 + b(s);
        return -(c.a0_prime - bb * c.a0 + c.a1 * a(s)) / bb;
    };
    out.vol = [t](double s) { return t->a1(s); };
    out.log_factor = [t, k, a1_start](double u) {
        return -std::log(t->a1(u) / a1_start) - std::log((1.0 + k * (1.0 - u)) / (1.0 + k));
    };
    out.terminal_value = out.level(1.0);
    out.singular_at_one = false;
    return out;
}

/// Gain dynamics of the bridge pinned at `zstar` (bridge frame).
inline OuGain build_dirac_gain(const TimeChange& tc, double zstar) {
    const TimeChange* t = &tc;
    const double a1_start = tc.a1(0.0);
    OuGain out;
    out.kind = VolterraCase::dirac_prior;
    out.rate = [t](double s) {
        if (s >= 1.0) return std::numeric_limits<double>::infinity();
        const auto c = t->coefficients(s);
        return 1.0 / (1.0 - s) - c.a1_prime / c.a1;
    };
    out.level = [t, zstar](double s) {
        const auto c = t->coefficients(s);
        const double ratio = c.a1_prime / c.a1;
        const double num = (c.a0_prime - ratio * c.a0) * (1.0 - s) + c.a1 * zstar + c.a0;
        return num / (1.0 - (1.0 - s) * ratio);
    };
    out.vol = [t](double s) { return t->a1(s); };
    out.log_factor = [t, a1_start](double u) {
        if (u >= 1.0) return std::numeric_limits<double>::infinity();
        return -std::log1p(-u) - std::log(t->a1(u) / a1_start);
    };
    out.terminal_value = tc.a0(1.0) + tc.a1(1.0) * zstar;
    out.singular_at_one = true;
    return out;
}

inline OuGain build_dirac_gain(const TimeChange& tc, const Prior& prior) {
    const Prior p = to_frame(prior, Frame::bridge, tc);
    const auto* d = std::get_if<Dirac>(&p.law());
    if (!d) throw ConfigurationError("Dirac reduction needs a Dirac prior");
    return build_dirac_gain(tc, d->point);
}

/// Law of G_u given G_s = g.
inline GmLaw ou_marginal(const OuGain& gain, double s, double g, double u) {
    if (!(s >= 0.0 && s <= u && u <= 1.0)) throw PreconditionError("ou_marginal needs 0 <= s <= u <= 1");
    if (gain.singular_at_one && u >= 1.0) {
        throw PreconditionError("ou_marginal is singular at u = 1 for this gain");
    }
    if (u == s) return {g, 0.0};
    const double lu = gain.log_factor(u);
    const double ls = gain.log_factor(s);
    const double drift = quad::integrate(
        [&](double r) { return gain.rate(r) * gain.level(r) * std::exp(gain.log_factor(r) - lu); }, s, u);
    const double var = quad::integrate(
        [&](double r) {
            const double v = gain.vol(r);
            return v * v * std::exp(2.0 * (gain.log_factor(r) - lu));
        },
        s, u);
    return {std::exp(ls - lu) * g + drift, detail::clamp_variance(var, 1.0)};
}

/// E[(c - G) 1(G >= b)] for G ~ law.
inline double truncated_expectation(const GmLaw& law, double c, double b) {
    if (!(law.variance >= 0.0)) throw PreconditionError("variance must be nonnegative");
    const double mu = law.mean;
    if (law.variance == 0.0) return mu >= b ? c - mu : 0.0;
    const double sd = std::sqrt(law.variance);
    const double d = (b - mu) / sd;
    if (d == std::numeric_limits<double>::infinity()) return 0.0;
    if (d == -std::numeric_limits<double>::infinity()) return c - mu;
    return (c - mu) * normal::survival(d) - sd * normal::pdf(d);
}

// ---------------------------------------------------------------------------
// Picard iteration
// ---------------------------------------------------------------------------

struct PicardOptions {
    double tol = 1e-6;
    std::size_t max_iter = 500;
    double damping = 0.7;
};

struct BoundarySolution {
    VolterraCase kind = VolterraCase::dirac_prior;
    std::vector<double> s_grid;    // ends at 1
    std::vector<double> b_values;  // gain coordinates
    std::size_t iterations = 0;
    double residual = 0.0;
    std::vector<double> residual_log;
};

/// Uniform on [0, uniform_end], then 1 - (1 - uniform_end) ratio^j until the
/// gap to 1 drops below min_gap, then the point 1. The default ratio makes the
/// first geometric step equal to the uniform one.
inline std::vector<double> volterra_grid(double uniform_end = 0.9, std::size_t uniform_points = 181,
                                         double ratio = 0.95, double min_gap = 1e-7) {
    if (!(uniform_end > 0.0 && uniform_end < 1.0) || uniform_points < 2 || !(ratio > 0.0 && ratio < 1.0)) {
        throw PreconditionError("invalid Volterra grid parameters");
    }
    std::vector<double> s = quad::linspace(0.0, uniform_end, uniform_points);
    for (double gap = (1.0 - uniform_end) * ratio; gap >= min_gap; gap *= ratio) s.push_back(1.0 - gap);
    s.push_back(1.0);
    return s;
}

namespace detail {

/// Exact transition moments of the gain on a fixed grid through prefix
/// integrals of rate * level * e^L and vol^2 e^{2L}.
class GainTable {
public:
    // Near u = 1 the integrands are evaluated at points whose distance to 1
    // carries only a few significant digits, so 1e-10 is out of reach there.
    static constexpr double table_tol = 1e-9;
    static constexpr std::size_t table_panels = 256;

    GainTable(const OuGain& gain, const std::vector<double>& s) : s_(s) {
        const std::size_t n = s.size();
        const std::size_t last = gain.singular_at_one ? n - 1 : n;
        rate_.assign(n, 0.0);
        level_.assign(n, 0.0);
        log_factor_.assign(n, std::numeric_limits<double>::infinity());
        p_.assign(n, 0.0);
        q_.assign(n, 0.0);
        vol_.assign(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            level_[j] = gain.level(s[j]);
            vol_[j] = gain.vol(s[j]);
        }
        for (std::size_t j = 0; j < last; ++j) {
            rate_[j] = gain.rate(s[j]);
            log_factor_[j] = gain.log_factor(s[j]);
        }
        for (std::size_t j = 1; j < last; ++j) {
            p_[j] = p_[j - 1] + quad::integrate(
                                    [&](double r) {
                                        return gain.rate(r) * gain.level(r) * std::exp(gain.log_factor(r));
                                    },
                                    s[j - 1], s[j], table_tol, table_panels);
            q_[j] = q_[j - 1] + quad::integrate(
                                    [&](double r) {
                                        const double v = gain.vol(r);
                                        return v * v * std::exp(2.0 * gain.log_factor(r));
                                    },
                                    s[j - 1], s[j], table_tol, table_panels);
        }
    }

    GmLaw law(std::size_t i, double g, std::size_t j) const {
        if (i == j) return {g, 0.0};
        const double decay = std::exp(log_factor_[i] - log_factor_[j]);
        const double scale = std::exp(-log_factor_[j]);
        const double var = scale * scale * (q_[j] - q_[i]);
        return {decay * g + scale * (p_[j] - p_[i]), std::max(0.0, var)};
    }

    double rate(std::size_t j) const { return rate_[j]; }
    double vol(std::size_t j) const { return vol_[j]; }
    double level(std::size_t j) const { return level_[j]; }

private:
    std::vector<double> s_;
    std::vector<double> rate_, level_, vol_, log_factor_, p_, q_;
};

}  // namespace detail

namespace detail {

inline std::vector<double> checked_grid(std::vector<double> s_grid) {
    if (s_grid.empty() || s_grid.back() != 1.0) s_grid.push_back(1.0);
    if (s_grid.size() < 3 || s_grid.front() < 0.0) throw PreconditionError("Volterra grid too short");
    for (std::size_t k = 1; k < s_grid.size(); ++k) {
        if (!(s_grid[k] > s_grid[k - 1])) throw PreconditionError("Volterra grid must be increasing");
    }
    return s_grid;
}

/// Right-hand side of the discretized equation at grid index i < n. The time
/// integral uses the trapezoid rule in w = sqrt(1 - u), which absorbs the
/// 1/sqrt(1 - u) behaviour of the integrand near the pinning time.
class RhsEvaluator {
public:
    RhsEvaluator(const OuGain& gain, const std::vector<double>& s_grid)
        : gain_(gain), table_(gain, s_grid), n_(s_grid.size() - 1), s_(s_grid), w_(n_ + 1), f_(n_ + 1) {
        for (std::size_t j = 0; j <= n_; ++j) w_[j] = std::sqrt(1.0 - s_grid[j]);
        sqrt_trapezoid_error_.assign(n_ + 1, 0.0);
        for (std::size_t i = 0; i + 2 < n_; ++i) {
            double err = 0.0, prev = 0.0;
            for (std::size_t j = i; j + 1 < n_; ++j) {
                const double x = s_grid[j + 1] - s_grid[i];
                const double r = std::sqrt(x);
                const double x_prev = s_grid[j] - s_grid[i];
                err += 2.0 / 3.0 * (x * r - x_prev * prev) - 0.5 * (x - x_prev) * (prev + r);
                prev = r;
            }
            sqrt_trapezoid_error_[i] = err;
        }
    }

    std::size_t last() const { return n_; }

    double operator()(std::size_t i, const std::vector<double>& b) {
        const std::size_t n = n_;
        const auto& w = w_;
        auto& f = f_;
        const double bi = b[i];
        // Diagonal: P(G_u >= b(u)) -> 1/2 as u decreases to s.
        f[i] = 0.5 * table_.rate(i) * (table_.level(i) - bi);
        for (std::size_t j = i + 1; j < n; ++j) {
            f[j] = table_.rate(j) * truncated_expectation(table_.law(i, bi, j), table_.level(j), b[j]);
        }
        double integral = 0.0;
        for (std::size_t j = i; j + 1 < n; ++j) {
            integral += (w[j] - w[j + 1]) * (w[j] * f[j] + w[j + 1] * f[j + 1]);
        }
        if (i + 2 < n) {
            // f(u) = f(s) + A sqrt(u - s) + O(u - s) near u = s. The trapezoid
            // error of the square-root term is summed panel by panel; A follows
            // from the local Gaussian law of G_u - b(u).
            const double vol = table_.vol(i);
            const double rate = table_.rate(i);
            const double slope = (b[i + 2] - bi) / (s_[i + 2] - s_[i]);
            const double a = rate * normal::inv_sqrt_2pi *
                             ((table_.level(i) - bi) * (rate * (table_.level(i) - bi) - slope) / vol - vol);
            integral += a * sqrt_trapezoid_error_[i];
        }
        double expected_end = gain_.terminal_value;
        if (gain_.singular_at_one) {
            // On [s_{n-1}, 1] the gain is locally a bridge pinned at the terminal
            // value with b - b(1) ~ sqrt(1 - u). With x = w / w_{n-1} the
            // integrand is smooth on [0, 1].
            const double z = gain_.terminal_value;
            const double wl = w[n - 1];
            const GmLaw from = table_.law(i, bi, n - 1);
            const double dm = from.mean - z;
            const double sw = table_.vol(n - 1) * wl;
            const double k = b[n - 1] - z;
            integral += boost::math::quadrature::gauss<double, 20>::integrate(
                [&](double x) {
                    const double spread = std::sqrt(x * x * from.variance + sw * sw * (1.0 - x * x));
                    if (spread == 0.0) return dm * x >= k ? -2.0 * dm * x : 0.0;
                    const double d = (k - dm * x) / spread;
                    return 2.0 * (-dm * x * normal::survival(d) - spread * normal::pdf(d));
                },
                0.0, 1.0);
        } else {
            const GmLaw end = table_.law(i, bi, n);
            expected_end = end.mean;
            f[n] = table_.rate(n) * truncated_expectation(end, table_.level(n), b[n]);
            integral += (w[n - 1] - w[n]) * (w[n - 1] * f[n - 1] + w[n] * f[n]);
        }
        return expected_end - integral;
    }

private:
    const OuGain& gain_;
    GainTable table_;
    std::size_t n_;
    std::vector<double> s_, w_, f_, sqrt_trapezoid_error_;
};

}  // namespace detail

namespace detail {

/// Nodes below this index carry an equation. With a singular gain the last two
/// equations are degenerate and those nodes follow b - b(1) ~ sqrt(1 - s).
inline std::size_t solved_nodes(const OuGain& gain, std::size_t n) {
    return gain.singular_at_one && n > 3 ? n - 2 : n;
}

inline void fill_tail(const OuGain& gain, const std::vector<double>& s, std::vector<double>& b,
                      std::size_t solved) {
    if (!gain.singular_at_one || solved == 0) return;
    const std::size_t k = solved - 1;
    const double wk = std::sqrt(1.0 - s[k]);
    for (std::size_t q = solved; q + 1 < s.size(); ++q) {
        b[q] = gain.terminal_value + (b[k] - gain.terminal_value) * std::sqrt(1.0 - s[q]) / wk;
    }
}

}  // namespace detail

/// Solves the boundary equation on `s_grid` (1 is appended when missing),
/// starting from the constant terminal anchor.
///
/// Each sweep visits the grid backward from s = 1 and moves b(s_i) by
/// damping * (RHS - b) / (1 - dRHS/db(s_i)), with RHS evaluated on the values
/// already updated in the sweep; the equation at s only involves b on [s, 1].
/// The residual of a sweep is the largest |RHS - b| it met.
inline BoundarySolution picard_solve(const OuGain& gain, std::vector<double> s_grid,
                                     const PicardOptions& options = {}) {
    if (!(options.tol > 0.0) || !(options.damping > 0.0 && options.damping <= 1.0) ||
        options.max_iter == 0) {
        throw PreconditionError("Picard options need tol > 0, damping in (0, 1], max_iter >= 1");
    }
    s_grid = detail::checked_grid(std::move(s_grid));
    detail::RhsEvaluator rhs(gain, s_grid);
    const std::size_t n = rhs.last();

    BoundarySolution sol;
    sol.kind = gain.kind;
    sol.s_grid = s_grid;
    sol.b_values.assign(n + 1, gain.terminal_value);
    const std::size_t solved = detail::solved_nodes(gain, n);
    for (std::size_t iter = 1; iter <= options.max_iter; ++iter) {
        double defect = 0.0;
        for (std::size_t i = solved; i-- > 0;) {
            double& bi = sol.b_values[i];
            // The tail nodes hang off the last solved node.
            auto gap_at = [&](double value) {
                bi = value;
                if (i + 1 == solved) detail::fill_tail(gain, sol.s_grid, sol.b_values, solved);
                return rhs(i, sol.b_values) - bi;
            };
            const double saved = bi;
            const double gap = gap_at(saved);
            defect = std::max(defect, std::abs(gap));
            // Newton scaling of the fixed-point step by 1 / (1 - dRHS/db_i).
            const double h = 1e-7 * std::max(1.0, std::abs(saved));
            const double slope = -(gap_at(saved + h) - gap) / h;
            const double scale = std::abs(slope) > 1e-7 ? 1.0 / slope : 1.0;
            bi = saved + options.damping * scale * gap;
            if (i + 1 == solved) detail::fill_tail(gain, sol.s_grid, sol.b_values, solved);
        }
        sol.residual_log.push_back(defect);
        sol.residual = defect;
        sol.iterations = iter;
        if (!std::isfinite(defect)) throw ConvergenceError("Picard iteration diverged", defect);
        if (defect < options.tol) return sol;
    }
    throw ConvergenceError("Picard iteration did not converge in " + std::to_string(options.max_iter) +
                               " iterations",
                           sol.residual);
}

/// Sup-norm distance between b and the right-hand side evaluated at b.
inline double fixed_point_defect(const OuGain& gain, const BoundarySolution& sol) {
    detail::RhsEvaluator rhs(gain, sol.s_grid);
    double defect = 0.0;
    for (std::size_t i = 0; i < detail::solved_nodes(gain, rhs.last()); ++i) {
        defect = std::max(defect, std::abs(rhs(i, sol.b_values) - sol.b_values[i]));
    }
    return defect;
}

struct BoundaryRow {
    double s, t, b_gain, b_y, b_x;
};

/// Boundary in every coordinate system: gain, bridge (y) and original (x = gain).
inline std::vector<BoundaryRow> boundary_rows(const TimeChange& tc, const BoundarySolution& sol) {
    std::vector<BoundaryRow> rows;
    for (std::size_t k = 0; k < sol.s_grid.size(); ++k) {
        const double s = sol.s_grid[k];
        const double b = sol.b_values[k];
        rows.push_back({s, tc.t_of_s(s), b, (b - tc.a0(s)) / tc.a1(s), b});
    }
    return rows;
}

/// Linear interpolation of the boundary at s.
inline double boundary_at(const BoundarySolution& sol, double s) {
    const auto& g = sol.s_grid;
    if (s <= g.front()) return sol.b_values.front();
    if (s >= g.back()) return sol.b_values.back();
    const auto k = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), s) - g.begin());
    const double w = (s - g[k - 1]) / (g[k] - g[k - 1]);
    return (1.0 - w) * sol.b_values[k - 1] + w * sol.b_values[k];
}

}  // namespace rgmb
