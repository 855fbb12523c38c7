#pragma once

// Reduction of a Gauss-Markov process to a Brownian motion on unit time:
//   X_t = G(s, Y_s),  G(s, y) = a0(s) + a1(s) y,  s = h(t) / Tbar,
// where h(t) = r1(t) / r2(t) and Tbar = h(T).

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <boost/math/special_functions/fpclassify.hpp>  // pchip.hpp needs isnan declared first
#include <boost/math/interpolators/pchip.hpp>

#include "errors.hpp"
#include "gmp_kernel.hpp"
#include "quadrature.hpp"

namespace rgmb {

struct BridgePoint {
    double s;
    double y;
};

struct OriginalPoint {
    double t;
    double x;
};

class TimeChange {
public:
    static constexpr std::size_t default_resolution = 4096;

    /// Tabulates h on `resolution` points; doubles the resolution until the
    /// round trip t -> s -> t is below 1e-10 at every mid-node.
    static TimeChange build(const GmpModel& model, std::size_t resolution = default_resolution) {
        if (resolution < 2) throw PreconditionError("time-change resolution must be >= 2");
        auto kernel = std::make_shared<const GmpKernel>(model);
        for (std::size_t r = resolution;; r *= 2) {
            TimeChange tc(kernel, r);
            if (tc.max_round_trip_error() < 1e-10 || r >= (std::size_t{1} << 20)) return tc;
        }
    }

    const GmpKernel& kernel() const { return *kernel_; }
    const GmpModel& model() const { return kernel_->model(); }
    double horizon() const { return kernel_->horizon(); }
    double Tbar() const { return tbar_; }
    std::size_t resolution() const { return times_.size(); }

    /// h(t) = integral over [0, t] of zeta^2 / phi(0, u)^2.
    double h(double t) const { return h_(t); }

    /// h'(t)
    double h_rate(double t) const {
        const double z = model().zeta(t);
        return z * z * std::exp(-2.0 * kernel_->log_phi0(t));
    }

    double s_of_t(double t) const {
        check_time(t);
        if (t == horizon()) return 1.0;
        return h(t) / tbar_;
    }

    /// Inverse of s_of_t: monotone interpolation plus one Newton refinement.
    double t_of_s(double s) const {
        if (!(s >= 0.0 && s <= 1.0)) throw PreconditionError("s must lie in [0, 1]");
        if (s == 0.0) return 0.0;
        if (s == 1.0) return horizon();
        double t = (*inverse_)(s);
        t = std::clamp(t, 0.0, horizon());
        const double target = s * tbar_;
        for (int k = 0; k < 2; ++k) {
            const double rate = h_rate(t);
            if (!(rate > 0.0)) break;
            t = std::clamp(t - (h(t) - target) / rate, 0.0, horizon());
        }
        return t;
    }

    /// m(t) = E[X_t | X_0 = 0].
    double m(double t) const {
        check_time(t);
        if (t == 0.0) return 0.0;
        return std::exp(kernel_->log_phi0(t)) * drift_integral_(t);
    }

    struct Coefficients {
        double t, a0, a1, a0_prime, a1_prime;
    };

    /// a0, a1 and their s-derivatives from one inversion of s(t). The
    /// derivatives use m'(t) = alpha + beta m, phi' = beta phi and
    /// ds/dt = h'(t) / Tbar.
    Coefficients coefficients(double s) const {
        Coefficients c;
        c.t = t_of_s(s);
        const auto& mod = model();
        const double phi = std::exp(kernel_->log_phi0(c.t));
        c.a0 = c.t == 0.0 ? 0.0 : phi * drift_integral_(c.t);
        c.a1 = phi * std::sqrt(tbar_);
        const double dt_ds = tbar_ / h_rate(c.t);
        const double beta = mod.beta(c.t);
        c.a0_prime = (mod.alpha(c.t) + beta * c.a0) * dt_ds;
        c.a1_prime = c.a1 * beta * dt_ds;
        return c;
    }

    double a0(double s) const { return m(t_of_s(s)); }

    double a1(double s) const { return std::exp(kernel_->log_phi0(t_of_s(s))) * std::sqrt(tbar_); }

    double a0_prime(double s) const { return coefficients(s).a0_prime; }

    double a1_prime(double s) const { return coefficients(s).a1_prime; }

    double gain(double s, double y) const { return a0(s) + a1(s) * y; }

    BridgePoint to_bridge_coords(double t, double x) const {
        check_time(t);
        const double scale = std::exp(kernel_->log_phi0(t)) * std::sqrt(tbar_);
        return {s_of_t(t), (x - m(t)) / scale};
    }

    OriginalPoint from_bridge_coords(double s, double y) const {
        const double t = t_of_s(s);
        const double scale = std::exp(kernel_->log_phi0(t)) * std::sqrt(tbar_);
        return {t, m(t) + scale * y};
    }

    /// Starting point of the bridge-frame Brownian motion, x0 / sqrt(Tbar).
    double y0() const { return to_bridge_coords(0.0, model().x0).y; }

    std::span<const double> table_times() const { return times_; }
    std::span<const double> table_s() const { return s_values_; }

    double max_round_trip_error() const {
        double worst = 0.0;
        for (std::size_t k = 0; k + 1 < times_.size(); ++k) {
            for (double t : {times_[k], 0.5 * (times_[k] + times_[k + 1])}) {
                worst = std::max(worst, std::abs(t_of_s(s_of_t(t)) - t));
            }
        }
        return worst;
    }

private:
    using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

    TimeChange(std::shared_ptr<const GmpKernel> kernel, std::size_t resolution)
        : kernel_(std::move(kernel)) {
        const GmpKernel* k = kernel_.get();
        const GmpModel& mod = k->model();
        times_ = quad::linspace(0.0, mod.horizon, std::max<std::size_t>(resolution, 4));
        h_ = quad::Antiderivative(
            [k](double u) {
                const double z = k->model().zeta(u);
                return z * z * std::exp(-2.0 * k->log_phi0(u));
            },
            times_);
        drift_integral_ = quad::Antiderivative(
            [k](double u) { return k->model().alpha(u) * std::exp(-k->log_phi0(u)); }, times_);
        tbar_ = h_.values().back();
        s_values_.resize(times_.size());
        for (std::size_t i = 0; i < times_.size(); ++i) s_values_[i] = h_.values()[i] / tbar_;
        s_values_.back() = 1.0;
        for (std::size_t i = 1; i < s_values_.size(); ++i) {
            if (!(s_values_[i] > s_values_[i - 1])) {
                throw ConfigurationError("tabulated time change h(t) is not strictly increasing");
            }
        }
        inverse_ = std::make_shared<const Pchip>(std::vector<double>(s_values_), std::vector<double>(times_));
    }

    void check_time(double t) const {
        if (!(t >= 0.0 && t <= horizon())) throw PreconditionError("t must lie in [0, T]");
    }

    std::shared_ptr<const GmpKernel> kernel_;
    std::vector<double> times_;
    std::vector<double> s_values_;
    quad::Antiderivative h_;
    quad::Antiderivative drift_integral_;
    double tbar_ = 1.0;
    std::shared_ptr<const Pchip> inverse_;
};

/// Suprema of |a0|, |a0'|, a1 and |a1'| over [0, 1] on a uniform grid.
struct CoefficientBounds {
    double a0_sup = 0.0;
    double a0_prime_sup = 0.0;
    double a1_sup = 0.0;
    double a1_prime_sup = 0.0;
};

inline CoefficientBounds coefficient_bounds(const TimeChange& tc, std::size_t points = 10001) {
    CoefficientBounds b;
    for (double s : quad::linspace(0.0, 1.0, std::max<std::size_t>(points, 2))) {
        b.a0_sup = std::max(b.a0_sup, std::abs(tc.a0(s)));
        b.a0_prime_sup = std::max(b.a0_prime_sup, std::abs(tc.a0_prime(s)));
        b.a1_sup = std::max(b.a1_sup, tc.a1(s));
        b.a1_prime_sup = std::max(b.a1_prime_sup, std::abs(tc.a1_prime(s)));
    }
    return b;
}

}  // namespace rgmb
