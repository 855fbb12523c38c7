#pragma once

// Exact Gaussian laws of the Gauss-Markov process
//   dX_t = (alpha(t) + beta(t) X_t) dt + zeta(t) dB_t,  X_0 = x0,  t in [0, T].

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "curve.hpp"
#include "errors.hpp"
#include "quadrature.hpp"

namespace rgmb {

struct GmpModel {
    CoefficientCurve alpha = CoefficientCurve::constant(0.0);
    CoefficientCurve beta = CoefficientCurve::constant(0.0);
    CoefficientCurve zeta = CoefficientCurve::constant(1.0);
    double horizon = 1.0;
    double x0 = 0.0;

    /// Throws ConfigurationError unless the curves cover [0, T], evaluate
    /// finitely, and zeta stays strictly positive (checked on a dense grid
    /// plus every tabulation node).
    void validate() const {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw ConfigurationError("horizon T must be a positive finite number");
        }
        if (!std::isfinite(x0)) throw ConfigurationError("x0 must be finite");
        const std::pair<const CoefficientCurve*, const char*> curves[] = {
            {&alpha, "alpha"}, {&beta, "beta"}, {&zeta, "zeta"}};
        for (auto [curve, name] : curves) {
            if (curve->domain_lo() > 0.0 || curve->domain_hi() < horizon) {
                throw ConfigurationError(std::string(name) + " curve does not cover [0, T]");
            }
            std::vector<double> probes = quad::linspace(0.0, horizon, 4097);
            for (double t : curve->table_times()) {
                if (t >= 0.0 && t <= horizon) probes.push_back(t);
            }
            for (double t : probes) {
                const double v = (*curve)(t);
                if (!std::isfinite(v)) {
                    throw ConfigurationError(std::string(name) + " is not finite at t=" +
                                             std::to_string(t));
                }
                if (curve == &zeta && !(v > 0.0)) {
                    throw ConfigurationError("zeta must be strictly positive; zeta(" +
                                             std::to_string(t) + ") = " + std::to_string(v));
                }
            }
        }
    }
};

/// Gaussian law given by mean and variance.
struct GmLaw {
    double mean = 0.0;
    double variance = 0.0;

    double sd() const { return std::sqrt(variance); }
};

/// Affine form of a pinned one-step law:
/// mean = offset + x_coef * x + z_coef * z, variance independent of x and z.
struct StepCoefficients {
    double offset = 0.0;
    double x_coef = 1.0;
    double z_coef = 0.0;
    double variance = 0.0;

    GmLaw law(double x, double z) const { return {offset + x_coef * x + z_coef * z, variance}; }
};

namespace detail {

inline double clamp_variance(double v, double scale) {
    if (v >= 0.0) return v;
    if (v > -1e-12 * std::max(1.0, scale)) return 0.0;
    throw NumericalError("computed variance is negative: " + std::to_string(v));
}

}  // namespace detail

/// Immutable evaluator of mean, variance, covariance factors and pinned
/// transition laws. The integrated slope log phi(0, t) is cached at nodes;
/// every other integral is evaluated adaptively with relative tolerance 1e-10.
class GmpKernel {
public:
    explicit GmpKernel(GmpModel model, std::size_t nodes = 1025) : model_(std::move(model)) {
        model_.validate();
        const CoefficientCurve beta = model_.beta;
        log_phi_ = quad::Antiderivative([beta](double u) { return beta(u); },
                                        quad::linspace(0.0, model_.horizon, nodes));
    }

    const GmpModel& model() const { return model_; }
    double horizon() const { return model_.horizon; }

    /// log phi(0, t) = integral of beta over [0, t].
    double log_phi0(double t) const { return log_phi_(t); }

    /// phi(t, tp) = exp(integral of beta over [t, tp]).
    double phi(double t, double tp) const {
        check_order(t, tp);
        if (t == tp) return 1.0;
        return std::exp(log_phi_(tp) - log_phi_(t));
    }

    /// E[X_tp | X_t = x].
    double mean(double t, double x, double tp) const {
        check_order(t, tp);
        if (t == tp) return x;
        const double lp = log_phi_(tp);
        const auto& alpha = model_.alpha;
        const double drift = quad::integrate(
            [&](double u) { return alpha(u) * std::exp(lp - log_phi_(u)); }, t, tp);
        return std::exp(lp - log_phi_(t)) * x + drift;
    }

    /// Var[X_tp | X_t = x].
    double variance(double t, double tp) const {
        check_order(t, tp);
        if (t == tp) return 0.0;
        const double lp = log_phi_(tp);
        const auto& zeta = model_.zeta;
        const double v = quad::integrate(
            [&](double u) {
                const double z = zeta(u);
                return z * z * std::exp(2.0 * (lp - log_phi_(u)));
            },
            t, tp);
        return detail::clamp_variance(v, 1.0);
    }

    /// (r1(t), r2(t)) with Cov[X_t, X_t'] = r1(min) r2(max).
    std::pair<double, double> cov_factors(double t) const {
        check_order(0.0, t);
        if (t == 0.0) return {0.0, 1.0};
        const double r2 = phi(0.0, t);
        return {variance(0.0, t) / r2, r2};
    }

    /// Affine coefficients of the law of X_tp given X_t = x and X_T = z.
    StepCoefficients step_coefficients(double t, double tp) const {
        const double T = model_.horizon;
        if (tp > T) throw PreconditionError("bridge step beyond the horizon");
        check_order(t, tp);
        if (t == tp) throw DegenerateIntervalError("bridge step needs t < tp");
        if (tp == T) return {0.0, 0.0, 1.0, 0.0};
        const double v_step = variance(t, tp);
        const double v_total = variance(t, T);
        const double cov = v_step * phi(tp, T);
        const double w = cov / v_total;
        const double phi_step = phi(t, tp);
        const double phi_total = phi(t, T);
        const double mu_step = mean(t, 0.0, tp);
        const double mu_total = mean(t, 0.0, T);
        StepCoefficients c;
        c.offset = mu_step - w * mu_total;
        c.x_coef = phi_step - w * phi_total;
        c.z_coef = w;
        c.variance = detail::clamp_variance(v_step - cov * w, v_step);
        return c;
    }

    /// Law of X_tp given X_t = x and X_T = z.
    GmLaw bridge_step_law(double t, double x, double tp, double z) const {
        return step_coefficients(t, tp).law(x, z);
    }

private:
    void check_order(double t, double tp) const {
        if (!(t >= 0.0 && t <= tp && tp <= model_.horizon)) {
            throw PreconditionError("times must satisfy 0 <= t <= tp <= T");
        }
    }

    GmpModel model_;
    quad::Antiderivative log_phi_;
};

}  // namespace rgmb
