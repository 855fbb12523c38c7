#pragma once

// Standard normal special functions with tail-stable variants.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace rgmb::normal {

inline constexpr double inv_sqrt_2pi = 0.39894228040143267794;
inline constexpr double log_sqrt_2pi = 0.91893853320467274178;

inline double pdf(double x) { return inv_sqrt_2pi * std::exp(-0.5 * x * x); }

inline double log_pdf(double z, double mean, double variance) {
    const double d = z - mean;
    return -0.5 * d * d / variance - 0.5 * std::log(variance) - log_sqrt_2pi;
}

inline double pdf(double z, double mean, double variance) {
    return std::exp(log_pdf(z, mean, variance));
}

inline double cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - cdf(x), accurate for large positive x.
inline double survival(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// exp(x^2) erfc(x) for x >= 0.
inline double erfcx(double x) {
    if (x < 25.0) return std::exp(x * x) * std::erfc(x);
    const double r = 1.0 / (x * x);
    return (1.0 - 0.5 * r * (1.0 - 1.5 * r * (1.0 - 2.5 * r * (1.0 - 3.5 * r)))) /
           (x * std::sqrt(std::numbers::pi));
}

/// log(1 - cdf(x)) without underflow in the upper tail.
inline double log_survival(double x) {
    if (x == std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
    if (x < 5.0) return std::log(survival(x));
    return std::log(0.5 * erfcx(x / std::numbers::sqrt2)) - 0.5 * x * x;
}

/// Mills ratio survival(x) / pdf(x) for x >= 0.
inline double mills_ratio(double x) {
    return std::sqrt(std::numbers::pi / 2.0) * erfcx(x / std::numbers::sqrt2);
}

/// Inverse of cdf on the open interval (0, 1).
inline double quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Solves log_survival(x) = log_q for x.
inline double inverse_log_survival(double log_q) {
    if (log_q > -700.0) {
        const double q = std::exp(log_q);
        if (q >= 1.0) return -std::numeric_limits<double>::infinity();
        return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
    }
    double x = std::sqrt(-2.0 * log_q);
    for (int it = 0; it < 50; ++it) {
        // d/dx log_survival = -1 / mills_ratio
        const double step = (log_survival(x) - log_q) * mills_ratio(x);
        x += step;
        if (std::abs(step) < 1e-14 * x) break;
    }
    return x;
}

/// log(cdf(b) - cdf(a)) for a < b.
inline double log_mass(double a, double b) {
    if (a >= 0.0) {
        const double la = log_survival(a);
        const double lb = log_survival(b);
        return la + std::log1p(-std::exp(lb - la));
    }
    if (b <= 0.0) return log_mass(-b, -a);
    return std::log(cdf(b) - cdf(a));
}

/// Quantile of the standard normal restricted to [a, b] at level u in (0, 1).
inline double truncated_quantile(double a, double b, double u) {
    if (a >= 0.0) {
        const double la = log_survival(a);
        const double lb = log_survival(b);
        const double target = la + std::log1p(-u * -std::expm1(lb - la));
        return std::clamp(inverse_log_survival(target), a, b);
    }
    if (b <= 0.0) return -truncated_quantile(-b, -a, 1.0 - u);
    const double pa = cdf(a);
    const double pb = cdf(b);
    const double lower_mass = pa + u * (pb - pa);
    if (lower_mass <= 0.5) return std::clamp(quantile(lower_mass), a, b);
    // Upper half from the survival side, which keeps precision as u -> 1.
    const double upper_mass = survival(b) + (1.0 - u) * (pb - pa);
    return std::clamp(-quantile(upper_mass), a, b);
}

/// Mean and variance of the standard normal restricted to [a, b].
struct Moments {
    double mean;
    double variance;
};

inline Moments truncated_moments(double a, double b) {
    if (b <= 0.0 && a < 0.0) {
        const Moments m = truncated_moments(-b, -a);
        return {-m.mean, m.variance};
    }
    double lambda_a = 0.0;
    double lambda_b = 0.0;
    if (a >= 0.0) {
        // pdf(a) / Z with Z = survival(a) - survival(b)
        const double lsa = log_survival(a);
        const double lsb = log_survival(b);
        const double tail_ratio = -std::expm1(lsb - lsa);
        lambda_a = 1.0 / (mills_ratio(a) * tail_ratio);
        lambda_b = std::isinf(b) ? 0.0 : lambda_a * std::exp(-0.5 * (b - a) * (b + a));
    } else {
        const double z = cdf(b) - cdf(a);
        lambda_a = std::isinf(a) ? 0.0 : pdf(a) / z;
        lambda_b = std::isinf(b) ? 0.0 : pdf(b) / z;
    }
    const double mean = lambda_a - lambda_b;
    const double ta = std::isinf(a) ? 0.0 : a * lambda_a;
    const double tb = std::isinf(b) ? 0.0 : b * lambda_b;
    const double variance = std::max(0.0, 1.0 + ta - tb - mean * mean);
    return {mean, variance};
}

}  // namespace rgmb::normal
