#pragma once

// Time-dependent coefficient curves for the drift slope, drift level and
// volatility of a Gauss-Markov process.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

// Boost 1.74's pchip calls isnan unqualified.
using std::isnan;
#include <boost/math/special_functions/fpclassify.hpp>  // pchip.hpp needs isnan declared first
#include <boost/math/interpolators/pchip.hpp>

#include "errors.hpp"

namespace rgmb {

enum class CurveKind { constant, sine, tanh_step, polynomial_smile, tabulated };

class CoefficientCurve {
public:
    /// c
    static CoefficientCurve constant(double c) { return {CurveKind::constant, {c}}; }

    /// amplitude * sin(frequency * pi * t)
    static CoefficientCurve sine(double amplitude, double frequency) {
        return {CurveKind::sine, {amplitude, frequency}};
    }

    /// base + half_jump * (1 + tanh(steepness * (t - center)))
    static CoefficientCurve tanh_step(double base, double half_jump, double steepness,
                                      double center) {
        return {CurveKind::tanh_step, {base, half_jump, steepness, center}};
    }

    /// floor + (scale * (t - center))^power, power a non-negative integer
    static CoefficientCurve polynomial_smile(double floor, double scale, double center,
                                             double power) {
        if (power < 0 || std::floor(power) != power) {
            throw PreconditionError("polynomial_smile power must be a non-negative integer");
        }
        return {CurveKind::polynomial_smile, {floor, scale, center, power}};
    }

    /// Monotone cubic (PCHIP) interpolation of (times, values); linear when
    /// fewer than four nodes. `source` is kept for descriptors only.
    static CoefficientCurve tabulated(std::vector<double> times, std::vector<double> values,
                                      std::string source = {}) {
        if (times.size() != values.size() || times.size() < 2) {
            throw PreconditionError("tabulated curve needs at least two (time, value) pairs");
        }
        for (std::size_t k = 1; k < times.size(); ++k) {
            if (!(times[k] > times[k - 1])) {
                throw PreconditionError("tabulated curve times must be strictly increasing");
            }
        }
        for (double v : values) {
            if (!std::isfinite(v)) throw PreconditionError("tabulated curve value is not finite");
        }
        CoefficientCurve curve{CurveKind::tabulated, {}};
        curve.source_ = std::move(source);
        curve.domain_lo_ = times.front();
        curve.domain_hi_ = times.back();
        curve.times_ = times;
        curve.values_ = values;
        if (times.size() >= 4) {
            curve.pchip_ = std::make_shared<Pchip>(std::move(times), std::move(values));
        }
        return curve;
    }

    double operator()(double t) const {
        const auto& p = params_;
        switch (kind_) {
            case CurveKind::constant: return p[0];
            case CurveKind::sine: return p[0] * std::sin(p[1] * std::numbers::pi * t);
            case CurveKind::tanh_step: return p[0] + p[1] * (1.0 + std::tanh(p[2] * (t - p[3])));
            case CurveKind::polynomial_smile: {
                const double base = p[1] * (t - p[2]);
                double acc = 1.0;
                for (int k = 0; k < static_cast<int>(p[3]); ++k) acc *= base;
                return p[0] + acc;
            }
            case CurveKind::tabulated: return eval_table(t);
        }
        return 0.0;
    }

    CurveKind kind() const { return kind_; }
    const std::vector<double>& parameters() const { return params_; }
    const std::vector<double>& table_times() const { return times_; }

    /// Closed interval on which the curve is defined; unbounded for analytic kinds.
    double domain_lo() const { return domain_lo_; }
    double domain_hi() const { return domain_hi_; }

    /// Descriptor in the configuration-file syntax, e.g. "sine(2, 10)".
    std::string describe() const {
        std::ostringstream out;
        out.precision(17);
        switch (kind_) {
            case CurveKind::constant: out << "constant("; break;
            case CurveKind::sine: out << "sine("; break;
            case CurveKind::tanh_step: out << "tanh_step("; break;
            case CurveKind::polynomial_smile: out << "polynomial_smile("; break;
            case CurveKind::tabulated: return "tabulated(" + source_ + ")";
        }
        for (std::size_t k = 0; k < params_.size(); ++k) out << (k ? ", " : "") << params_[k];
        out << ")";
        return out.str();
    }

private:
    using Pchip = boost::math::interpolators::pchip<std::vector<double>>;

    CoefficientCurve(CurveKind kind, std::vector<double> params)
        : kind_(kind), params_(std::move(params)) {}

    double eval_table(double t) const {
        if (t <= times_.front()) return values_.front();
        if (t >= times_.back()) return values_.back();
        if (pchip_) return (*pchip_)(t);
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const std::size_t k = static_cast<std::size_t>(it - times_.begin());
        const double w = (t - times_[k - 1]) / (times_[k] - times_[k - 1]);
        return (1.0 - w) * values_[k - 1] + w * values_[k];
    }

    CurveKind kind_;
    std::vector<double> params_;
    double domain_lo_ = -std::numeric_limits<double>::infinity();
    double domain_hi_ = std::numeric_limits<double>::infinity();
    std::vector<double> times_;
    std::vector<double> values_;
    std::shared_ptr<const Pchip> pchip_;
    std::string source_;
};

}  // namespace rgmb
