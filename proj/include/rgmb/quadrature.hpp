#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace rgmb::quad {

inline constexpr double default_rel_tol = 1e-10;
inline constexpr std::size_t default_max_panels = 4096;

struct Panel {
    double a, b, value, error, l1;
    bool operator<(const Panel& other) const { return error < other.error; }
};

/// One 15-point Kronrod panel. The rule runs on [0, 1] with abscissae
/// a + (b - a) x; handing [a, b] to Boost directly inflates the error estimate
/// on short panels far from the origin.
template <class F>
Panel kronrod_panel(F& f, double a, double b) {
    double error = 0.0;
    double l1 = 0.0;
    const double w = b - a;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [&](double x) { return f(a + w * x); }, 0.0, 1.0, 0, 0.0, &error, &l1);
    return {a, b, w * value, std::abs(w) * error, std::abs(w) * l1};
}

/// Globally adaptive 15-point Gauss-Kronrod integral of f over [a, b].
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate drops below rel_tol * max(|I|, 1e-3 * L1) or the panel limit is
/// hit. The L1 floor keeps integrals that cancel to ~0 from refining forever.
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = default_rel_tol,
                 std::size_t max_panels = default_max_panels) {
    if (a == b) return 0.0;
    std::priority_queue<Panel> heap;
    Panel first = kronrod_panel(f, a, b);
    double value = first.value;
    double error = first.error;
    double l1 = first.l1;
    heap.push(first);
    while (error > rel_tol * std::max(std::abs(value), 1e-3 * l1) && heap.size() < max_panels) {
        const Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {
            heap.push(worst);
            break;
        }
        const Panel left = kronrod_panel(f, worst.a, mid);
        const Panel right = kronrod_panel(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
    }
    // Resum to drop the drift accumulated by incremental updates.
    double total = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        heap.pop();
    }
    return total;
}

/// Single-panel 15-point Kronrod rule; exact for polynomials up to degree 22.
template <class F>
double kronrod15(F&& f, double a, double b) {
    if (a == b) return 0.0;
    return kronrod_panel(f, a, b).value;
}

/// Antiderivative F(x) = integral of f from nodes.front() to x.
///
/// Values at the nodes come from adaptive quadrature on each node interval;
/// off-node values add one Kronrod panel from the nearest node at or below x.
class Antiderivative {
public:
    Antiderivative() = default;

    Antiderivative(std::function<double(double)> f, std::vector<double> nodes,
                   double rel_tol = default_rel_tol)
        : f_(std::move(f)), nodes_(std::move(nodes)), values_(nodes_.size(), 0.0) {
        for (std::size_t k = 1; k < nodes_.size(); ++k) {
            values_[k] = values_[k - 1] + integrate(f_, nodes_[k - 1], nodes_[k], rel_tol);
        }
    }

    double operator()(double x) const {
        const std::size_t k = node_below(x);
        if (x == nodes_[k]) return values_[k];
        return values_[k] + kronrod15(f_, nodes_[k], x);
    }

    std::span<const double> nodes() const { return nodes_; }
    std::span<const double> values() const { return values_; }

private:
    std::size_t node_below(double x) const {
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
        if (it == nodes_.begin()) return 0;
        return std::min<std::size_t>(static_cast<std::size_t>(it - nodes_.begin()) - 1,
                                     nodes_.size() - 1);
    }

    std::function<double(double)> f_;
    std::vector<double> nodes_;
    std::vector<double> values_;
};

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        out[k] = a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    out.back() = b;
    return out;
}

}  // namespace rgmb::quad
