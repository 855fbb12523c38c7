#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rgmb/priors.hpp"
#include "rgmb/timechange.hpp"

using namespace rgmb;

namespace {

double npdf(double z, double m, double v) {
    return std::exp(-0.5 * (z - m) * (z - m) / v) / std::sqrt(2 * std::numbers::pi * v);
}

template <class F>
double simpson(F f, double a, double b, int n = 40000) {
    const double h = (b - a) / n;
    double sum = f(a) + f(b);
    for (int k = 1; k < n; ++k) sum += f(a + k * h) * (k % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

Prior tabulated_normal(double mean, double var, double lo = -12.0, double hi = 12.0, int n = 4801) {
    std::vector<double> z, d;
    for (int k = 0; k < n; ++k) {
        z.push_back(lo + (hi - lo) * k / (n - 1));
        d.push_back(npdf(z.back(), mean, var));
    }
    const double mass = detail::trapezoid(z, d);
    for (double& v : d) v /= mass;
    return Prior::tabulated(z, d);
}

Prior two_point() { return Prior::discrete({-1.0, 1.0}, {0.5, 0.5}); }

}  // namespace

// ---------------------------------------------------------------------------

TEST(RatioProduct, AllStandard) {
    const auto r = gaussian_ratio_product({0, 1}, {0, 1}, {0, 1});
    EXPECT_NEAR(r.scale, 1.0, 1e-15);
    EXPECT_NEAR(r.mean, 0.0, 1e-15);
    EXPECT_NEAR(r.variance, 1.0, 1e-15);
}

TEST(RatioProduct, WiderDenominator) {
    const auto r = gaussian_ratio_product({0, 1}, {0, 1}, {0, 2});
    EXPECT_NEAR(r.variance, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(r.mean, 0.0, 1e-15);
    EXPECT_NEAR(r.exponent_c, 0.0, 1e-15);
    EXPECT_NEAR(r.scale, 2.0 / std::sqrt(3.0), 1e-14);
    for (int k = 0; k < 100; ++k) {
        const double z = -5.0 + 0.1 * k;
        const double lhs = npdf(z, 0, 1) * npdf(z, 0, 1) / npdf(z, 0, 2);
        EXPECT_NEAR(lhs, r.scale * npdf(z, r.mean, r.variance), 1e-10);
    }
}

TEST(RatioProduct, RandomTriplesPointwise) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> mean(-2, 2), var(0.2, 3);
    int checked = 0;
    while (checked < 20) {
        const NormalParams f1{mean(rng), var(rng)}, f2{mean(rng), var(rng)}, f3{mean(rng), var(rng)};
        if (!(f1.variance < f3.variance)) continue;
        if (!(1 / f1.variance + 1 / f2.variance - 1 / f3.variance > 0)) continue;
        const auto r = gaussian_ratio_product(f1, f2, f3);
        for (int k = 0; k < 50; ++k) {
            const double z = -4.0 + 8.0 * k / 49.0;
            const double lhs = npdf(z, f1.mean, f1.variance) * npdf(z, f2.mean, f2.variance) /
                               npdf(z, f3.mean, f3.variance);
            EXPECT_NEAR(lhs, r.scale * npdf(z, r.mean, r.variance), 1e-9 * lhs);
        }
        ++checked;
    }
}

TEST(RatioProduct, RejectsNonPositivePrecision) {
    EXPECT_THROW(gaussian_ratio_product({0, 2}, {0, 2}, {0, 0.5}), PreconditionError);
}

// ---------------------------------------------------------------------------

TEST(Frames, BrownianIsIdentity) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const Prior p = convert_frame(Prior::gaussian(0.3, 0.5, Frame::original), tc);
    EXPECT_EQ(p.frame(), Frame::bridge);
    EXPECT_NEAR(std::get<Gaussian>(p.law()).mean, 0.3, 1e-12);
    EXPECT_NEAR(std::get<Gaussian>(p.law()).variance, 0.5, 1e-12);
}

TEST(Frames, LongHorizonDirac) {
    GmpModel m;
    m.horizon = 4.0;
    const TimeChange tc = TimeChange::build(m);
    const Prior p = convert_frame(Prior::dirac(1.0, Frame::original), tc);
    EXPECT_NEAR(std::get<Dirac>(p.law()).point, 0.5, 1e-12);
    const Prior back = convert_frame(p, tc);
    EXPECT_NEAR(std::get<Dirac>(back.law()).point, 1.0, 1e-12);
}

TEST(Frames, TruncatedGaussianStaysNormalized) {
    GmpModel m;
    m.beta = CoefficientCurve::constant(-1.0);
    m.alpha = CoefficientCurve::constant(0.7);
    const TimeChange tc = TimeChange::build(m);
    const Prior p = convert_frame(Prior::truncated_gaussian(0.0, 0.3, 0.0, 2.0, Frame::original), tc);
    const auto& g = std::get<TruncatedGaussian>(p.law());
    const double mass = simpson([&](double z) { return density(p.law(), z); }, g.lower, g.upper);
    EXPECT_NEAR(mass, 1.0, 1e-8);
}

// ---------------------------------------------------------------------------

TEST(Psi, OneAtStart) {
    const double y0 = 0.2;
    for (const Prior& p : {Prior::dirac(0.4), two_point(), Prior::gaussian(0.1, 0.5),
                           Prior::truncated_gaussian(0.0, 0.5, 0.0, INFINITY), tabulated_normal(0.0, 0.7)}) {
        EXPECT_NEAR(psi(p, 0.0, y0, y0), 1.0, 1e-8) << p.kind_name();
    }
}

TEST(Psi, DiracPointEvaluation) {
    const double s = 0.4, y = 0.3, y0 = -0.1, z = 0.8;
    EXPECT_NEAR(psi(Prior::dirac(z), s, y, y0), npdf(z, y, 1 - s) / npdf(z, y0, 1), 1e-12);
}

TEST(Psi, GaussianAgainstQuadrature) {
    const Prior p = Prior::gaussian(0.3, 0.5);
    for (auto [s, y] : {std::pair{0.2, 0.1}, {0.6, -1.0}, {0.9, 1.5}}) {
        const double ref = simpson(
            [&](double z) { return npdf(z, y, 1 - s) / npdf(z, 0.0, 1.0) * npdf(z, 0.3, 0.5); }, -15, 15);
        EXPECT_NEAR(psi(p, s, y, 0.0), ref, 1e-9 * ref);
    }
}

TEST(Psi, ImpossibleStateIsAnError) {
    const Prior p = Prior::truncated_gaussian(0.0, 0.01, 0.0, 0.1);
    EXPECT_THROW(psi(p, 0.999999, -300.0, 0.0), NumericalError);
}

// ---------------------------------------------------------------------------

TEST(Posterior, UnchangedAtStart) {
    const Prior p = Prior::gaussian(0.4, 0.6);
    const auto post = posterior(p, 0.0, 0.0, 0.0);
    EXPECT_EQ(std::get<Gaussian>(post.law).mean, 0.4);
    EXPECT_EQ(std::get<Gaussian>(post.law).variance, 0.6);
}

TEST(Posterior, GaussianClosedForm) {
    const double theta = 0.3, g2 = 0.5, x0 = 0.2;
    const Prior p = Prior::gaussian(theta, g2);
    for (double s : {0.0, 0.3, 0.8}) {
        for (double y : {-1.0, 0.2, 1.7}) {
            const double gs2 = 1.0 / (1.0 / (1 - s) + 1.0 / g2 - 1.0);
            const double ts = gs2 * (y / (1 - s) + theta / g2 - x0);
            const auto mv = posterior_mean_var(posterior(p, s, y, x0));
            EXPECT_NEAR(mv.mean, ts, 1e-12);
            EXPECT_NEAR(mv.variance, gs2, 1e-12);
        }
    }
}

TEST(Posterior, TwoPointWeights) {
    const Prior p = two_point();
    for (auto [s, y] : {std::pair{0.2, 0.3}, {0.7, -0.4}, {0.95, 0.05}}) {
        const auto post = posterior(p, s, y, 0.0);
        const auto& d = std::get<Discrete>(post.law);
        const double a = 0.5 * npdf(-1, y, 1 - s) / npdf(-1, 0, 1);
        const double b = 0.5 * npdf(1, y, 1 - s) / npdf(1, 0, 1);
        EXPECT_NEAR(d.weights[0], a / (a + b), 1e-12);
        EXPECT_NEAR(d.weights[1], b / (a + b), 1e-12);
        EXPECT_NEAR(d.weights[0] + d.weights[1], 1.0, 1e-12);
    }
}

TEST(Posterior, TabulatedNormalMatchesClosedForm) {
    const auto mv = posterior_mean_var(posterior(tabulated_normal(0.0, 1.0), 0.5, 0.0, 0.0));
    EXPECT_NEAR(mv.mean, 0.0, 1e-6);
    EXPECT_NEAR(mv.variance, 0.5, 1e-6);
}

TEST(Posterior, GaussianAgreesWithTabulation) {
    const Prior exact = Prior::gaussian(0.3, 0.5);
    const Prior table = tabulated_normal(0.3, 0.5);
    for (double s : {0.1, 0.5, 0.9, 0.99}) {
        for (double y : {-1.5, 0.0, 0.8}) {
            const auto a = posterior_mean_var(posterior(exact, s, y, 0.1));
            const auto b = posterior_mean_var(posterior(table, s, y, 0.1));
            EXPECT_NEAR(a.mean, b.mean, 1e-6);
            EXPECT_NEAR(a.variance, b.variance, 1e-6);
        }
    }
}

TEST(Posterior, TabulatedIsNormalized) {
    const Prior table = tabulated_normal(0.0, 0.4, -3.0, 3.0, 61);
    for (double s : {0.2, 0.9, 0.999}) {
        const auto post = posterior(table, s, 0.4, 0.0);
        const auto& t = std::get<Tabulated>(post.law);
        EXPECT_NEAR(detail::trapezoid(t.grid, t.density), 1.0, 1e-8);
    }
}

TEST(Posterior, DiracMoments) {
    const auto mv = posterior_mean_var(posterior(Prior::dirac(0.7), 0.5, 0.1, 0.0));
    EXPECT_EQ(mv.mean, 0.7);
    EXPECT_EQ(mv.variance, 0.0);
}

TEST(Posterior, RequiresBridgeFrameAndOpenInterval) {
    EXPECT_THROW(posterior(Prior::gaussian(0, 0.5, Frame::original), 0.5, 0, 0), PreconditionError);
    EXPECT_THROW(posterior(Prior::gaussian(0, 0.5), 1.0, 0, 0), PreconditionError);
}

// ---------------------------------------------------------------------------

TEST(Drift, DiracIsBridgeDrift) {
    EXPECT_NEAR(drift(Prior::dirac(0.5), 0.2, -0.3, 0.0), (0.5 + 0.3) / 0.8, 1e-12);
    EXPECT_EQ(drift(Prior::dirac(0.5), 0.6, 0.5, 0.0), 0.0);
    EXPECT_THROW(drift(Prior::dirac(0.5), 1.0, 0.0, 0.0), PreconditionError);
}

TEST(Drift, GaussianIsAffine) {
    const double theta = -0.2, g2 = 0.5, x0 = 0.3;
    const Prior p = Prior::gaussian(theta, g2);
    for (double s : {0.0, 0.4, 0.9}) {
        const double gs2 = 1.0 / (1.0 / (1 - s) + 1.0 / g2 - 1.0);
        const double a = gs2 / (1 - s) * (theta / g2 - x0);
        const double b = (gs2 / (1 - s) - 1) / (1 - s);
        for (double y : {-2.0, 0.0, 1.0}) EXPECT_NEAR(drift(p, s, y, x0), a + b * y, 1e-10);
    }
}

// ---------------------------------------------------------------------------

TEST(Sampling, DiracConstant) {
    RandomStream rng(1);
    for (double z : sample_posterior(posterior(Prior::dirac(0.25), 0.5, 0.0, 0.0), 100, rng)) {
        EXPECT_EQ(z, 0.25);
    }
}

TEST(Sampling, GaussianMoments) {
    const auto post = posterior(Prior::gaussian(0.3, 0.5), 0.6, 0.4, 0.0);
    const auto mv = posterior_mean_var(post);
    RandomStream rng(77);
    const std::size_t n = 100000;
    const auto z = sample_posterior(post, n, rng);
    double m = 0, q = 0;
    for (double v : z) m += v;
    m /= n;
    for (double v : z) q += (v - m) * (v - m);
    q /= n - 1;
    EXPECT_NEAR(m, mv.mean, 4 * std::sqrt(mv.variance / n));
    EXPECT_NEAR(q, mv.variance, 4 * mv.variance * std::sqrt(2.0 / n));
}

TEST(Sampling, TwoPointFrequencies) {
    const auto post = posterior(two_point(), 0.5, 0.3, 0.0);
    const double w = std::get<Discrete>(post.law).weights[1];
    RandomStream rng(78);
    const std::size_t n = 100000;
    std::size_t ups = 0;
    for (double z : sample_posterior(post, n, rng)) ups += z > 0;
    EXPECT_NEAR(static_cast<double>(ups) / n, w, 4 * std::sqrt(w * (1 - w) / n));
}

TEST(Sampling, Deterministic) {
    const auto post = posterior(tabulated_normal(0.0, 0.5), 0.3, 0.1, 0.0);
    RandomStream a(9), b(9);
    EXPECT_EQ(sample_posterior(post, 50, a), sample_posterior(post, 50, b));
}

// ---------------------------------------------------------------------------

TEST(LikelihoodRatio, EqualVarianceGaussians) {
    EXPECT_TRUE(lr_order_leq(Prior::gaussian(0, 1), Prior::gaussian(1, 1)));
    EXPECT_FALSE(lr_order_leq(Prior::gaussian(1, 1), Prior::gaussian(0, 1)));
}

TEST(LikelihoodRatio, Diracs) {
    EXPECT_TRUE(lr_order_leq(Prior::dirac(0), Prior::dirac(1)));
    EXPECT_FALSE(lr_order_leq(Prior::dirac(1), Prior::dirac(0)));
}

TEST(LikelihoodRatio, TruncationRaisesOrder) {
    const Prior full = Prior::gaussian(0, 0.5);
    const Prior cut = Prior::truncated_gaussian(0, 0.5, 0.0, INFINITY);
    EXPECT_TRUE(lr_order_leq(full, cut));
    EXPECT_FALSE(lr_order_leq(cut, full));
}

TEST(LikelihoodRatio, DisjointSupports) {
    EXPECT_THROW(lr_order_leq(Prior::truncated_gaussian(0, 1, -2, -1), Prior::truncated_gaussian(0, 1, 1, 2)),
                 IndeterminateError);
}

// ---------------------------------------------------------------------------

TEST(SingleBoundary, Classification) {
    const auto s = quad::linspace(0.0, 0.95, 20);
    const auto y = quad::linspace(-2.0, 2.0, 21);
    EXPECT_EQ(single_boundary_condition(Prior::gaussian(0.3, 0.5), 0.0, s, y).sign,
              VarianceSign::all_nonpositive);
    EXPECT_EQ(single_boundary_condition(Prior::gaussian(0.3, 0.5), 0.0, s, y).violations, 0u);
    EXPECT_EQ(single_boundary_condition(Prior::dirac(0.0), 0.0, s, y).sign, VarianceSign::all_nonpositive);
    EXPECT_EQ(single_boundary_condition(two_point(), 0.0, s, y).sign, VarianceSign::mixed);
    const auto wide = single_boundary_condition(Prior::gaussian(0.0, 2.0), 0.0, s, y);
    EXPECT_EQ(wide.sign, VarianceSign::all_nonnegative);
    EXPECT_EQ(wide.sup_variance.size(), s.size());
}

// ---------------------------------------------------------------------------

TEST(Wasserstein, Diracs) {
    EXPECT_NEAR(wasserstein_1d(Dirac{0.3}, Dirac{-1.2}), 1.5, 1e-12);
}

TEST(Wasserstein, ShiftedGaussians) {
    EXPECT_NEAR(wasserstein_1d(Gaussian{0.0, 0.7}, Gaussian{0.9, 0.7}), 0.9, 1e-6);
}

TEST(Wasserstein, SelfDistanceSymmetryTriangle) {
    const Law a = Gaussian{0.0, 0.5};
    const Law b = std::get<Discrete>(two_point().law());
    const Law c = TruncatedGaussian{0.0, 1.0, 0.0, INFINITY};
    EXPECT_NEAR(wasserstein_1d(a, a), 0.0, 1e-10);
    EXPECT_NEAR(wasserstein_1d(a, b), wasserstein_1d(b, a), 1e-10);
    EXPECT_GE(wasserstein_1d(a, b), 0.0);
    EXPECT_LE(wasserstein_1d(a, c), wasserstein_1d(a, b) + wasserstein_1d(b, c) + 1e-10);
    // Normal(0, v) against the two atoms at -1, 1: E|1 - |N|| by quadrature.
    const double ref = simpson([](double z) { return std::abs(1 - std::abs(z)) * npdf(z, 0, 0.5); }, -10, 10);
    EXPECT_NEAR(wasserstein_1d(a, b), ref, 1e-6);
}

TEST(Wasserstein, FittedLipschitzIsFinite) {
    const auto y = quad::linspace(-2.0, 2.0, 21);
    for (double s : {0.0, 0.5, 0.9}) {
        const double L = fitted_w1_lipschitz(Prior::truncated_gaussian(0.0, 0.5, 0.0, INFINITY), 0.0, s, y);
        EXPECT_TRUE(std::isfinite(L));
        EXPECT_GT(L, 0.0);
    }
}

// ---------------------------------------------------------------------------

TEST(Construction, Validation) {
    EXPECT_THROW(Prior::discrete({0, 1}, {0.5, 0.6}), ConfigurationError);
    EXPECT_THROW(Prior::discrete({0, 1}, {-0.5, 1.5}), ConfigurationError);
    EXPECT_THROW(Prior::truncated_gaussian(0, 1, 1, 1), ConfigurationError);
    EXPECT_THROW(Prior::gaussian(0, 0), ConfigurationError);
    EXPECT_THROW(Prior::tabulated({0, 1}, {0.5, 0.5 + 1e-3}), ConfigurationError);
    EXPECT_NO_THROW(Prior::tabulated({0, 1}, {1.0, 1.0}));
}
