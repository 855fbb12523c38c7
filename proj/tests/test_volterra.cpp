#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "rgmb/cli.hpp"
#include "rgmb/pathsim.hpp"
#include "rgmb/volterra.hpp"

using namespace rgmb;

namespace {

constexpr double shepp_c = 0.839924;

GmpModel ou() {
    GmpModel m;
    m.beta = CoefficientCurve::constant(-1.0);
    m.x0 = 0.2;
    return m;
}

double max_diff(const BoundarySolution& coarse, const BoundarySolution& fine) {
    double d = 0.0;
    for (std::size_t k = 0; k < coarse.s_grid.size(); ++k) {
        d = std::max(d, std::abs(boundary_at(fine, coarse.s_grid[k]) - coarse.b_values[k]));
    }
    return d;
}

}  // namespace

TEST(TruncatedExpectation, Limits) {
    const GmLaw law{0.3, 0.8};
    EXPECT_NEAR(truncated_expectation(law, 1.0, -1e300), 0.7, 1e-15);
    EXPECT_DOUBLE_EQ(truncated_expectation(law, 1.0, -INFINITY), 0.7);
    EXPECT_EQ(truncated_expectation(law, 1.0, INFINITY), 0.0);
    EXPECT_NEAR(truncated_expectation(law, 1.0, 1e300), 0.0, 1e-300);
}

TEST(TruncatedExpectation, StandardAtZero) {
    EXPECT_NEAR(truncated_expectation({0.0, 1.0}, 0.0, 0.0), -0.3989423, 1e-7);
}

TEST(TruncatedExpectation, Degenerate) {
    EXPECT_EQ(truncated_expectation({0.5, 0.0}, 1.0, 0.5), 0.5);
    EXPECT_EQ(truncated_expectation({0.5, 0.0}, 1.0, 0.6), 0.0);
    EXPECT_THROW(truncated_expectation({0.5, -1.0}, 1.0, 0.6), PreconditionError);
}

TEST(TruncatedExpectation, QuadratureOracle) {
    for (const auto& [mu, var, c, b] : std::vector<std::tuple<double, double, double, double>>{
             {0.2, 0.3, 1.0, 0.5}, {-1.0, 2.0, 0.0, 0.3}, {0.0, 0.01, -0.2, -0.1}}) {
        const double sd = std::sqrt(var);
        const double ref = quad::integrate(
            [&](double g) { return (c - g) * normal::pdf((g - mu) / sd) / sd; }, b, mu + 12 * sd, 1e-13);
        EXPECT_NEAR(truncated_expectation({mu, var}, c, b), ref, 1e-11);
    }
}

TEST(OuMarginal, SameTime) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const auto law = ou_marginal(build_dirac_gain(tc, 0.0), 0.3, 0.7, 0.3);
    EXPECT_EQ(law.mean, 0.7);
    EXPECT_EQ(law.variance, 0.0);
}

TEST(OuMarginal, BrownianBridgeLaw) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const double z = 0.4;
    const OuGain gain = build_dirac_gain(tc, z);
    for (const auto& [s, g, u] : std::vector<std::tuple<double, double, double>>{
             {0.0, 0.0, 0.5}, {0.2, -0.3, 0.9}, {0.5, 1.0, 0.999}, {0.7, 0.2, 0.75}}) {
        const auto law = ou_marginal(gain, s, g, u);
        EXPECT_NEAR(law.mean, g * (1 - u) / (1 - s) + z * (u - s) / (1 - s), 1e-9);
        EXPECT_NEAR(law.variance, (1 - u) * (u - s) / (1 - s), 1e-9);
    }
}

TEST(OuMarginal, LongHorizonScalesVariance) {
    GmpModel m;
    m.horizon = 4.0;
    const TimeChange tc = TimeChange::build(m);
    const OuGain gain = build_dirac_gain(tc, 0.0);
    const auto law = ou_marginal(gain, 0.0, 0.0, 0.5);
    // X at t = 2 for a Brownian bridge over [0, 4].
    EXPECT_NEAR(law.variance, 2.0 * 2.0 / 4.0, 1e-9);
    EXPECT_NEAR(law.mean, 0.0, 1e-12);
}

// The gain of a Dirac-pinned OU process is the process itself.
TEST(OuMarginal, MatchesSimulatedBridge) {
    const TimeChange tc = TimeChange::build(ou());
    const double z = -0.3;
    const OuGain gain = build_dirac_gain(tc, Prior::dirac(z, Frame::original));
    const double u = 0.6;
    const std::vector<double> times = {0.0, tc.t_of_s(u), 1.0};
    const std::size_t n = 100000;
    const auto batch = simulate(tc, Prior::dirac(z, Frame::original), times, n, 31);
    double m = 0, m2 = 0;
    for (std::size_t p = 0; p < n; ++p) {
        m += batch.paths(p, 1);
        m2 += batch.paths(p, 1) * batch.paths(p, 1);
    }
    m /= n;
    const double var = m2 / n - m * m;
    const auto law = ou_marginal(gain, 0.0, 0.2, u);
    EXPECT_NEAR(m, law.mean, 3 * std::sqrt(law.variance / n));
    EXPECT_NEAR(var, law.variance, 3 * law.variance * std::sqrt(2.0 / n));
}

TEST(OuMarginal, Errors) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const OuGain dirac = build_dirac_gain(tc, 0.0);
    EXPECT_THROW(ou_marginal(dirac, 0.2, 0.0, 1.0), PreconditionError);
    EXPECT_THROW(ou_marginal(dirac, 0.5, 0.0, 0.4), PreconditionError);
    const OuGain gauss = build_gaussian_gain(tc, Prior::gaussian(0.0, 0.5));
    EXPECT_NO_THROW(ou_marginal(gauss, 0.2, 0.0, 1.0));
}

TEST(Gain, DiracBrownian) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const OuGain gain = build_dirac_gain(tc, 0.35);
    EXPECT_EQ(gain.kind, VolterraCase::dirac_prior);
    EXPECT_TRUE(gain.singular_at_one);
    EXPECT_NEAR(gain.terminal_value, 0.35, 1e-15);
    for (double s : {0.0, 0.3, 0.9, 0.999}) {
        EXPECT_NEAR(gain.rate(s), 1 / (1 - s), 1e-9 / (1 - s));
        EXPECT_NEAR(gain.level(s), 0.35, 1e-12);
        EXPECT_NEAR(gain.vol(s), 1.0, 1e-12);
    }
}

TEST(Gain, CenteredGaussianHasZeroLevel) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const OuGain gain = build_gaussian_gain(tc, Prior::gaussian(0.0, 0.5));
    EXPECT_FALSE(gain.singular_at_one);
    for (double s : {0.0, 0.5, 1.0}) EXPECT_NEAR(gain.level(s), 0.0, 1e-15);
    EXPECT_EQ(gain.terminal_value, gain.level(1.0));
}

// The gain drift rate (level - g) is the drift of a0 + a1 Y with Y the bridge.
TEST(Gain, DriftMatchesBridgeDrift) {
    const TimeChange tc = TimeChange::build(ou());
    const Prior priors[] = {Prior::gaussian(0.2, 0.5), Prior::dirac(0.3)};
    for (const Prior& prior : priors) {
        const OuGain gain = std::holds_alternative<Dirac>(prior.law()) ? build_dirac_gain(tc, prior)
                                                             : build_gaussian_gain(tc, prior);
        for (double s : {0.0, 0.25, 0.6, 0.9}) {
            for (double y : {-1.0, 0.0, 0.7}) {
                const double g = tc.a0(s) + tc.a1(s) * y;
                const double expected =
                    tc.a0_prime(s) + tc.a1_prime(s) * y + tc.a1(s) * drift(prior, s, y, tc.y0());
                EXPECT_NEAR(gain.rate(s) * (gain.level(s) - g), expected, 1e-10) << prior.kind_name();
            }
        }
    }
}

TEST(Gain, Rejections) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    EXPECT_THROW(build_gaussian_gain(tc, Prior::gaussian(0.0, 1.0)), ConfigurationError);
    EXPECT_THROW(build_gaussian_gain(tc, Prior::dirac(0.0)), ConfigurationError);
    EXPECT_THROW(build_dirac_gain(tc, Prior::gaussian(0.0, 0.5)), ConfigurationError);
    GmpModel up;
    up.beta = CoefficientCurve::constant(1.0);
    const TimeChange tu = TimeChange::build(up);
    EXPECT_THROW(build_gaussian_gain(tu, Prior::gaussian(0.0, 0.5)), ConfigurationError);
}

TEST(Grid, Shape) {
    const auto s = volterra_grid();
    EXPECT_EQ(s.front(), 0.0);
    EXPECT_EQ(s.back(), 1.0);
    EXPECT_NEAR(s[180], 0.9, 1e-15);
    EXPECT_NEAR(1 - s[181], 0.095, 1e-12);
    EXPECT_LT(1 - s[s.size() - 2], 1e-6);
    for (std::size_t k = 1; k < s.size(); ++k) EXPECT_GT(s[k], s[k - 1]);
}

class Shepp : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        tc_ = new TimeChange(TimeChange::build(GmpModel{}));
        gain_ = new OuGain(build_dirac_gain(*tc_, 0.0));
        sol_ = new BoundarySolution(picard_solve(*gain_, volterra_grid()));
    }
    static void TearDownTestSuite() {
        delete sol_;
        delete gain_;
        delete tc_;
    }
    static inline TimeChange* tc_ = nullptr;
    static inline OuGain* gain_ = nullptr;
    static inline BoundarySolution* sol_ = nullptr;
};

TEST_F(Shepp, SelfSimilar) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t k = 0; k < sol_->s_grid.size(); ++k) {
        const double s = sol_->s_grid[k];
        if (s > 0.95) break;
        const double r = sol_->b_values[k] / std::sqrt(1 - s);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    EXPECT_LT(hi - lo, 0.01);
    EXPECT_NEAR(sol_->b_values[0], shepp_c, 1e-4);
}

TEST_F(Shepp, FixedPoint) {
    EXPECT_LE(fixed_point_defect(*gain_, *sol_), 2 * PicardOptions{}.tol);
    EXPECT_LT(sol_->residual, PicardOptions{}.tol);
    EXPECT_EQ(sol_->residual_log.size(), sol_->iterations);
}

TEST_F(Shepp, ResidualMonotoneAfterThirdIteration) {
    const auto& log = sol_->residual_log;
    ASSERT_GE(log.size(), 4u);
    for (std::size_t k = 3; k < log.size(); ++k) EXPECT_LT(log[k], log[k - 1]) << "iteration " << k + 1;
}

TEST_F(Shepp, TerminalAnchoring) {
    EXPECT_EQ(sol_->b_values.back(), 0.0);
    const std::size_t n = sol_->b_values.size();
    for (std::size_t k = n - 30; k + 1 < n; ++k) {
        EXPECT_LT(std::abs(sol_->b_values[k]), 1e-3);
        EXPECT_LT(sol_->b_values[k + 1], sol_->b_values[k] + 1e-6);
    }
}

TEST_F(Shepp, CoordinateRows) {
    const auto rows = boundary_rows(*tc_, *sol_);
    ASSERT_EQ(rows.size(), sol_->s_grid.size());
    for (const auto& r : rows) {
        EXPECT_DOUBLE_EQ(r.t, r.s);
        EXPECT_DOUBLE_EQ(r.b_y, r.b_gain);
        EXPECT_EQ(r.b_x, r.b_gain);
    }
    EXPECT_NEAR(boundary_at(*sol_, 0.5), shepp_c * std::sqrt(0.5), 1e-4);
}

TEST(Picard, ShiftedPin) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    PicardOptions opt;
    opt.tol = 1e-5;
    const auto sol = picard_solve(build_dirac_gain(tc, 0.5), volterra_grid(0.9, 91, 0.9), opt);
    for (std::size_t k = 0; k < sol.s_grid.size(); ++k) {
        if (sol.s_grid[k] > 0.95) break;
        EXPECT_NEAR(sol.b_values[k], 0.5 + shepp_c * std::sqrt(1 - sol.s_grid[k]), 1e-3);
    }
}

TEST(Picard, Options) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const OuGain gain = build_dirac_gain(tc, 0.0);
    PicardOptions bad;
    bad.damping = 0.0;
    EXPECT_THROW(picard_solve(gain, volterra_grid(), bad), PreconditionError);
    bad = {};
    bad.tol = 0.0;
    EXPECT_THROW(picard_solve(gain, volterra_grid(), bad), PreconditionError);
    EXPECT_THROW(picard_solve(gain, {0.0, 1.0}), PreconditionError);
    EXPECT_THROW(picard_solve(gain, {0.0, 0.5, 0.4, 1.0}), PreconditionError);
    PicardOptions short_run;
    short_run.max_iter = 1;
    try {
        picard_solve(gain, volterra_grid(0.9, 46, 0.8), short_run);
        FAIL() << "expected non-convergence";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.residual(), short_run.tol);
    }
}

// Refinement checks run at tol = 1e-4, the accuracy the discretization is
// expected to reach on the default grid.
class Refinement : public ::testing::TestWithParam<bool> {
protected:
    static constexpr double tol = 1e-4;
    OuGain gain(const TimeChange& tc) const {
        return GetParam() ? build_dirac_gain(tc, 0.0) : build_gaussian_gain(tc, Prior::gaussian(0.0, 0.5));
    }
    static PicardOptions options() {
        PicardOptions o;
        o.tol = tol;
        return o;
    }
};

TEST_P(Refinement, HalvedSpacing) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const OuGain g = gain(tc);
    const auto coarse = picard_solve(g, volterra_grid(0.9, 91, 0.9), options());
    const auto fine = picard_solve(g, volterra_grid(0.9, 181, std::sqrt(0.9)), options());
    EXPECT_LT(max_diff(coarse, fine), 5 * tol);
}

TEST_P(Refinement, LastDecade) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const OuGain g = gain(tc);
    const auto base = picard_solve(g, volterra_grid(), options());
    const auto fine = picard_solve(g, volterra_grid(0.9, 181, std::sqrt(0.95)), options());
    EXPECT_LT(std::abs(fine.b_values[0] - base.b_values[0]), tol);
}

INSTANTIATE_TEST_SUITE_P(Cases, Refinement, ::testing::Values(true, false),
                         [](const auto& info) { return info.param ? "dirac" : "gaussian"; });

TEST(Gaussian, TerminalAnchorAndMonotoneResidual) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const OuGain gain = build_gaussian_gain(tc, Prior::gaussian(0.3, 0.5));
    const auto sol = picard_solve(gain, volterra_grid());
    EXPECT_EQ(sol.b_values.back(), gain.terminal_value);
    EXPECT_NEAR(sol.b_values[sol.b_values.size() - 2], gain.terminal_value, 1e-3);
    EXPECT_LE(fixed_point_defect(gain, sol), 2 * PicardOptions{}.tol);
    for (std::size_t k = 3; k < sol.residual_log.size(); ++k) EXPECT_LT(sol.residual_log[k], sol.residual_log[k - 1]);
}

// The Monte Carlo threshold of a single slice moves by several cells with the
// sampling noise; it is averaged over five neighbouring slices.
TEST(Gaussian, MatchesMonteCarloBoundary) {
    const TimeChange tc = TimeChange::build(GmpModel{});
    const Prior prior = Prior::gaussian(0.0, 0.5);
    const auto sol = picard_solve(build_gaussian_gain(tc, prior), volterra_grid());
    const auto mc = solve(tc, prior, default_grid(1.0, 100, 100, 8000, -3.0, 3.0, 1));
    std::vector<double> dev;
    for (std::size_t i = 0; mc.grid.t[i] <= 0.95; ++i) {
        const auto th = cli::measure_threshold(mc, i);
        ASSERT_TRUE(th) << "slice " << i;
        dev.push_back(*th - boundary_at(sol, tc.s_of_t(mc.grid.t[i])));
    }
    double sup = 0.0;
    for (std::size_t i = 0; i < dev.size(); ++i) {
        const std::size_t lo = i < 2 ? 0 : i - 2, hi = std::min(dev.size(), i + 3);
        double acc = 0.0;
        for (std::size_t k = lo; k < hi; ++k) acc += dev[k];
        sup = std::max(sup, std::abs(acc / static_cast<double>(hi - lo)));
    }
    EXPECT_LT(sup, 0.1);
}
