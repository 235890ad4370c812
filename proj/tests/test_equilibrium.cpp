#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "privacy_lab/equilibrium.hpp"

using namespace privacy_lab;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

/// Log-uniform sigma_v, sigma_u in [1e-3, 1e3]; sigma_eps uniform in [0, 1e3].
std::vector<MarketParams> random_grid(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> log10s(-3.0, 3.0);
    std::uniform_real_distribution<double> eps(0.0, 1e3);
    std::uniform_real_distribution<double> p0(-100.0, 100.0);
    std::vector<MarketParams> out;
    for (std::size_t i = 0; i < n; ++i)
        out.push_back({p0(rng), std::pow(10.0, log10s(rng)), std::pow(10.0, log10s(rng)), eps(rng)});
    return out;
}

}  // namespace

TEST(ClosedForm, ReferenceTableRows) {
    const auto e0 = solve_closed_form({0.0, 1.0, 1.0, 0.0});
    EXPECT_DOUBLE_EQ(e0.lambda, 0.5);
    EXPECT_DOUBLE_EQ(e0.beta, 1.0);
    EXPECT_EQ(e0.method, SolveMethod::ClosedForm);

    const auto e1 = solve_closed_form({0.0, 1.0, 1.0, 1.0});
    EXPECT_NEAR(e1.lambda, 0.354, 5e-4);
    EXPECT_NEAR(e1.beta, 1.414, 5e-4);

    const auto e2 = solve_closed_form({0.0, 1.0, 1.0, 2.0});
    EXPECT_NEAR(e2.lambda, 0.224, 5e-4);
    EXPECT_NEAR(e2.beta, 2.236, 5e-4);
}

TEST(ClosedForm, ClassicalKyleLimitIsExact) {
    for (const auto& p : random_grid(200, 7)) {
        MarketParams q = p;
        q.sigma_eps = 0.0;
        const auto e = solve_closed_form(q);
        EXPECT_EQ(e.lambda, q.sigma_v / (2.0 * q.sigma_u));
        EXPECT_EQ(e.beta, q.sigma_u / q.sigma_v);
    }
}

TEST(ClosedForm, RejectsInvalidParams) {
    EXPECT_THROW(solve_closed_form({0.0, 1.0, 0.0, 1.0}), ParamError);
    EXPECT_THROW(solve_fixed_point({0.0, 1.0, 1.0, -1.0}), ParamError);
}

TEST(FixedPoint, MatchesClosedFormExamples) {
    const auto fp = solve_fixed_point({0.0, 1.0, 1.0, 1.0}, 1e-12);
    EXPECT_LE(rel(fp.lambda, 0.35355339059327373), 1e-12);
    EXPECT_EQ(fp.method, SolveMethod::FixedPoint);

    const auto fp2 = solve_fixed_point({0.0, 3000.0, 1000.0, 1000.0});
    EXPECT_LE(rel(fp2.lambda, 3000.0 / (2.0 * std::numbers::sqrt2 * 1000.0)), 1e-12);

    const auto fp0 = solve_fixed_point({0.0, 1.0, 1.0, 0.0});
    EXPECT_LE(rel(fp0.lambda, 0.5), 1e-12);
}

TEST(FixedPoint, ReportsNoConvergenceWhenStarved) {
    EXPECT_THROW(solve_fixed_point({0.0, 1.0, 1.0, 1.0}, 1e-12, 3), NoConvergence);
    EXPECT_THROW(solve_fixed_point({0.0, 1.0, 1.0, 1.0}, 0.0), ParamError);
}

TEST(Properties, HalfRevealingAndOracleAgreementOnRandomGrid) {
    for (const auto& p : random_grid(1000, 2024)) {
        const auto cf = solve_closed_form(p);
        const auto fp = solve_fixed_point(p);
        EXPECT_LE(rel(cf.lambda * cf.beta, 0.5), 1e-12);
        EXPECT_LE(rel(fp.lambda, cf.lambda), 1e-12)
            << "sigma_v=" << p.sigma_v << " sigma_u=" << p.sigma_u << " sigma_eps=" << p.sigma_eps;
        EXPECT_LE(rel(fp.beta, cf.beta), 1e-12);
    }
}

TEST(Properties, LambdaDecreasesBetaIncreasesInPrivacy) {
    for (const auto& base : random_grid(50, 99)) {
        double prev_lambda = INFINITY, prev_beta = 0.0;
        for (int k = 0; k <= 40; ++k) {
            MarketParams p = base;
            p.sigma_eps = base.sigma_u * 0.25 * k;
            const auto e = solve_closed_form(p);
            EXPECT_LT(e.lambda, prev_lambda);
            EXPECT_GT(e.beta, prev_beta);
            prev_lambda = e.lambda;
            prev_beta = e.beta;
        }
    }
}

TEST(Properties, PosteriorSlopeAtEquilibriumBetaIsLambda) {
    for (const auto& p : random_grid(1000, 5)) {
        const auto e = solve_closed_form(p);
        EXPECT_LE(rel(projection_coefficient(p, e.beta), e.lambda), 1e-12);
        const double slope = posterior_price(p, e.beta, 1.0) - posterior_price(p, e.beta, 0.0);
        EXPECT_NEAR(slope, e.lambda, 1e-12 * e.lambda + 1e-12 * std::abs(p.p0));
    }
}

TEST(PosteriorPrice, Examples) {
    EXPECT_EQ(posterior_price({7.0, 2.0, 3.0, 1.0}, 0.4, 0.0), 7.0);
    EXPECT_DOUBLE_EQ(posterior_price({0.0, 1.0, 1.0, 0.0}, 1.0, 1.0), 0.5);
    EXPECT_NEAR(posterior_price({100.0, 1.0, 1.0, 1.0}, std::numbers::sqrt2, 2.0),
                100.0 + std::numbers::sqrt2 / 4.0 * 2.0, 1e-12);
    EXPECT_NEAR(posterior_price({100.0, 1.0, 1.0, 1.0}, std::numbers::sqrt2, 2.0), 100.7071, 1e-4);
    EXPECT_THROW(posterior_price({0.0, 1.0, 1.0, 0.0}, 0.0, 1.0), ParamError);
}

TEST(BestResponse, Examples) {
    EXPECT_EQ(informed_best_response(0.3, 5.0, 5.0), 0.0);
    EXPECT_DOUBLE_EQ(informed_best_response(0.5, 0.0, 1.0), 1.0);
    const double lam = solve_closed_form({0.0, 1.0, 1.0, 1.0}).lambda;
    EXPECT_NEAR(informed_best_response(lam, 0.0, 1.0), 1.414, 5e-4);
    EXPECT_THROW(informed_best_response(0.0, 0.0, 1.0), ParamError);
}

TEST(ExpectedProfit, Examples) {
    EXPECT_EQ(informed_expected_profit(0.5, 0.0, 1.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(informed_expected_profit(0.5, 0.0, 1.0, 1.0), 0.5);
    EXPECT_DOUBLE_EQ(informed_expected_profit(0.5, 0.0, 1.0, 2.0), 0.0);
}

TEST(Properties, BestResponseMaximizesProfitOnDenseGrid) {
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> lam_d(0.01, 10.0), v_d(-50.0, 50.0), p0_d(-50.0, 50.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double lam = lam_d(rng), v = v_d(rng), p0 = p0_d(rng);
        const double xs = informed_best_response(lam, p0, v);
        const double half = std::max(1.0, 2.0 * std::abs(xs));
        const int n = 10'001;
        const double step = 2.0 * half / (n - 1);
        double best_x = 0.0, best = -INFINITY;
        for (int k = 0; k < n; ++k) {
            const double x = xs - half + k * step;
            const double f = informed_expected_profit(lam, p0, v, x);
            if (f > best) {
                best = f;
                best_x = x;
            }
        }
        EXPECT_LE(std::abs(best_x - xs), 0.5 * step + 1e-12 * half);
        // Strict concavity: second difference equals -2 lambda step^2.
        const double d2 = informed_expected_profit(lam, p0, v, xs + step) -
                          2.0 * informed_expected_profit(lam, p0, v, xs) +
                          informed_expected_profit(lam, p0, v, xs - step);
        EXPECT_NEAR(d2, -2.0 * lam * step * step, 1e-9 * (1.0 + std::abs(best)));
    }
}

TEST(UnconditionalZeroProfit, Examples) {
    EXPECT_DOUBLE_EQ(zero_profit_lambda_unconditional({0.0, 1.0, 1.0, 3.0}), 0.5);
    EXPECT_DOUBLE_EQ(zero_profit_lambda_unconditional({0.0, 3000.0, 1000.0, 0.0}), 1.5);
    const MarketParams p{0.0, 2.5, 0.7, 0.0};
    EXPECT_EQ(zero_profit_lambda_unconditional(p), solve_closed_form(p).lambda);
}

TEST(Batched, Examples) {
    const MarketParams base{0.0, 1.0, 1.0, 0.0};
    const auto t1 = batched_equilibrium({base, 1});
    const auto cf = solve_closed_form(base);
    EXPECT_EQ(t1.lambda, cf.lambda);
    EXPECT_EQ(t1.beta, cf.beta);

    const auto t4 = batched_equilibrium({base, 4});
    EXPECT_DOUBLE_EQ(t4.lambda, 0.25);
    EXPECT_DOUBLE_EQ(t4.beta, 2.0);

    const auto t9 = batched_equilibrium({{0.0, 3000.0, 1000.0, 0.0}, 9});
    EXPECT_DOUBLE_EQ(t9.lambda, 0.5);

    // Privacy noise on the base params is irrelevant once flow is batched.
    const auto noisy = batched_equilibrium({{0.0, 1.0, 1.0, 5.0}, 4});
    EXPECT_DOUBLE_EQ(noisy.lambda, 0.25);
    EXPECT_THROW(batched_equilibrium({base, 0}), ParamError);
}
