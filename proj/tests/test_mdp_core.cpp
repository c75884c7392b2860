#include "oracles.hpp"

#include "prospect/mdp.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace prospect;

TEST(ValidateMdp, IdentityChainIsValid) {
    const Mdp m(1, 1, {1.0}, {0.0});
    EXPECT_NO_THROW(validate_mdp(m));
}

TEST(ValidateMdp, RowSumReportedWhenNotStochastic) {
    try {
        Mdp(2, 1, {0.5, 0.6, 0.0, 1.0}, {0.0, 0.0});
        FAIL() << "expected RowNotStochastic";
    } catch (const RowNotStochastic& e) {
        EXPECT_EQ(e.state(), 0u);
        EXPECT_EQ(e.action(), 0u);
        EXPECT_NEAR(e.sum(), 1.1, 1e-12);
        EXPECT_EQ(e.code(), ErrorCode::row_not_stochastic);
    }
}

TEST(ValidateMdp, NegativeEntryRejected) {
    EXPECT_THROW(Mdp(2, 1, {1.5, -0.5, 0.0, 1.0}, {0.0, 0.0}), RowNotStochastic);
}

TEST(ValidateMdp, NanRewardRejected) {
    try {
        Mdp(1, 2, {1.0, 1.0}, {0.0, std::numeric_limits<double>::quiet_NaN()});
        FAIL() << "expected NonFiniteReward";
    } catch (const NonFiniteReward& e) {
        EXPECT_EQ(e.state(), 0u);
        EXPECT_EQ(e.action(), 1u);
    }
}

TEST(ValidateMdp, ToleranceIsOneInABillion) {
    EXPECT_NO_THROW(Mdp(2, 1, {0.5 + 5e-10, 0.5, 0.0, 1.0}, {0.0, 0.0}));
    EXPECT_THROW(Mdp(2, 1, {0.5 + 5e-9, 0.5, 0.0, 1.0}, {0.0, 0.0}), RowNotStochastic);
}

TEST(ValidateMdp, ShapeErrors) {
    EXPECT_THROW(Mdp(2, 1, {1.0, 0.0}, {0.0, 0.0}), DimensionMismatch);
    EXPECT_THROW(Mdp(0, 1, {}, {}), InvalidInput);
    EXPECT_THROW(Mdp::from_nested({{{1.0, 0.0}}, {{0.0, 1.0}, {1.0, 0.0}}}, {{0.0}, {0.0, 0.0}}),
                 DimensionMismatch);
}

TEST(Mdp, SupportSkipsZeros) {
    const Mdp m = Mdp::from_nested({{{0.0, 0.25, 0.75}}, {{1.0, 0.0, 0.0}}, {{0.0, 0.0, 1.0}}},
                                   {{1.0}, {2.0}, {3.0}});
    const auto s = m.support(0, 0);
    EXPECT_EQ(std::vector<std::size_t>(s.begin(), s.end()), (std::vector<std::size_t>{1, 2}));
    EXPECT_DOUBLE_EQ(m.reward(2, 0), 3.0);
    EXPECT_DOUBLE_EQ(m.prob(0, 0, 2), 0.75);
}

TEST(Policy, RandomizedRowsMustSumToOne) {
    EXPECT_THROW(PolicyRand(1, 2, {0.5, 0.6}), InvalidInput);
    EXPECT_THROW(PolicyRand(1, 2, {1.5, -0.5}), InvalidInput);
    EXPECT_NO_THROW(PolicyRand(1, 2, {0.25, 0.75}));
}

TEST(Policy, DeterministicActionRange) {
    const Mdp m(1, 2, {1.0, 1.0}, {0.0, 0.0});
    EXPECT_THROW(check_policy(m, PolicyDet{{2}}), InvalidInput);
    EXPECT_THROW(check_policy(m, PolicyDet{{0, 0}}), DimensionMismatch);
}

TEST(ApplyPolicy, DeterministicPicksTheRow) {
    std::mt19937_64 rng(3);
    const Mdp m = oracle::random_mdp(3, 2, rng);
    const PolicyDet f{{1, 0, 1}};
    const auto induced = apply_policy(m, PolicyRand::from_deterministic(f, 2));
    for (std::size_t x = 0; x < 3; ++x) {
        EXPECT_DOUBLE_EQ(induced.reward[x], m.reward(x, f[x]));
        for (std::size_t y = 0; y < 3; ++y) EXPECT_DOUBLE_EQ(induced.transition(x, y), m.prob(x, f[x], y));
    }
}

TEST(ApplyPolicy, SymmetricMixOfRewards) {
    const Mdp m(1, 2, {1.0, 1.0}, {0.0, 2.0});
    EXPECT_DOUBLE_EQ(apply_policy(m, PolicyRand::uniform(1, 2)).reward[0], 1.0);
}

TEST(ApplyPolicy, MatchesDoubleLoopAndStaysStochastic) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Mdp m = oracle::random_mdp(3, 2, rng);
        std::vector<double> p(6);
        for (std::size_t x = 0; x < 3; ++x) {
            p[2 * x] = unit(rng);
            p[2 * x + 1] = 1.0 - p[2 * x];
        }
        const PolicyRand pi(3, 2, p);
        const auto induced = apply_policy(m, pi);
        for (std::size_t x = 0; x < 3; ++x) {
            double r = 0.0, row_sum = 0.0;
            for (std::size_t a = 0; a < 2; ++a) r += p[2 * x + a] * m.reward(x, a);
            EXPECT_NEAR(induced.reward[x], r, 1e-12);
            for (std::size_t y = 0; y < 3; ++y) {
                double q = 0.0;
                for (std::size_t a = 0; a < 2; ++a) q += p[2 * x + a] * m.prob(x, a, y);
                EXPECT_NEAR(induced.transition(x, y), q, 1e-12);
                row_sum += induced.transition(x, y);
            }
            EXPECT_NEAR(row_sum, 1.0, 1e-12);
        }
    }
}

TEST(Norms, SupNorm) {
    EXPECT_EQ(sup_norm(std::vector<double>{0, 0, 0}), 0.0);
    EXPECT_EQ(sup_norm(std::vector<double>{3, -1, 0}), 3.0);
    EXPECT_EQ(sup_norm(std::vector<double>{-5, 2}), 5.0);
}

TEST(Norms, HilbertSeminorm) {
    EXPECT_EQ(hilbert_seminorm(std::vector<double>{4, 4, 4}), 0.0);
    EXPECT_EQ(hilbert_seminorm(std::vector<double>{3, 1, 0}), 3.0);
}

TEST(Norms, SeminormPropertiesOnRandomVectors) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-10.0, 10.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> v(5);
        for (auto& e : v) e = d(rng);
        const double c = d(rng);
        std::vector<double> shifted = v;
        for (auto& e : shifted) e += c;
        EXPECT_NEAR(hilbert_seminorm(shifted), hilbert_seminorm(v), 1e-12);
        EXPECT_LE(hilbert_seminorm(v), 2.0 * sup_norm(v) + 1e-12);
    }
}

TEST(SampleTransition, PointMassAlwaysHits) {
    const Mdp m = Mdp::from_nested({{{0.0, 1.0, 0.0}}, {{0.0, 0.0, 1.0}}, {{1.0, 0.0, 0.0}}}, {{0}, {0}, {0}});
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_transition(m, 0, 0, rng), 1u);
}

TEST(SampleTransition, ReproducibleForFixedSeed) {
    const Mdp m(3, 1, {1 / 3., 1 / 3., 1 / 3., 1 / 3., 1 / 3., 1 / 3., 1 / 3., 1 / 3., 1 / 3.}, {0, 0, 0});
    std::mt19937_64 a(42), b(42);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_transition(m, 0, 0, a), sample_transition(m, 0, 0, b));
}

TEST(SampleTransition, FrequenciesWithinThreeSigma) {
    const Mdp m(3, 1, {0.2, 0.5, 0.3, 1, 0, 0, 1, 0, 0}, {0, 0, 0});
    std::mt19937_64 rng(99);
    constexpr int draws = 100000;
    std::vector<int> hits(3, 0);
    for (int i = 0; i < draws; ++i) ++hits[sample_transition(m, 0, 0, rng)];
    for (std::size_t y = 0; y < 3; ++y) {
        const double p = m.prob(0, 0, y);
        const double sigma = std::sqrt(draws * p * (1 - p));
        EXPECT_LE(std::abs(hits[y] - draws * p), 3 * sigma) << "state " << y;
    }
}
