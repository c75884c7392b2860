#include "oracles.hpp"

#include "prospect/learning.hpp"
#include "prospect/maps.hpp"
#include "prospect/solvers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace prospect;

namespace {

LearnConfig quick_config(double lambda, std::size_t episodes = 60) {
    LearnConfig cfg;
    cfg.discount = 0.8;
    cfg.lambda = lambda;
    cfg.episodes = episodes;
    cfg.steps_per_episode = 100;
    cfg.exploration = ExplorationSchedule::reaching(1.0, 0.1, episodes);
    cfg.seed = 7;
    return cfg;
}

} // namespace

// --- entropic update -------------------------------------------------------------

TEST(EntropicUpdate, ZeroLearningRateLeavesTheTable) {
    QTable qt = QTable::wspace(2, 2);
    qt(1, 0) = 0.3;
    const QTable before = qt;
    EXPECT_FALSE(entropic_q_update(qt, 0, 1, 4.0, 1, 0.0, -0.5, 0.9));
    EXPECT_EQ(qt, before);
}

TEST(EntropicUpdate, FullStepHitsTheTarget) {
    QTable qt = QTable::wspace(2, 2);
    qt(1, 0) = 0.25;
    qt(1, 1) = 0.5;
    entropic_q_update(qt, 0, 0, 1.0, 1, 1.0, -0.5, 0.5);
    EXPECT_NEAR(qt(0, 0), std::exp(-1.0) * std::sqrt(0.25), 1e-15);
    entropic_q_update(qt, 0, 1, 1.0, 1, 1.0, 0.5, 0.5);
    EXPECT_NEAR(qt(0, 1), std::exp(1.0) * std::sqrt(0.5), 1e-15);
}

TEST(EntropicUpdate, SingleStateChainReachesItsFixedPoint) {
    // w = exp((lambda/alpha) r) w^alpha  =>  w* = exp(lambda r / (alpha (1 - alpha)))
    const double lambda = -1.0, alpha = 0.5, reward = 1.0;
    QTable qt = QTable::wspace(1, 1);
    const LearningRate rate;
    for (std::size_t n = 0; n < 100000; ++n) entropic_q_update(qt, 0, 0, reward, 0, rate(n), lambda, alpha);
    EXPECT_NEAR(qt(0, 0), std::exp(-4.0), 1e-3);
    EXPECT_NEAR(q_to_value(qt, lambda, alpha)[0], 2.0, 0.05);
}

TEST(EntropicUpdate, RejectsBadArguments) {
    QTable w = QTable::wspace(1, 1);
    QTable v = QTable::vspace(1, 1);
    EXPECT_THROW(entropic_q_update(v, 0, 0, 1.0, 0, 0.5, -1.0, 0.5), InvalidInput);
    EXPECT_THROW(entropic_q_update(w, 0, 0, 1.0, 0, 0.5, 0.0, 0.5), InvalidInput);
    EXPECT_THROW(entropic_q_update(w, 0, 0, 1.0, 0, 1.5, -1.0, 0.5), InvalidInput);
    EXPECT_THROW(entropic_q_update(w, 0, 0, 1.0, 0, 0.5, -1.0, 1.0), InvalidInput);
}

TEST(EntropicUpdate, OverflowAndUnderflow) {
    QTable qt = QTable::wspace(1, 1);
    EXPECT_THROW(entropic_q_update(qt, 0, 0, 1000.0, 0, 1.0, 1.0, 0.5), NumericOverflow);
    EXPECT_TRUE(entropic_q_update(qt, 0, 0, 1000.0, 0, 1.0, -1.0, 0.5));
    EXPECT_EQ(qt(0, 0), default_underflow_floor);
}

// --- w-space values --------------------------------------------------------------

TEST(QToValue, PicksTheOptimizingEntry) {
    QTable qt = QTable::wspace(1, 2);
    qt(0, 0) = std::exp(-2.0);
    qt(0, 1) = std::exp(-1.0);
    EXPECT_NEAR(q_to_value(qt, -1.0, 0.5)[0], 1.0, 1e-15); // min entry, larger value
    EXPECT_NEAR(q_to_value(qt, 1.0, 0.5)[0], -0.5, 1e-15);  // max entry
    qt(0, 1) = 0.0;
    EXPECT_THROW(q_to_value(qt, -1.0, 0.5), Underflow);
    EXPECT_THROW(q_to_value(QTable::vspace(1, 1), -1.0, 0.5), InvalidInput);
}

TEST(WspaceIteration, AgreesWithValueSpace) {
    std::mt19937_64 rng(1);
    for (double lambda : {-1.0, -0.1, 0.1, 1.0})
        for (int trial = 0; trial < 5; ++trial) {
            const Mdp m = oracle::random_mdp(4, 3, rng, false, 2.0);
            const double eps = 1e-11;
            const auto w = q_to_value(wspace_value_iteration(m, lambda, 0.8, eps), lambda, 0.8);
            const auto v = value_iteration_discounted(m, EntropicMap(lambda), 0.8, {}, eps).value;
            EXPECT_LE(sup_norm(difference(w, v)), 1e-8) << "lambda " << lambda;
        }
}

// --- action selection --------------------------------------------------------------

TEST(SelectAction, FullEpsilonIsUniform) {
    QTable qt = QTable::vspace(1, 4);
    qt(0, 2) = 10.0;
    std::mt19937_64 rng(2);
    constexpr int draws = 40000;
    std::vector<int> hits(4, 0);
    for (int i = 0; i < draws; ++i)
        ++hits[select_action(qt, 0, {Exploration::Kind::epsilon_greedy, 1.0}, Sense::maximize, rng)];
    const double sigma = std::sqrt(draws * 0.25 * 0.75);
    for (int h : hits) EXPECT_LE(std::abs(h - draws / 4.0), 3 * sigma);
}

TEST(SelectAction, ColdSoftmaxIsGreedy) {
    QTable qt = QTable::vspace(1, 3);
    qt(0, 0) = 1.0;
    qt(0, 1) = 1.001;
    qt(0, 2) = 0.5;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_EQ(select_action(qt, 0, {Exploration::Kind::softmax, 1e-6}, Sense::maximize, rng), 1u);
        EXPECT_EQ(select_action(qt, 0, {Exploration::Kind::softmax, 1e-6}, Sense::minimize, rng), 2u);
    }
}

TEST(SelectAction, GreedyTiesGoToTheLowestIndex) {
    const QTable qt = QTable::wspace(1, 3);
    std::mt19937_64 rng(4);
    EXPECT_EQ(select_action(qt, 0, {Exploration::Kind::epsilon_greedy, 0.0}, Sense::minimize, rng), 0u);
    EXPECT_EQ(greedy_action(std::vector<double>{2, 1, 1}, Sense::minimize), 1u);
}

// --- schedules ---------------------------------------------------------------------

TEST(Schedules, HarmonicLearningRate) {
    const LearningRate rate{0.5, 2.0};
    EXPECT_DOUBLE_EQ(rate(0), 0.5);
    EXPECT_DOUBLE_EQ(rate(3), 0.5 / 7.0);
}

TEST(Schedules, ExplorationReachesItsFinalValue) {
    const auto s = ExplorationSchedule::reaching(1.0, 0.05, 200);
    EXPECT_DOUBLE_EQ(s.at(0).value, 1.0);
    EXPECT_NEAR(s.at(200).value, 0.05, 1e-15);
    EXPECT_NEAR(s.decay, 0.095, 1e-15);
    EXPECT_THROW(ExplorationSchedule::reaching(1.0, 0.0, 10), InvalidInput);
}

TEST(Schedules, MeanTraceAverages) {
    LearnTrace a, b;
    a.records = {{0, 1.0, 2.0, 0.5, 10.0}};
    b.records = {{0, 3.0, 4.0, 0.5, 10.0}};
    a.clamped_updates = 1;
    b.clamped_updates = 2;
    const auto m = mean_trace({a, b});
    EXPECT_DOUBLE_EQ(m.records[0].v1, 2.0);
    EXPECT_DOUBLE_EQ(m.records[0].abs_error, 3.0);
    EXPECT_EQ(m.clamped_updates, 3u);
    b.records.push_back({});
    EXPECT_THROW(mean_trace({a, b}), DimensionMismatch);
}

// --- entropic Q-learning ---------------------------------------------------------

TEST(EntropicQLearning, ExplorationIsNeeded) {
    // action 1 pays more, but with all-equal initial entries the greedy learner never tries it
    const Mdp m(1, 2, {1.0, 1.0}, {0.0, 1.0});
    LearnConfig cfg = quick_config(0.5, 20);
    cfg.exploration = {Exploration::Kind::epsilon_greedy, 1e-12, 0.0};
    const auto greedy = entropic_q_learning(m, cfg);
    EXPECT_NEAR(greedy.trace.records.back().abs_error, 1.0 / (1.0 - cfg.discount), 1e-6);
    cfg.exploration = ExplorationSchedule::reaching(1.0, 0.1, 20);
    const auto explored = entropic_q_learning(m, cfg);
    EXPECT_NEAR(explored.trace.records.back().abs_error, 0.0, 1e-6);
}

TEST(EntropicQLearning, LearnsAnOptimalPolicyOnASmallMdp) {
    std::mt19937_64 rng(5);
    const Mdp m = oracle::random_mdp(3, 2, rng, true, 1.0);
    const auto r = entropic_q_learning(m, quick_config(-0.5, 100));
    EXPECT_EQ(r.trace.records.size(), 100u);
    EXPECT_LT(r.trace.records.back().abs_error, 0.05 * std::abs(r.trace.reference_value) + 1e-6);
    EXPECT_DOUBLE_EQ(r.trace.records.back().steps, 100.0 * 100.0);
}

TEST(EntropicQLearning, DeterministicForAFixedSeed) {
    std::mt19937_64 rng(6);
    const Mdp m = oracle::random_mdp(4, 2, rng);
    const auto cfg = quick_config(0.3, 10);
    const auto a = entropic_q_learning(m, cfg);
    const auto b = entropic_q_learning(m, cfg);
    EXPECT_EQ(a.table, b.table);
    ASSERT_EQ(a.trace.records.size(), b.trace.records.size());
    for (std::size_t e = 0; e < a.trace.records.size(); ++e)
        EXPECT_EQ(a.trace.records[e].v1, b.trace.records[e].v1);
}

TEST(EntropicQLearning, RejectsBadConfig) {
    const Mdp m(1, 1, {1.0}, {0.0});
    LearnConfig cfg = quick_config(0.3);
    cfg.start_state = 1;
    EXPECT_THROW(entropic_q_learning(m, cfg), InvalidInput);
    cfg = quick_config(0.3);
    cfg.episodes = 0;
    EXPECT_THROW(entropic_q_learning(m, cfg), InvalidInput);
    cfg = quick_config(0.0);
    EXPECT_THROW(entropic_q_learning(m, cfg), InvalidInput);
}

// --- model estimate ---------------------------------------------------------------

TEST(ModelEstimate, UnvisitedRowsAreSelfLoops) {
    const ModelEstimate model(3, 2);
    EXPECT_EQ(model.prob(1, 0, 1), 1.0);
    EXPECT_EQ(model.reward_mean(1, 0), 0.0);
    EXPECT_TRUE(model.visited().empty());
    EXPECT_NO_THROW(model.to_mdp());
}

TEST(ModelEstimate, CountsAndMeans) {
    ModelEstimate model(3, 1);
    model.observe(0, 0, 2, 1.0);
    model.observe(0, 0, 1, 3.0);
    model.observe(0, 0, 2, 5.0);
    EXPECT_EQ(model.visits(0, 0), 3u);
    EXPECT_EQ(model.count(0, 0, 2), 2u);
    EXPECT_DOUBLE_EQ(model.reward_mean(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(model.prob(0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(model.prob(0, 0, 2), 2.0 / 3.0);
    const auto s = model.row(0, 0).support;
    EXPECT_EQ(std::vector<std::size_t>(s.begin(), s.end()), (std::vector<std::size_t>{1, 2}));
    EXPECT_THROW(model.observe(0, 1, 0, 0.0), InvalidInput);
}

TEST(ModelEstimate, ErrorShrinksLikeInverseRootN) {
    const Mdp m(3, 1, {0.2, 0.3, 0.5, 1, 0, 0, 1, 0, 0}, {0, 0, 0});
    ModelEstimate model(3, 1);
    std::mt19937_64 rng(8);
    std::size_t n = 0;
    for (std::size_t target : {1000u, 100000u}) {
        while (n < target) {
            model.observe(0, 0, sample_transition(m, 0, 0, rng), 0.0);
            ++n;
        }
        for (std::size_t y = 0; y < 3; ++y) {
            const double p = m.prob(0, 0, y);
            EXPECT_LE(std::abs(model.prob(0, 0, y) - p), 4.0 * std::sqrt(p * (1 - p) / double(n)));
        }
    }
}

// --- dyna-Q -----------------------------------------------------------------------

TEST(DynaQ, AgentMatchesTheFreeFunction) {
    std::mt19937_64 gen(9);
    const Mdp m = oracle::random_mdp(4, 2, gen);
    const CvarMap map(0.4);
    DynaQAgent agent(4, 2, map, 0.9, 5);
    ModelEstimate model(4, 2);
    QTable qt = QTable::vspace(4, 2);
    std::mt19937_64 env(10), ra(11), rb(11);
    std::size_t x = 0;
    for (int t = 0; t < 500; ++t) {
        const std::size_t a = std::size_t(t % 2);
        const std::size_t y = sample_transition(m, x, a, env);
        const Transition s{x, a, y, m.reward(x, a)};
        agent.step(s, ra);
        dyna_q_step(model, qt, map, s, 0.9, 5, rb);
        x = y;
    }
    for (std::size_t i = 0; i < qt.q.size(); ++i) EXPECT_NEAR(agent.table().q[i], qt.q[i], 1e-12);
}

TEST(DynaQ, PlanningConvergesToValueIterationOnTheModel) {
    std::mt19937_64 gen(12);
    const Mdp m = oracle::random_mdp(4, 2, gen);
    const EntropicMap map(-0.7);
    DynaQAgent agent(4, 2, map, 0.8, 0);
    std::mt19937_64 rng(13);
    for (int pass = 0; pass < 5; ++pass)
        for (std::size_t x = 0; x < 4; ++x)
            for (std::size_t a = 0; a < 2; ++a)
                agent.step({x, a, sample_transition(m, x, a, rng), m.reward(x, a)}, rng);
    // sweeping backups without new data is value iteration on the estimate
    const Mdp estimate = agent.model().to_mdp();
    const auto star = value_iteration_discounted(estimate, map, 0.8, {}, 1e-12).value;
    QTable qt = agent.table();
    for (int sweep = 0; sweep < 300; ++sweep)
        for (std::size_t x = 0; x < 4; ++x)
            for (std::size_t a = 0; a < 2; ++a)
                detail::dyna_backup(agent.model(), qt, map, detail::row_maxima(qt), 0.8, x, a);
    for (std::size_t x = 0; x < 4; ++x) {
        const auto row = qt.row(x);
        EXPECT_NEAR(*std::max_element(row.begin(), row.end()), star[x], 1e-9);
    }
}

TEST(DynaQ, ConvergesOnADeterministicMdp) {
    const Mdp m(3, 2, {0, 1, 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0, 0, 1, 0}, {0, 1, 2, 0, 5, -1});
    const ExpectationMap map;
    DynaQAgent agent(3, 2, map, 0.9, 20);
    std::mt19937_64 rng(14);
    std::size_t x = 0;
    for (int t = 0; t < 3000; ++t) {
        const std::size_t a = std::uniform_int_distribution<std::size_t>(0, 1)(rng);
        const std::size_t y = sample_transition(m, x, a, rng);
        agent.step({x, a, y, m.reward(x, a)}, rng);
        x = y;
    }
    const auto star = value_iteration_discounted(m, map, 0.9, {}, 1e-12);
    EXPECT_EQ(greedy_policy(agent.table(), Sense::maximize), star.policy);
    for (std::size_t s = 0; s < 3; ++s) {
        const auto row = agent.table().row(s);
        EXPECT_NEAR(*std::max_element(row.begin(), row.end()), star.value[s], 1e-6);
    }
}

TEST(DynaQ, LearningReachesTheOptimum) {
    std::mt19937_64 gen(15);
    const Mdp m = oracle::random_mdp(4, 2, gen, true);
    LearnConfig cfg = quick_config(0.0, 40);
    cfg.planning_steps = 10;
    const auto r = dyna_q_learning(m, MinimaxMap(), cfg);
    EXPECT_NEAR(r.trace.records.back().abs_error, 0.0, 1e-6);
}

// --- trials -----------------------------------------------------------------------

TEST(RunTrials, IndependentOfThreadCount) {
    std::mt19937_64 gen(16);
    const Mdp m = oracle::random_mdp(4, 2, gen);
    const auto cfg = quick_config(-0.3, 15);
    auto learner = [&](const LearnConfig& c) { return entropic_q_learning(m, c); };
    const auto serial = run_trials(learner, cfg, 6, 1);
    const auto parallel = run_trials(learner, cfg, 6, 4);
    EXPECT_EQ(serial.table, parallel.table);
    for (std::size_t e = 0; e < 15; ++e) EXPECT_EQ(serial.trace.records[e].v1, parallel.trace.records[e].v1);
    EXPECT_EQ(serial.table, entropic_q_learning(m, cfg).table);
    EXPECT_THROW(run_trials(learner, cfg, 0), InvalidInput);
}
