#pragma once

#include "prospect/errors.hpp"
#include "prospect/maps.hpp"
#include "prospect/mdp.hpp"
#include "prospect/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace prospect {

// ---------------------------------------------------------------------------
// Tables and action selection
// ---------------------------------------------------------------------------

/// wspace: entries are exp((lambda/alpha) q) > 0 (entropic Q-learning). vspace: plain values.
enum class QSpace { wspace, vspace };

/// Direction in which the greedy action optimizes the table entries.
enum class Sense { minimize, maximize };

struct QTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> q;
    QSpace space = QSpace::vspace;

    static QTable wspace(std::size_t n, std::size_t n_actions) {
        // the image of v = 0 under the exponential transform
        return {n, n_actions, std::vector<double>(n * n_actions, 1.0), QSpace::wspace};
    }
    static QTable vspace(std::size_t n, std::size_t n_actions) {
        return {n, n_actions, std::vector<double>(n * n_actions, 0.0), QSpace::vspace};
    }

    double& operator()(std::size_t x, std::size_t a) { return q[x * n_actions + a]; }
    double operator()(std::size_t x, std::size_t a) const { return q[x * n_actions + a]; }
    std::span<const double> row(std::size_t x) const { return {q.data() + x * n_actions, n_actions}; }

    bool operator==(const QTable&) const = default;
};

/// For lambda < 0 the transform exp((lambda/alpha) v) reverses order, so greedy means argmin.
inline Sense entropic_sense(double lambda) { return lambda < 0.0 ? Sense::minimize : Sense::maximize; }

/// Best action in a row; ties go to the lowest index.
inline std::size_t greedy_action(std::span<const double> row, Sense sense) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < row.size(); ++a)
        if (sense == Sense::maximize ? row[a] > row[best] : row[a] < row[best]) best = a;
    return best;
}

inline PolicyDet greedy_policy(const QTable& qt, Sense sense) {
    PolicyDet f{std::vector<std::size_t>(qt.n_states)};
    for (std::size_t x = 0; x < qt.n_states; ++x) f.action_of[x] = greedy_action(qt.row(x), sense);
    return f;
}

struct Exploration {
    enum class Kind { epsilon_greedy, softmax };
    Kind kind = Kind::epsilon_greedy;
    double value = 0.0; ///< epsilon, or the softmax temperature
};

/// epsilon-greedy or softmax (Boltzmann) choice at state x.
template <class Rng>
std::size_t select_action(const QTable& qt, std::size_t x, const Exploration& exploration,
                          Sense sense, Rng& rng) {
    const auto row = qt.row(x);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (exploration.kind == Exploration::Kind::epsilon_greedy) {
        if (exploration.value > 0.0 && unit(rng) < exploration.value)
            return std::uniform_int_distribution<std::size_t>(0, qt.n_actions - 1)(rng);
        return greedy_action(row, sense);
    }
    if (!(exploration.value > 0.0)) return greedy_action(row, sense);
    const double sign = sense == Sense::maximize ? 1.0 : -1.0;
    double top = -std::numeric_limits<double>::infinity();
    for (double e : row) top = std::max(top, sign * e);
    std::vector<double> weight(row.size());
    double total = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a)
        total += weight[a] = std::exp((sign * row[a] - top) / exploration.value);
    const double u = unit(rng) * total;
    double cumulative = 0.0;
    for (std::size_t a = 0; a < row.size(); ++a) {
        cumulative += weight[a];
        if (u < cumulative) return a;
    }
    return greedy_action(row, sense);
}

// ---------------------------------------------------------------------------
// Entropic Q-learning in w-space
// ---------------------------------------------------------------------------

inline constexpr double default_underflow_floor = 1e-300;

/**
 * One stochastic-approximation step on w = exp((lambda/alpha) v):
 *     q(x,a) <- q(x,a) + beta [ exp((lambda/alpha) r) opt_b q(y,b)^alpha - q(x,a) ]
 * with opt = min for lambda < 0 and max for lambda > 0.
 *
 * Returns true when the target or the result fell below `floor` and was clamped.
 */
inline bool entropic_q_update(QTable& qt, std::size_t x, std::size_t a, double reward,
                              std::size_t y, double beta, double lambda, double alpha,
                              double floor = default_underflow_floor) {
    if (qt.space != QSpace::wspace) throw InvalidInput("entropic Q-learning needs a w-space table");
    if (lambda == 0.0) throw InvalidInput("entropic Q-learning needs lambda != 0");
    if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidInput("learning rate must lie in [0, 1]");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("discount must lie in (0, 1)");
    const auto next = qt.row(y);
    const double best = entropic_sense(lambda) == Sense::minimize
                            ? *std::min_element(next.begin(), next.end())
                            : *std::max_element(next.begin(), next.end());
    double target = std::exp(lambda / alpha * reward) * std::pow(best, alpha);
    if (!std::isfinite(target))
        throw NumericOverflow("w-space target overflowed; reduce |lambda| or the reward scale");
    bool clamped = false;
    if (target < floor) {
        target = floor;
        clamped = true;
    }
    double& entry = qt(x, a);
    entry += beta * (target - entry);
    if (entry < floor) {
        entry = floor;
        clamped = true;
    }
    return clamped;
}

/// v(x) = (alpha/lambda) log opt_a q(x,a), the inverse of the w-transform.
inline ValueFn q_to_value(const QTable& qt, double lambda, double alpha) {
    if (qt.space != QSpace::wspace) throw InvalidInput("q_to_value needs a w-space table");
    if (lambda == 0.0) throw InvalidInput("q_to_value needs lambda != 0");
    const Sense sense = entropic_sense(lambda);
    ValueFn v(qt.n_states);
    for (std::size_t x = 0; x < qt.n_states; ++x) {
        const auto row = qt.row(x);
        for (double e : row)
            if (!(e > 0.0)) throw Underflow("w-space entry is not positive at state " + std::to_string(x));
        v[x] = alpha / lambda * std::log(row[greedy_action(row, sense)]);
    }
    return v;
}

/**
 * Exact value iteration in w-space with the true model:
 *     w(x) <- opt_a exp((lambda/alpha) r(x,a)) E[w(X')^alpha | x,a].
 * Mapped through q_to_value it reproduces the entropic value-space fixed point.
 */
inline QTable wspace_value_iteration(const Mdp& m, double lambda, double alpha, double epsilon,
                                     std::size_t max_iter = default_max_iter_discounted) {
    if (lambda == 0.0) throw InvalidInput("w-space iteration needs lambda != 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("discount must lie in (0, 1)");
    const Sense sense = entropic_sense(lambda);
    QTable qt = QTable::wspace(m.n_states(), m.n_actions());
    std::vector<double> w(m.n_states(), 1.0), powered(m.n_states());
    for (std::size_t it = 0; it < max_iter; ++it) {
        for (std::size_t y = 0; y < m.n_states(); ++y) powered[y] = std::pow(w[y], alpha);
        for (std::size_t x = 0; x < m.n_states(); ++x)
            for (std::size_t a = 0; a < m.n_actions(); ++a) {
                double expected = 0.0;
                for (std::size_t y : m.support(x, a)) expected += m.prob(x, a, y) * powered[y];
                qt(x, a) = std::exp(lambda / alpha * m.reward(x, a)) * expected;
            }
        // compare in value space: the w scale can be far from one
        double residual = 0.0;
        for (std::size_t x = 0; x < m.n_states(); ++x) {
            const double next = qt(x, greedy_action(qt.row(x), sense));
            if (!(next > 0.0) || !std::isfinite(next))
                throw NumericOverflow("w-space iteration left the representable range");
            residual = std::max(residual, std::abs(alpha / lambda * (std::log(next) - std::log(w[x]))));
            w[x] = next;
        }
        if (residual < epsilon) return qt;
    }
    throw NotConverged<QTable>("w-space iteration did not converge", qt);
}

// ---------------------------------------------------------------------------
// Schedules, configuration and traces
// ---------------------------------------------------------------------------

/// beta = beta0 / (1 + decay * n), n = number of earlier updates of the pair.
struct LearningRate {
    double beta0 = 1.0;
    double decay = 1.0;
    double operator()(std::size_t visits) const { return beta0 / (1.0 + decay * double(visits)); }
};

/// value(e) = initial / (1 + decay * e) for episode e; epsilon or softmax temperature.
struct ExplorationSchedule {
    Exploration::Kind kind = Exploration::Kind::epsilon_greedy;
    double initial = 1.0;
    double decay = 0.095;

    /// Decay chosen so that value(episodes) == final_value.
    static ExplorationSchedule reaching(double initial, double final_value, std::size_t episodes,
                                        Exploration::Kind kind = Exploration::Kind::epsilon_greedy) {
        if (!(initial > 0.0 && final_value > 0.0) || episodes == 0)
            throw InvalidInput("exploration schedule needs positive values and episodes");
        return {kind, initial, (initial / final_value - 1.0) / double(episodes)};
    }

    Exploration at(std::size_t episode) const {
        return {kind, initial / (1.0 + decay * double(episode))};
    }
};

struct LearnConfig {
    double discount = 0.9;
    double lambda = 0.01; ///< entropic Q-learning only
    std::size_t episodes = 200;
    std::size_t steps_per_episode = 250;
    LearningRate learning_rate;
    ExplorationSchedule exploration = ExplorationSchedule::reaching(1.0, 0.05, 200);
    std::size_t planning_steps = 0; ///< dyna-Q only
    std::uint64_t seed = 0;
    std::size_t start_state = 0;
    double eval_epsilon = 1e-8;
    double underflow_floor = default_underflow_floor;
};

struct EpisodeRecord {
    std::size_t episode = 0;
    double v1 = 0.0;        ///< start-state value of the current greedy policy
    double abs_error = 0.0; ///< |v1 - v1*|
    double exploration = 0.0;
    double steps = 0.0; ///< cumulative environment steps
};

struct LearnTrace {
    std::vector<EpisodeRecord> records;
    double reference_value = 0.0;
    std::size_t clamped_updates = 0;
};

struct LearnResult {
    QTable table;
    LearnTrace trace;
};

/// Per-episode mean over independent trials; order of `traces` does not matter.
inline LearnTrace mean_trace(const std::vector<LearnTrace>& traces) {
    if (traces.empty()) return {};
    LearnTrace out;
    out.reference_value = traces.front().reference_value;
    const std::size_t episodes = traces.front().records.size();
    out.records.resize(episodes);
    const double k = double(traces.size());
    for (std::size_t e = 0; e < episodes; ++e) {
        EpisodeRecord& r = out.records[e];
        r.episode = e;
        for (const auto& t : traces) {
            if (t.records.size() != episodes) throw DimensionMismatch("traces differ in length");
            r.v1 += t.records[e].v1 / k;
            r.abs_error += t.records[e].abs_error / k;
            r.exploration += t.records[e].exploration / k;
            r.steps += t.records[e].steps / k;
        }
    }
    for (const auto& t : traces) out.clamped_updates += t.clamped_updates;
    return out;
}

namespace detail {

inline void check_config(const Mdp& m, const LearnConfig& cfg) {
    if (!(cfg.discount > 0.0 && cfg.discount < 1.0)) throw InvalidInput("discount must lie in (0, 1)");
    if (cfg.start_state >= m.n_states()) throw InvalidInput("start state out of range");
    if (cfg.episodes == 0) throw InvalidInput("need at least one episode");
    if (!(cfg.learning_rate.beta0 > 0.0 && cfg.learning_rate.beta0 <= 1.0 &&
          cfg.learning_rate.decay >= 0.0))
        throw InvalidInput("learning rate schedule must produce values in (0, 1]");
    if (!(cfg.exploration.initial > 0.0 && cfg.exploration.decay >= 0.0))
        throw InvalidInput("exploration schedule must be positive");
    if (cfg.exploration.kind == Exploration::Kind::epsilon_greedy && cfg.exploration.initial > 1.0)
        throw InvalidInput("epsilon must not exceed one");
}

inline EpisodeRecord evaluate_episode(const Mdp& m, const ProspectMap& map, const PolicyDet& f,
                                      const LearnConfig& cfg, double reference, std::size_t episode,
                                      double exploration, std::size_t steps) {
    const ValueFn v = evaluate_policy_discounted(m, map, cfg.discount, f, cfg.eval_epsilon);
    const double v1 = v[cfg.start_state];
    return {episode, v1, std::abs(v1 - reference), exploration, double(steps)};
}

} // namespace detail

/**
 * Model-free entropic Q-learning. Each episode restarts at cfg.start_state;
 * after every episode the greedy policy is evaluated exactly against the
 * true model and compared with `reference` (pass NaN to compute v1* by
 * value iteration first).
 */
inline LearnResult entropic_q_learning(const Mdp& m, const LearnConfig& cfg,
                                       double reference = std::numeric_limits<double>::quiet_NaN()) {
    detail::check_config(m, cfg);
    const EntropicMap map(cfg.lambda);
    if (std::isnan(reference))
        reference = value_iteration_discounted(m, map, cfg.discount, {}, cfg.eval_epsilon)
                        .value[cfg.start_state];

    const Sense sense = entropic_sense(cfg.lambda);
    std::mt19937_64 rng(cfg.seed);
    LearnResult out{QTable::wspace(m.n_states(), m.n_actions()), {}};
    out.trace.reference_value = reference;
    std::vector<std::size_t> visits(m.n_states() * m.n_actions(), 0);
    std::size_t steps = 0;
    for (std::size_t e = 0; e < cfg.episodes; ++e) {
        const Exploration explore = cfg.exploration.at(e);
        std::size_t x = cfg.start_state;
        for (std::size_t s = 0; s < cfg.steps_per_episode; ++s, ++steps) {
            const std::size_t a = select_action(out.table, x, explore, sense, rng);
            const std::size_t y = sample_transition(m, x, a, rng);
            const double beta = cfg.learning_rate(visits[x * m.n_actions() + a]++);
            if (entropic_q_update(out.table, x, a, m.reward(x, a), y, beta, cfg.lambda, cfg.discount,
                                  cfg.underflow_floor))
                ++out.trace.clamped_updates;
            x = y;
        }
        out.trace.records.push_back(detail::evaluate_episode(
            m, map, greedy_policy(out.table, sense), cfg, reference, e, explore.value, steps));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model-based learning (dyna-Q) for arbitrary maps
// ---------------------------------------------------------------------------

/**
 * Empirical transition and reward model. Q^(y|x,a) = n(x,a,y) / n(x,a);
 * rows that were never visited default to a self-loop.
 */
class ModelEstimate {
public:
    ModelEstimate(std::size_t n_states, std::size_t n_actions)
        : n_states_(n_states), n_actions_(n_actions), pair_visits_(n_states * n_actions, 0),
          counts_(n_states * n_actions * n_states, 0), probs_(n_states * n_actions * n_states, 0.0),
          reward_mean_(n_states * n_actions, 0.0), support_(n_states * n_actions) {
        for (std::size_t x = 0; x < n_states; ++x)
            for (std::size_t a = 0; a < n_actions; ++a) {
                probs_[index(x, a) * n_states + x] = 1.0;
                support_[index(x, a)] = {x};
            }
    }

    void observe(std::size_t x, std::size_t a, std::size_t y, double reward) {
        if (x >= n_states_ || y >= n_states_ || a >= n_actions_)
            throw InvalidInput("observed transition out of range");
        const std::size_t k = index(x, a);
        double* row = probs_.data() + k * n_states_;
        auto& support = support_[k];
        if (pair_visits_[k] == 0) {
            visited_.emplace_back(x, a);
            row[x] = 0.0;
            support.clear();
        }
        const std::size_t n = ++pair_visits_[k];
        reward_mean_[k] += (reward - reward_mean_[k]) / double(n);
        if (counts_[k * n_states_ + y]++ == 0)
            support.insert(std::upper_bound(support.begin(), support.end(), y), y);
        for (std::size_t z : support) row[z] = double(counts_[k * n_states_ + z]) / double(n);
    }

    std::size_t visits(std::size_t x, std::size_t a) const { return pair_visits_[index(x, a)]; }
    std::size_t count(std::size_t x, std::size_t a, std::size_t y) const {
        return counts_[index(x, a) * n_states_ + y];
    }
    double reward_mean(std::size_t x, std::size_t a) const { return reward_mean_[index(x, a)]; }
    double prob(std::size_t x, std::size_t a, std::size_t y) const {
        return probs_[index(x, a) * n_states_ + y];
    }
    RowView row(std::size_t x, std::size_t a) const {
        const std::size_t k = index(x, a);
        return {{probs_.data() + k * n_states_, n_states_}, support_[k]};
    }
    /// Pairs with at least one observation, in order of first visit.
    const std::vector<std::pair<std::size_t, std::size_t>>& visited() const { return visited_; }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }

    /// Snapshot as an Mdp with Q^ and r^ (unvisited rewards are zero).
    Mdp to_mdp() const { return Mdp(n_states_, n_actions_, probs_, reward_mean_); }

private:
    std::size_t index(std::size_t x, std::size_t a) const { return x * n_actions_ + a; }

    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<std::size_t> pair_visits_;
    std::vector<std::size_t> counts_;
    std::vector<double> probs_;
    std::vector<double> reward_mean_;
    std::vector<std::vector<std::size_t>> support_;
    std::vector<std::pair<std::size_t, std::size_t>> visited_;
};

struct Transition {
    std::size_t state = 0;
    std::size_t action = 0;
    std::size_t next_state = 0;
    double reward = 0.0;
};

namespace detail {

/// q(x,a) = r^(x,a) + alpha R(V | x, a, Q^), V(y) = max_b q(y,b).
inline void dyna_backup(const ModelEstimate& model, QTable& qt, const ProspectMap& map,
                        std::span<const double> best, double alpha, std::size_t x, std::size_t a) {
    qt(x, a) = model.reward_mean(x, a) + alpha * map.evaluate(model.row(x, a), best, x, a);
}

inline ValueFn row_maxima(const QTable& qt) {
    ValueFn v(qt.n_states);
    for (std::size_t x = 0; x < qt.n_states; ++x) {
        const auto row = qt.row(x);
        v[x] = *std::max_element(row.begin(), row.end());
    }
    return v;
}

} // namespace detail

/**
 * One dyna-Q step: update the model with `sample`, back up the sampled pair
 * against the full estimated row, then back up `planning_steps` pairs drawn
 * uniformly from those visited so far.
 */
template <class Rng>
void dyna_q_step(ModelEstimate& model, QTable& qt, const ProspectMap& map, const Transition& sample,
                 double alpha, std::size_t planning_steps, Rng& rng) {
    if (qt.space != QSpace::vspace) throw InvalidInput("dyna-Q needs a v-space table");
    model.observe(sample.state, sample.action, sample.next_state, sample.reward);
    detail::dyna_backup(model, qt, map, detail::row_maxima(qt), alpha, sample.state, sample.action);
    const auto& visited = model.visited();
    std::uniform_int_distribution<std::size_t> pick(0, visited.size() - 1);
    for (std::size_t i = 0; i < planning_steps; ++i) {
        const auto [x, a] = visited[pick(rng)];
        detail::dyna_backup(model, qt, map, detail::row_maxima(qt), alpha, x, a);
    }
}

/// dyna-Q learner that keeps V(y) = max_b q(y,b) cached between backups.
class DynaQAgent {
public:
    DynaQAgent(std::size_t n_states, std::size_t n_actions, const ProspectMap& map, double alpha,
               std::size_t planning_steps)
        : model_(n_states, n_actions), table_(QTable::vspace(n_states, n_actions)),
          best_(n_states, 0.0), map_(&map), alpha_(alpha), planning_steps_(planning_steps) {}

    template <class Rng>
    void step(const Transition& sample, Rng& rng) {
        model_.observe(sample.state, sample.action, sample.next_state, sample.reward);
        update(sample.state, sample.action);
        const auto& visited = model_.visited();
        std::uniform_int_distribution<std::size_t> pick(0, visited.size() - 1);
        for (std::size_t i = 0; i < planning_steps_; ++i) {
            const auto [x, a] = visited[pick(rng)];
            update(x, a);
        }
    }

    const QTable& table() const noexcept { return table_; }
    const ModelEstimate& model() const noexcept { return model_; }

private:
    void update(std::size_t x, std::size_t a) {
        detail::dyna_backup(model_, table_, *map_, best_, alpha_, x, a);
        const auto row = table_.row(x);
        best_[x] = *std::max_element(row.begin(), row.end());
    }

    ModelEstimate model_;
    QTable table_;
    ValueFn best_;
    const ProspectMap* map_;
    double alpha_;
    std::size_t planning_steps_;
};

/// Episodic dyna-Q on the environment `m` with the given map; traces as in entropic_q_learning.
inline LearnResult dyna_q_learning(const Mdp& m, const ProspectMap& map, const LearnConfig& cfg,
                                   double reference = std::numeric_limits<double>::quiet_NaN()) {
    detail::check_config(m, cfg);
    if (std::isnan(reference))
        reference = value_iteration_discounted(m, map, cfg.discount, {}, cfg.eval_epsilon)
                        .value[cfg.start_state];
    const RewardTransform utility = map.reward_transform();

    std::mt19937_64 rng(cfg.seed);
    DynaQAgent agent(m.n_states(), m.n_actions(), map, cfg.discount, cfg.planning_steps);
    LearnTrace trace;
    trace.reference_value = reference;
    std::size_t steps = 0;
    for (std::size_t e = 0; e < cfg.episodes; ++e) {
        const Exploration explore = cfg.exploration.at(e);
        std::size_t x = cfg.start_state;
        for (std::size_t s = 0; s < cfg.steps_per_episode; ++s, ++steps) {
            const std::size_t a = select_action(agent.table(), x, explore, Sense::maximize, rng);
            const std::size_t y = sample_transition(m, x, a, rng);
            const double r = utility ? utility(m.reward(x, a)) : m.reward(x, a);
            agent.step({x, a, y, r}, rng);
            x = y;
        }
        trace.records.push_back(detail::evaluate_episode(
            m, map, greedy_policy(agent.table(), Sense::maximize), cfg, reference, e, explore.value,
            steps));
    }
    return {agent.table(), std::move(trace)};
}

/**
 * Runs `trials` independent learners with seeds seed, seed+1, ... and
 * returns the per-episode mean trace plus the first trial's table. Trials
 * may run concurrently; the result does not depend on scheduling.
 */
template <class Learner>
LearnResult run_trials(Learner&& learner, const LearnConfig& cfg, std::size_t trials,
                       std::size_t max_threads = std::thread::hardware_concurrency()) {
    if (trials == 0) throw InvalidInput("need at least one trial");
    std::vector<LearnResult> results(trials);
    const std::size_t workers = std::max<std::size_t>(1, std::min(max_threads, trials));
    std::vector<std::future<void>> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < trials; i += workers) {
                LearnConfig c = cfg;
                c.seed = cfg.seed + i;
                results[i] = learner(c);
            }
        }));
    for (auto& f : pool) f.get();
    std::vector<LearnTrace> traces;
    traces.reserve(trials);
    for (auto& r : results) traces.push_back(std::move(r.trace));
    return {std::move(results.front().table), mean_trace(traces)};
}

} // namespace prospect
