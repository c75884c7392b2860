#pragma once

#include "prospect/errors.hpp"
#include "prospect/mdp.hpp"

#include <algorithm>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace prospect {

/// An MDP plus the labels needed to report its policies.
struct Environment {
    Mdp mdp;
    std::size_t start_state = 0;
    std::vector<std::string> action_labels;
    /// States whose actions are listed in a policy string; empty means all states.
    std::vector<std::size_t> decision_states;
};

/// Comma-separated action labels at the environment's decision states.
inline std::string policy_string(const Environment& env, const PolicyDet& f) {
    std::vector<std::size_t> states = env.decision_states;
    if (states.empty())
        for (std::size_t x = 0; x < f.size(); ++x) states.push_back(x);
    std::string out;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (i) out += ',';
        const std::size_t a = f[states[i]];
        out += a < env.action_labels.size() ? env.action_labels[a] : std::to_string(a);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sequential betting game
// ---------------------------------------------------------------------------

struct BettingGameSpec {
    double win_amount = 100.0;
    double win_prob = 0.05;
    double safe_gain = 5.0;
    double loss_amount = 100.0;
    double loss_prob = 0.05;
    double safe_loss = 5.0;
    double discount = 0.99;
};

namespace betting {
inline constexpr std::size_t gain_decision = 0;
inline constexpr std::size_t won = 1;
inline constexpr std::size_t gain_nothing = 2;
inline constexpr std::size_t loss_decision = 3;
inline constexpr std::size_t lost = 4;
inline constexpr std::size_t loss_nothing = 5;
inline constexpr std::size_t bet = 0;
inline constexpr std::size_t no = 1;
} // namespace betting

/**
 * Six-state cycle: gain decision -> outcome -> loss decision -> outcome -> back.
 *
 * Gambles pay on the single continue action of their outcome state, one
 * step after the decision. The safe options pay at the decision itself and
 * are scaled by the discount so that both options have the same present
 * value at the decision epoch.
 */
inline Environment build_betting_game(const BettingGameSpec& spec) {
    auto in_unit = [](double p) { return p > 0.0 && p < 1.0; };
    if (!in_unit(spec.win_prob) || !in_unit(spec.loss_prob))
        throw InvalidInput("betting probabilities must lie in (0, 1)");
    if (!(spec.win_amount > 0 && spec.safe_gain > 0 && spec.loss_amount > 0 && spec.safe_loss > 0))
        throw InvalidInput("betting amounts must be positive");
    if (!(spec.discount >= 0.0 && spec.discount < 1.0))
        throw InvalidInput("betting discount must lie in [0, 1)");

    using namespace betting;
    constexpr std::size_t n = 6, n_actions = 2;
    std::vector<double> q(n * n_actions * n, 0.0);
    std::vector<double> r(n * n_actions, 0.0);
    auto set = [&](std::size_t x, std::size_t a, std::size_t y, double p) {
        q[(x * n_actions + a) * n + y] = p;
    };
    auto both = [&](std::size_t x, std::size_t y, double reward) {
        for (std::size_t a = 0; a < n_actions; ++a) {
            set(x, a, y, 1.0);
            r[x * n_actions + a] = reward;
        }
    };

    set(gain_decision, bet, won, spec.win_prob);
    set(gain_decision, bet, gain_nothing, 1.0 - spec.win_prob);
    set(gain_decision, no, gain_nothing, 1.0);
    r[gain_decision * n_actions + no] = spec.discount * spec.safe_gain;
    both(won, loss_decision, spec.win_amount);
    both(gain_nothing, loss_decision, 0.0);

    set(loss_decision, bet, lost, spec.loss_prob);
    set(loss_decision, bet, loss_nothing, 1.0 - spec.loss_prob);
    set(loss_decision, no, loss_nothing, 1.0);
    r[loss_decision * n_actions + no] = -spec.discount * spec.safe_loss;
    both(lost, gain_decision, -spec.loss_amount);
    both(loss_nothing, gain_decision, 0.0);

    return Environment{Mdp(n, n_actions, std::move(q), std::move(r)), gain_decision,
                       {"bet", "no"}, {gain_decision, loss_decision}};
}

// ---------------------------------------------------------------------------
// Grid world
// ---------------------------------------------------------------------------

struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
};

/// Eight cells filling the 3x3 block at the lower-left corner, corner excluded.
inline std::vector<Cell> default_danger_ring(int side) {
    std::vector<Cell> out;
    const Cell corner{side - 1, 0};
    for (int dr = 0; dr <= 2; ++dr)
        for (int dc = 0; dc <= 2; ++dc)
            if (dr || dc) out.push_back({corner.row - dr, corner.col + dc});
    return out;
}

struct GridWorldSpec {
    int side = 11;
    double r_small = 3.0;
    double r_large = 15.0;
    double r_danger = -5.0;
    std::vector<Cell> danger_cells = default_danger_ring(11);
    double escape_prob = 0.5;
    Cell start{0, 0};
    Cell small_cell{0, 10};
    Cell large_cell{10, 0};
};

namespace grid {
inline constexpr std::size_t left = 0;
inline constexpr std::size_t right = 1;
inline constexpr std::size_t up = 2;
inline constexpr std::size_t down = 3;
} // namespace grid

inline std::size_t cell_index(const GridWorldSpec& spec, Cell c) {
    return std::size_t(c.row) * std::size_t(spec.side) + std::size_t(c.col);
}

/**
 * side x side grid with four moves; bumping a wall stays put. From a danger
 * cell a move succeeds with probability escape_prob and otherwise stays.
 * Cell rewards are collected on entry (including re-entry by staying), and
 * folded into r(x,a) = sum_y Q(y|x,a) reward(y).
 */
inline Environment build_grid_world(const GridWorldSpec& spec) {
    if (spec.side < 2) throw InvalidInput("grid side must be at least 2");
    if (!(spec.escape_prob > 0.0 && spec.escape_prob <= 1.0))
        throw InvalidInput("escape probability must lie in (0, 1]");
    auto inside = [&](Cell c) { return c.row >= 0 && c.col >= 0 && c.row < spec.side && c.col < spec.side; };
    for (Cell c : {spec.start, spec.small_cell, spec.large_cell})
        if (!inside(c)) throw InvalidInput("special cell outside the grid");
    for (Cell c : spec.danger_cells) {
        if (!inside(c)) throw InvalidInput("danger cell outside the grid");
        if (c == spec.start || c == spec.small_cell || c == spec.large_cell)
            throw InvalidInput("danger cells must exclude the start and reward cells");
    }

    const std::size_t n = std::size_t(spec.side) * std::size_t(spec.side);
    constexpr std::size_t n_actions = 4;
    std::vector<double> cell_reward(n, 0.0);
    std::vector<bool> danger(n, false);
    for (Cell c : spec.danger_cells) {
        cell_reward[cell_index(spec, c)] = spec.r_danger;
        danger[cell_index(spec, c)] = true;
    }
    cell_reward[cell_index(spec, spec.small_cell)] = spec.r_small;
    cell_reward[cell_index(spec, spec.large_cell)] = spec.r_large;

    std::vector<double> q(n * n_actions * n, 0.0);
    std::vector<double> r(n * n_actions, 0.0);
    constexpr int dr[4] = {0, 0, -1, 1};
    constexpr int dc[4] = {-1, 1, 0, 0};
    for (int row = 0; row < spec.side; ++row)
        for (int col = 0; col < spec.side; ++col) {
            const std::size_t x = cell_index(spec, {row, col});
            for (std::size_t a = 0; a < n_actions; ++a) {
                Cell target{row + dr[a], col + dc[a]};
                if (!inside(target)) target = {row, col};
                const std::size_t y = cell_index(spec, target);
                double* qrow = q.data() + (x * n_actions + a) * n;
                if (danger[x] && y != x) {
                    qrow[y] = spec.escape_prob;
                    qrow[x] += 1.0 - spec.escape_prob;
                } else {
                    qrow[y] = 1.0;
                }
                double expected = 0.0;
                for (std::size_t z = 0; z < n; ++z) expected += qrow[z] * cell_reward[z];
                r[x * n_actions + a] = expected;
            }
        }
    return Environment{Mdp(n, n_actions, std::move(q), std::move(r)), cell_index(spec, spec.start),
                       {"L", "R", "U", "D"}, {}};
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct Trajectory {
    std::vector<std::size_t> states;
    std::vector<std::size_t> actions;
    std::vector<double> rewards;
    double total = 0.0;      ///< S_T = sum_t r_t
    double mean = 0.0;       ///< S_T / T
    double discounted = 0.0; ///< sum_t alpha^t r_t
};

namespace detail {

template <class Rng>
std::size_t choose(const PolicyRand& pi, std::size_t x, Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    std::size_t last = 0;
    for (std::size_t a = 0; a < pi.n_actions(); ++a) {
        if (pi(x, a) <= 0.0) continue;
        last = a;
        cumulative += pi(x, a);
        if (u < cumulative) return a;
    }
    return last;
}

template <class Rng>
std::size_t choose(const PolicyDet& f, std::size_t x, Rng&) {
    return f[x];
}

} // namespace detail

/// Rolls `horizon` steps of the chain induced by `policy` from `start`.
template <class Policy, class Rng>
Trajectory simulate(const Mdp& m, const Policy& policy, std::size_t start, std::size_t horizon,
                    double alpha, Rng& rng) {
    check_policy(m, policy);
    if (horizon < 1) throw InvalidInput("simulation horizon must be at least 1");
    if (start >= m.n_states()) throw InvalidInput("start state out of range");
    Trajectory out;
    out.states.reserve(horizon);
    out.actions.reserve(horizon);
    out.rewards.reserve(horizon);
    std::size_t x = start;
    double weight = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        const std::size_t a = detail::choose(policy, x, rng);
        const double r = m.reward(x, a);
        out.states.push_back(x);
        out.actions.push_back(a);
        out.rewards.push_back(r);
        out.total += r;
        out.discounted += weight * r;
        weight *= alpha;
        x = sample_transition(m, x, a, rng);
    }
    out.mean = out.total / double(horizon);
    return out;
}

} // namespace prospect
