#pragma once

#include "prospect/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace prospect {

/// Real vector indexed by state.
using ValueFn = std::vector<double>;

/// Largest deviation of a transition row sum from one that is accepted.
inline constexpr double stochastic_tolerance = 1e-9;

/// A single transition row Q(.|x,a) together with the indices of its support.
struct RowView {
    std::span<const double> probs;
    std::span<const std::size_t> support;
};

/// Dense row-major matrix; used for policy-induced transition matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

inline void check_rows(std::size_t n_states, std::size_t n_actions,
                       std::span<const double> transitions) {
    for (std::size_t x = 0; x < n_states; ++x) {
        for (std::size_t a = 0; a < n_actions; ++a) {
            const double* row = transitions.data() + (x * n_actions + a) * n_states;
            double sum = 0.0;
            bool in_range = true;
            for (std::size_t y = 0; y < n_states; ++y) {
                if (!(row[y] >= 0.0 && row[y] <= 1.0)) in_range = false;
                sum += row[y];
            }
            if (!in_range || !(std::abs(sum - 1.0) <= stochastic_tolerance))
                throw RowNotStochastic(x, a, sum);
        }
    }
}

inline void check_rewards(std::size_t n_states, std::size_t n_actions,
                          std::span<const double> rewards) {
    for (std::size_t x = 0; x < n_states; ++x)
        for (std::size_t a = 0; a < n_actions; ++a)
            if (!std::isfinite(rewards[x * n_actions + a])) throw NonFiniteReward(x, a);
}

} // namespace detail

/**
 * Finite MDP with dense transition tensor Q[x][a][y] and reward table r[x][a].
 *
 * Construction validates every row; an Mdp that exists is always valid.
 * The support of each row is cached so that prospect maps can skip
 * zero-probability successors.
 */
class Mdp {
public:
    Mdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transitions,
        std::vector<double> rewards)
        : n_states_(n_states), n_actions_(n_actions), transitions_(std::move(transitions)),
          rewards_(std::move(rewards)) {
        if (n_states_ == 0 || n_actions_ == 0)
            throw InvalidInput("an MDP needs at least one state and one action");
        if (transitions_.size() != n_states_ * n_actions_ * n_states_)
            throw DimensionMismatch("transition tensor has " +
                                    std::to_string(transitions_.size()) + " entries, expected " +
                                    std::to_string(n_states_ * n_actions_ * n_states_));
        if (rewards_.size() != n_states_ * n_actions_)
            throw DimensionMismatch("reward table has " + std::to_string(rewards_.size()) +
                                    " entries, expected " +
                                    std::to_string(n_states_ * n_actions_));
        detail::check_rows(n_states_, n_actions_, transitions_);
        detail::check_rewards(n_states_, n_actions_, rewards_);
        build_support();
    }

    /// Builds from nested arrays `transitions[x][a][y]` and `rewards[x][a]`.
    static Mdp from_nested(const std::vector<std::vector<std::vector<double>>>& transitions,
                           const std::vector<std::vector<double>>& rewards) {
        const std::size_t n = transitions.size();
        if (n == 0) throw InvalidInput("an MDP needs at least one state");
        const std::size_t n_actions = transitions.front().size();
        std::vector<double> flat_q;
        flat_q.reserve(n * n_actions * n);
        for (std::size_t x = 0; x < n; ++x) {
            if (transitions[x].size() != n_actions)
                throw DimensionMismatch("state " + std::to_string(x) + " has " +
                                        std::to_string(transitions[x].size()) + " actions");
            for (const auto& row : transitions[x]) {
                if (row.size() != n)
                    throw DimensionMismatch("transition row of state " + std::to_string(x) +
                                            " has length " + std::to_string(row.size()));
                flat_q.insert(flat_q.end(), row.begin(), row.end());
            }
        }
        if (rewards.size() != n) throw DimensionMismatch("reward table has wrong state count");
        std::vector<double> flat_r;
        flat_r.reserve(n * n_actions);
        for (const auto& row : rewards) {
            if (row.size() != n_actions)
                throw DimensionMismatch("reward row has wrong action count");
            flat_r.insert(flat_r.end(), row.begin(), row.end());
        }
        return Mdp(n, n_actions, std::move(flat_q), std::move(flat_r));
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }

    double prob(std::size_t x, std::size_t a, std::size_t y) const {
        return transitions_[(x * n_actions_ + a) * n_states_ + y];
    }
    double reward(std::size_t x, std::size_t a) const { return rewards_[x * n_actions_ + a]; }

    std::span<const double> row(std::size_t x, std::size_t a) const {
        return {transitions_.data() + (x * n_actions_ + a) * n_states_, n_states_};
    }
    std::span<const std::size_t> support(std::size_t x, std::size_t a) const {
        const std::size_t k = x * n_actions_ + a;
        return {support_index_.data() + support_offset_[k],
                support_offset_[k + 1] - support_offset_[k]};
    }
    RowView row_view(std::size_t x, std::size_t a) const { return {row(x, a), support(x, a)}; }

    const std::vector<double>& transitions() const noexcept { return transitions_; }
    const std::vector<double>& rewards() const noexcept { return rewards_; }

    bool operator==(const Mdp& other) const {
        return n_states_ == other.n_states_ && n_actions_ == other.n_actions_ &&
               transitions_ == other.transitions_ && rewards_ == other.rewards_;
    }

private:
    void build_support() {
        support_offset_.assign(n_states_ * n_actions_ + 1, 0);
        support_index_.clear();
        for (std::size_t k = 0; k < n_states_ * n_actions_; ++k) {
            for (std::size_t y = 0; y < n_states_; ++y)
                if (transitions_[k * n_states_ + y] > 0.0) support_index_.push_back(y);
            support_offset_[k + 1] = support_index_.size();
        }
    }

    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<double> transitions_;
    std::vector<double> rewards_;
    std::vector<std::size_t> support_offset_;
    std::vector<std::size_t> support_index_;
};

/// Re-checks the row-stochasticity and reward invariants; throws on the first violation.
inline void validate_mdp(const Mdp& m) {
    detail::check_rows(m.n_states(), m.n_actions(), m.transitions());
    detail::check_rewards(m.n_states(), m.n_actions(), m.rewards());
}

/// Deterministic Markov decision rule f: X -> A.
struct PolicyDet {
    std::vector<std::size_t> action_of;

    std::size_t operator[](std::size_t x) const { return action_of[x]; }
    std::size_t size() const noexcept { return action_of.size(); }
    bool operator==(const PolicyDet&) const = default;
};

/// Randomized Markov decision rule pi(a|x), stored as an N x A matrix.
class PolicyRand {
public:
    PolicyRand(std::size_t n_states, std::size_t n_actions, std::vector<double> probs)
        : probs_(n_states, n_actions) {
        if (probs.size() != n_states * n_actions)
            throw DimensionMismatch("policy has " + std::to_string(probs.size()) +
                                    " entries, expected " +
                                    std::to_string(n_states * n_actions));
        for (std::size_t x = 0; x < n_states; ++x) {
            double sum = 0.0;
            for (std::size_t a = 0; a < n_actions; ++a) {
                const double p = probs[x * n_actions + a];
                if (!(p >= 0.0 && p <= 1.0))
                    throw InvalidInput("policy probability out of [0,1] at state " +
                                       std::to_string(x));
                probs_(x, a) = p;
                sum += p;
            }
            if (!(std::abs(sum - 1.0) <= stochastic_tolerance))
                throw InvalidInput("policy row " + std::to_string(x) +
                                   " does not sum to one: " + std::to_string(sum));
        }
    }

    static PolicyRand from_deterministic(const PolicyDet& f, std::size_t n_actions) {
        std::vector<double> p(f.size() * n_actions, 0.0);
        for (std::size_t x = 0; x < f.size(); ++x) {
            if (f[x] >= n_actions) throw InvalidInput("action index out of range");
            p[x * n_actions + f[x]] = 1.0;
        }
        return PolicyRand(f.size(), n_actions, std::move(p));
    }

    static PolicyRand uniform(std::size_t n_states, std::size_t n_actions) {
        return PolicyRand(n_states, n_actions,
                          std::vector<double>(n_states * n_actions, 1.0 / double(n_actions)));
    }

    std::size_t n_states() const noexcept { return probs_.rows(); }
    std::size_t n_actions() const noexcept { return probs_.cols(); }
    double operator()(std::size_t x, std::size_t a) const { return probs_(x, a); }
    std::span<const double> row(std::size_t x) const { return probs_.row(x); }

private:
    Matrix probs_;
};

inline void check_policy(const Mdp& m, const PolicyRand& pi) {
    if (pi.n_states() != m.n_states() || pi.n_actions() != m.n_actions())
        throw DimensionMismatch("policy shape does not match the MDP");
}

inline void check_policy(const Mdp& m, const PolicyDet& f) {
    if (f.size() != m.n_states()) throw DimensionMismatch("policy length does not match the MDP");
    for (std::size_t x = 0; x < f.size(); ++x)
        if (f[x] >= m.n_actions())
            throw InvalidInput("policy action out of range at state " + std::to_string(x));
}

/// Reward vector and transition matrix induced by a randomized decision rule.
struct PolicyInduced {
    ValueFn reward;
    Matrix transition;
};

inline PolicyInduced apply_policy(const Mdp& m, const PolicyRand& pi) {
    check_policy(m, pi);
    const std::size_t n = m.n_states();
    PolicyInduced out{ValueFn(n, 0.0), Matrix(n, n)};
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t a = 0; a < m.n_actions(); ++a) {
            const double p = pi(x, a);
            if (p == 0.0) continue;
            out.reward[x] += p * m.reward(x, a);
            for (std::size_t y : m.support(x, a)) out.transition(x, y) += p * m.prob(x, a, y);
        }
    }
    return out;
}

inline double sup_norm(std::span<const double> v) {
    double out = 0.0;
    for (double e : v) out = std::max(out, std::abs(e));
    return out;
}

/// max_x v(x) - min_x v(x); zero exactly on constant vectors.
inline double hilbert_seminorm(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
}

inline ValueFn difference(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw DimensionMismatch("vector lengths differ");
    ValueFn out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] - v[i];
    return out;
}

/// Draws y ~ Q(.|x,a) by inverse CDF over one uniform draw.
template <class Rng>
std::size_t sample_transition(const Mdp& m, std::size_t x, std::size_t a, Rng& rng) {
    const auto support = m.support(x, a);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double cumulative = 0.0;
    for (std::size_t y : support) {
        cumulative += m.prob(x, a, y);
        if (u < cumulative) return y;
    }
    // u landed in the rounding gap above the last cumulative sum
    return support.back();
}

} // namespace prospect
