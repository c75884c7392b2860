#pragma once

#include "prospect/errors.hpp"
#include "prospect/maps.hpp"
#include "prospect/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace prospect {

/// Applied to every immediate reward r(x,a) before a backup; empty means identity.
using RewardTransform = std::function<double(double)>;

inline constexpr std::size_t default_max_iter_discounted = 100000;
inline constexpr std::size_t default_max_iter_average = 1000000;

struct SolveResult {
    ValueFn value;
    PolicyDet policy;
    std::size_t iterations = 0;
    std::vector<double> residuals; ///< sup-norm of v_{t+1} - v_t per iteration
    bool converged = false;
    double discount = 0.0;
    double epsilon = 0.0;
    /// Guaranteed ||value - J*||_inf on convergence: epsilon * alpha / (1 - alpha).
    double optimality_bound = 0.0;

    bool operator==(const SolveResult&) const = default;
};

struct AverageSolveResult {
    double gain = 0.0;
    ValueFn bias; ///< normalized so that bias[0] == 0
    PolicyDet policy;
    std::size_t iterations = 0;
    std::vector<double> residuals; ///< Hilbert seminorm of v_{t+1} - v_t per iteration
    bool converged = false;
    double epsilon = 0.0;
    double gain_bound = 0.0;    ///< gain lies within this distance of the optimal gain
    double apoe_residual = 0.0; ///< ||F(h) - h - gain||_inf

    bool operator==(const AverageSolveResult&) const = default;
};

struct FiniteStageResult {
    std::vector<ValueFn> stage_values;     ///< stage_values[t] = V_t, t = 0..T
    std::vector<PolicyDet> stage_policies; ///< greedy decision rule at stage t

    std::size_t horizon() const noexcept { return stage_values.empty() ? 0 : stage_values.size() - 1; }
    bool operator==(const FiniteStageResult&) const = default;
};

/// Result of one maximizing backup.
struct Backup {
    ValueFn value;
    PolicyDet greedy;
};

namespace detail {

inline std::vector<double> effective_rewards(const Mdp& m, const ProspectMap& map,
                                             const RewardTransform& transform) {
    const RewardTransform& u = transform ? transform : map.reward_transform();
    std::vector<double> out = m.rewards();
    if (u)
        for (auto& r : out) {
            r = u(r);
            if (!std::isfinite(r)) throw InvalidInput("reward transform produced a non-finite value");
        }
    return out;
}

/// max_a { r(x,a) + factor * R(v|x,a) }, ties to the lowest action index.
inline Backup backup(const Mdp& m, const ProspectMap& map, double factor,
                     std::span<const double> v, const std::vector<double>& rewards) {
    if (v.size() != m.n_states()) throw DimensionMismatch("value vector length mismatch");
    const std::size_t n_actions = m.n_actions();
    Backup out{ValueFn(m.n_states()), PolicyDet{std::vector<std::size_t>(m.n_states(), 0)}};
    for (std::size_t x = 0; x < m.n_states(); ++x) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t a = 0; a < n_actions; ++a) {
            const double q = rewards[x * n_actions + a] +
                             factor * map.evaluate(m.row_view(x, a), v, x, a);
            if (q > best) {
                best = q;
                arg = a;
            }
        }
        out.value[x] = best;
        out.greedy.action_of[x] = arg;
    }
    return out;
}

inline void check_discount(double alpha) {
    if (!(alpha >= 0.0 && alpha < 1.0))
        throw InvalidInput("discount must lie in [0, 1), got " + std::to_string(alpha));
}

} // namespace detail

/// q(x,a) = r(x,a) + alpha R(v|x,a) for every pair.
inline Matrix action_values(const Mdp& m, const ProspectMap& map, double alpha,
                            std::span<const double> v, const RewardTransform& transform = {}) {
    if (v.size() != m.n_states()) throw DimensionMismatch("value vector length mismatch");
    const auto rewards = detail::effective_rewards(m, map, transform);
    Matrix q(m.n_states(), m.n_actions());
    for (std::size_t x = 0; x < m.n_states(); ++x)
        for (std::size_t a = 0; a < m.n_actions(); ++a)
            q(x, a) = rewards[x * m.n_actions() + a] + alpha * prospect(map, m, v, x, a);
    return q;
}

/**
 * Backward dynamic programming for the T-stage total prospect:
 * V_T = max_a r, V_t = max_a { r + R(V_{t+1}) }. V_0 is the optimal value.
 */
inline FiniteStageResult finite_stage_dp(const Mdp& m, const ProspectMap& map, std::size_t horizon,
                                         const RewardTransform& transform = {}) {
    const auto rewards = detail::effective_rewards(m, map, transform);
    FiniteStageResult out;
    out.stage_values.resize(horizon + 1);
    out.stage_policies.resize(horizon + 1);

    // V_T(x) = max_a r(x,a)
    Backup last{ValueFn(m.n_states()), PolicyDet{std::vector<std::size_t>(m.n_states(), 0)}};
    for (std::size_t x = 0; x < m.n_states(); ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < m.n_actions(); ++a)
            if (const double r = rewards[x * m.n_actions() + a]; r > best) {
                best = r;
                last.greedy.action_of[x] = a;
            }
        last.value[x] = best;
    }
    out.stage_values[horizon] = last.value;
    out.stage_policies[horizon] = last.greedy;
    for (std::size_t t = horizon; t-- > 0;) {
        auto b = detail::backup(m, map, 1.0, out.stage_values[t + 1], rewards);
        out.stage_values[t] = std::move(b.value);
        out.stage_policies[t] = std::move(b.greedy);
    }
    return out;
}

/// F_alpha(v)(x) = max_a { r(x,a) + alpha R(v|x,a) } and its greedy decision rule.
inline Backup bellman_discounted(const Mdp& m, const ProspectMap& map, double alpha,
                                 std::span<const double> v, const RewardTransform& transform = {}) {
    detail::check_discount(alpha);
    return detail::backup(m, map, alpha, v, detail::effective_rewards(m, map, transform));
}

/**
 * Value iteration for the discounted total prospect.
 *
 * Stops when ||v_{t+1} - v_t||_inf < epsilon. F_alpha is an alpha-contraction
 * in sup-norm for every prospect map, so on convergence the returned value is
 * within epsilon * alpha / (1 - alpha) of the optimum.
 */
inline SolveResult value_iteration_discounted(const Mdp& m, const ProspectMap& map, double alpha,
                                              ValueFn v0, double epsilon,
                                              std::size_t max_iter = default_max_iter_discounted,
                                              const RewardTransform& transform = {}) {
    detail::check_discount(alpha);
    if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
    if (v0.empty()) v0.assign(m.n_states(), 0.0);
    if (v0.size() != m.n_states()) throw DimensionMismatch("initial value length mismatch");
    const auto rewards = detail::effective_rewards(m, map, transform);

    SolveResult out;
    out.discount = alpha;
    out.epsilon = epsilon;
    out.optimality_bound = epsilon * alpha / (1.0 - alpha);
    out.value = std::move(v0);
    out.policy.action_of.assign(m.n_states(), 0);
    for (std::size_t it = 0; it < max_iter; ++it) {
        Backup b = detail::backup(m, map, alpha, out.value, rewards);
        const double residual = sup_norm(difference(b.value, out.value));
        out.residuals.push_back(residual);
        out.value = std::move(b.value);
        out.policy = std::move(b.greedy);
        out.iterations = it + 1;
        if (residual < epsilon) {
            out.converged = true;
            break;
        }
    }
    return out;
}

namespace detail {

template <class Policy>
ValueFn evaluate_policy(const Mdp& m, const ProspectMap& map, double alpha, const Policy& pi,
                        const ValueFn& reward, double epsilon, std::size_t max_iter) {
    ValueFn v(m.n_states(), 0.0);
    for (std::size_t it = 0; it < max_iter; ++it) {
        ValueFn next = prospect_policy(map, m, v, pi);
        for (std::size_t x = 0; x < next.size(); ++x) next[x] = reward[x] + alpha * next[x];
        const double residual = sup_norm(difference(next, v));
        v = std::move(next);
        if (residual < epsilon) return v;
    }
    throw NotConverged<ValueFn>("policy evaluation did not converge in " +
                                    std::to_string(max_iter) + " iterations",
                                v);
}

} // namespace detail

/**
 * Discounted total prospect J_alpha(pi^inf) of a stationary policy, by
 * iterating v <- r_pi + alpha R^pi(v) from v = 0. Throws NotConverged with
 * the last iterate when max_iter is exhausted.
 */
inline ValueFn evaluate_policy_discounted(const Mdp& m, const ProspectMap& map, double alpha,
                                          const PolicyRand& pi, double epsilon,
                                          std::size_t max_iter = default_max_iter_discounted,
                                          const RewardTransform& transform = {}) {
    detail::check_discount(alpha);
    check_policy(m, pi);
    const auto rewards = detail::effective_rewards(m, map, transform);
    ValueFn r_pi(m.n_states(), 0.0);
    for (std::size_t x = 0; x < m.n_states(); ++x)
        for (std::size_t a = 0; a < m.n_actions(); ++a)
            r_pi[x] += pi(x, a) * rewards[x * m.n_actions() + a];
    return detail::evaluate_policy(m, map, alpha, pi, r_pi, epsilon, max_iter);
}

inline ValueFn evaluate_policy_discounted(const Mdp& m, const ProspectMap& map, double alpha,
                                          const PolicyDet& f, double epsilon,
                                          std::size_t max_iter = default_max_iter_discounted,
                                          const RewardTransform& transform = {}) {
    detail::check_discount(alpha);
    check_policy(m, f);
    const auto rewards = detail::effective_rewards(m, map, transform);
    ValueFn r_f(m.n_states());
    for (std::size_t x = 0; x < m.n_states(); ++x) r_f[x] = rewards[x * m.n_actions() + f[x]];
    return detail::evaluate_policy(m, map, alpha, f, r_f, epsilon, max_iter);
}

/// Undiscounted backup F(v)(x) = max_a { r(x,a) + R(v|x,a) }.
inline Backup bellman_average(const Mdp& m, const ProspectMap& map, std::span<const double> v,
                              const RewardTransform& transform = {}) {
    return detail::backup(m, map, 1.0, v, detail::effective_rewards(m, map, transform));
}

/**
 * Relative value iteration for the average prospect.
 *
 * Iterates v_{t+1} = F(v_t), re-anchored so that v(0) = 0 after every step,
 * and stops when the Hilbert seminorm of the difference F(v_t) - v_t drops
 * below epsilon. The gain is the midpoint of that final difference vector,
 * the bias is the anchored iterate. Convergence needs a K-step span
 * contraction; see estimate_policy_contraction.
 */
inline AverageSolveResult value_iteration_average(const Mdp& m, const ProspectMap& map, ValueFn v0,
                                                  double epsilon,
                                                  std::size_t max_iter = default_max_iter_average,
                                                  const RewardTransform& transform = {}) {
    if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
    if (v0.empty()) v0.assign(m.n_states(), 0.0);
    if (v0.size() != m.n_states()) throw DimensionMismatch("initial value length mismatch");
    const auto rewards = detail::effective_rewards(m, map, transform);

    AverageSolveResult out;
    out.epsilon = epsilon;
    ValueFn v = std::move(v0);
    const double anchor0 = v[0];
    for (auto& e : v) e -= anchor0;
    ValueFn delta(m.n_states(), 0.0);
    for (std::size_t it = 0; it < max_iter; ++it) {
        Backup b = detail::backup(m, map, 1.0, v, rewards);
        delta = difference(b.value, v);
        const double residual = hilbert_seminorm(delta);
        out.residuals.push_back(residual);
        const double anchor = b.value[0];
        for (auto& e : b.value) e -= anchor;
        v = std::move(b.value);
        out.policy = std::move(b.greedy);
        out.iterations = it + 1;
        if (residual < epsilon) {
            out.converged = true;
            break;
        }
    }
    const auto [lo, hi] = std::minmax_element(delta.begin(), delta.end());
    out.gain = 0.5 * (*hi + *lo);
    out.gain_bound = 0.5 * (*hi - *lo);
    out.bias = v;
    const Backup check = detail::backup(m, map, 1.0, v, rewards);
    double apoe = 0.0;
    for (std::size_t x = 0; x < v.size(); ++x)
        apoe = std::max(apoe, std::abs(check.value[x] - v[x] - out.gain));
    out.apoe_residual = apoe;
    return out;
}

/**
 * Q'(.|x,a) = (1 - kappa) Q(.|x,a) + kappa e_x, rewards unchanged.
 *
 * Makes every chain aperiodic. For the expectation map this preserves the
 * optimal average-reward policy and gain; for other maps it is only a
 * regularizer.
 */
inline Mdp aperiodicity_transform(const Mdp& m, double kappa) {
    if (!(kappa >= 0.0 && kappa < 1.0))
        throw InvalidInput("aperiodicity weight kappa must lie in [0, 1)");
    const std::size_t n = m.n_states();
    std::vector<double> q = m.transitions();
    for (auto& p : q) p *= 1.0 - kappa;
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t a = 0; a < m.n_actions(); ++a) q[(x * m.n_actions() + a) * n + x] += kappa;
    return Mdp(n, m.n_actions(), std::move(q), m.rewards());
}

} // namespace prospect
