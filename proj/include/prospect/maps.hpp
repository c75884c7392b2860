#pragma once

#include "prospect/curve.hpp"
#include "prospect/errors.hpp"
#include "prospect/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace prospect {

/**
 * One-step prospect operator R(v|x,a).
 *
 * Replaces the conditional expectation in a Bellman backup. Implementations
 * receive the transition row Q(.|x,a) and the successor values v and return
 * a real; they are pure and safe to call concurrently. Valid prospect maps
 * are monotone, translation invariant and centralized; `check_axioms` tests
 * those properties empirically.
 */
class ProspectMap {
public:
    virtual ~ProspectMap() = default;

    virtual std::string kind() const = 0;

    virtual double evaluate(RowView row, std::span<const double> v, std::size_t x,
                            std::size_t a) const = 0;

    /// Transform that solvers apply to immediate rewards. Empty means identity.
    virtual std::function<double(double)> reward_transform() const { return {}; }
};

using MapPtr = std::shared_ptr<const ProspectMap>;

/// R(v|x,a) against the transition model of `m`.
inline double prospect(const ProspectMap& map, const Mdp& m, std::span<const double> v,
                       std::size_t x, std::size_t a) {
    if (v.size() != m.n_states())
        throw DimensionMismatch("value vector has length " + std::to_string(v.size()) +
                                ", MDP has " + std::to_string(m.n_states()) + " states");
    return map.evaluate(m.row_view(x, a), v, x, a);
}

/// R^pi(v|x) = sum_a pi(a|x) R(v|x,a).
inline ValueFn prospect_policy(const ProspectMap& map, const Mdp& m, std::span<const double> v,
                               const PolicyRand& pi) {
    check_policy(m, pi);
    if (v.size() != m.n_states()) throw DimensionMismatch("value vector length mismatch");
    ValueFn out(m.n_states(), 0.0);
    for (std::size_t x = 0; x < m.n_states(); ++x)
        for (std::size_t a = 0; a < m.n_actions(); ++a)
            if (const double p = pi(x, a); p > 0.0)
                out[x] += p * map.evaluate(m.row_view(x, a), v, x, a);
    return out;
}

inline ValueFn prospect_policy(const ProspectMap& map, const Mdp& m, std::span<const double> v,
                               const PolicyDet& f) {
    check_policy(m, f);
    if (v.size() != m.n_states()) throw DimensionMismatch("value vector length mismatch");
    ValueFn out(m.n_states());
    for (std::size_t x = 0; x < m.n_states(); ++x)
        out[x] = map.evaluate(m.row_view(x, f[x]), v, x, f[x]);
    return out;
}

namespace detail {

inline double expectation(RowView row, std::span<const double> v) {
    double out = 0.0;
    for (std::size_t y : row.support) out += row.probs[y] * v[y];
    return out;
}

/// (1/lambda) log sum_y p(y) exp(lambda v(y)), max-shifted.
inline double entropic(RowView row, std::span<const double> v, double lambda) {
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t y : row.support) shift = std::max(shift, lambda * v[y]);
    // log1p/expm1 keep constants exact and small lambda accurate
    double sum = 0.0;
    for (std::size_t y : row.support) sum += row.probs[y] * std::expm1(lambda * v[y] - shift);
    const double out = (shift + std::log1p(sum)) / lambda;
    if (!std::isfinite(out))
        throw NumericOverflow("entropic evaluation left the representable range (lambda = " +
                              std::to_string(lambda) + ")");
    return out;
}

/// Support indices ordered by value; ties keep the lower index first.
inline std::vector<std::size_t> sorted_support(RowView row, std::span<const double> v,
                                               bool descending) {
    std::vector<std::size_t> order(row.support.begin(), row.support.end());
    if (descending)
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t i, std::size_t j) { return v[i] > v[j]; });
    else
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    return order;
}

} // namespace detail

/// Classical conditional expectation; coherent and risk-neutral.
class ExpectationMap final : public ProspectMap {
public:
    std::string kind() const override { return "expectation"; }
    double evaluate(RowView row, std::span<const double> v, std::size_t,
                    std::size_t) const override {
        return detail::expectation(row, v);
    }
};

/// Exponential-utility certainty equivalent; concave for lambda < 0, convex for lambda > 0.
class EntropicMap final : public ProspectMap {
public:
    explicit EntropicMap(double lambda) : lambda_(lambda) {
        if (lambda == 0.0 || !std::isfinite(lambda))
            throw InvalidInput("entropic map needs a finite nonzero lambda; use the "
                               "expectation map for lambda = 0");
    }
    std::string kind() const override { return "entropic"; }
    double lambda() const noexcept { return lambda_; }
    double evaluate(RowView row, std::span<const double> v, std::size_t,
                    std::size_t) const override {
        return detail::entropic(row, v, lambda_);
    }

private:
    double lambda_;
};

/**
 * Worst-case expectation over a finite set of transition kernels.
 *
 * Each kernel is an N x A x N tensor with stochastic rows. The nominal
 * transition row passed to `evaluate` is ignored.
 */
class RobustMap final : public ProspectMap {
public:
    RobustMap(std::size_t n_states, std::size_t n_actions, std::vector<std::vector<double>> kernels)
        : n_states_(n_states), n_actions_(n_actions), kernels_(std::move(kernels)) {
        if (kernels_.empty()) throw InvalidInput("robust map needs at least one kernel");
        for (const auto& k : kernels_) {
            if (k.size() != n_states_ * n_actions_ * n_states_)
                throw DimensionMismatch("robust kernel has the wrong shape");
            detail::check_rows(n_states_, n_actions_, k);
        }
    }

    /// Kernel set {(1-eps) Q + eps e_z : z in X}; its lower envelope is the eps-contamination set.
    static RobustMap contamination(const Mdp& m, double eps) {
        if (!(eps >= 0.0 && eps <= 1.0)) throw InvalidInput("contamination level must be in [0,1]");
        const std::size_t n = m.n_states();
        std::vector<std::vector<double>> kernels;
        kernels.reserve(n);
        for (std::size_t z = 0; z < n; ++z) {
            std::vector<double> k(m.transitions().size());
            for (std::size_t i = 0; i < k.size(); ++i) k[i] = (1.0 - eps) * m.transitions()[i];
            for (std::size_t xa = 0; xa < n * m.n_actions(); ++xa) k[xa * n + z] += eps;
            kernels.push_back(std::move(k));
        }
        return RobustMap(n, m.n_actions(), std::move(kernels));
    }

    std::string kind() const override { return "robust"; }
    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    const std::vector<std::vector<double>>& kernels() const noexcept { return kernels_; }

    double evaluate(RowView, std::span<const double> v, std::size_t x,
                    std::size_t a) const override {
        if (v.size() != n_states_ || x >= n_states_ || a >= n_actions_)
            throw DimensionMismatch("robust kernels do not match the evaluated model");
        double best = std::numeric_limits<double>::infinity();
        for (const auto& k : kernels_) {
            const double* row = k.data() + (x * n_actions_ + a) * n_states_;
            double sum = 0.0;
            for (std::size_t y = 0; y < n_states_; ++y) sum += row[y] * v[y];
            best = std::min(best, sum);
        }
        return best;
    }

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    std::vector<std::vector<double>> kernels_;
};

/// Worst successor value over the support of Q(.|x,a).
class MinimaxMap final : public ProspectMap {
public:
    std::string kind() const override { return "minimax"; }
    double evaluate(RowView row, std::span<const double> v, std::size_t,
                    std::size_t) const override {
        double out = std::numeric_limits<double>::infinity();
        for (std::size_t y : row.support) out = std::min(out, v[y]);
        return out;
    }
};

/**
 * Conditional value at risk at tail level tau: the mean of the worst
 * tau-fraction of successor values,
 *     sup_u { u - (1/tau) E[(u - v)_+] }.
 * Evaluated exactly by sorting the row by value.
 */
class CvarMap final : public ProspectMap {
public:
    explicit CvarMap(double tau) : tau_(tau) {
        if (!(tau > 0.0 && tau <= 1.0)) throw InvalidInput("CVaR level tau must be in (0, 1]");
    }
    std::string kind() const override { return "cvar"; }
    double tau() const noexcept { return tau_; }

    double evaluate(RowView row, std::span<const double> v, std::size_t,
                    std::size_t) const override {
        const auto order = detail::sorted_support(row, v, false);
        double remaining = tau_;
        double acc = 0.0;
        for (std::size_t y : order) {
            const double take = std::min(row.probs[y], remaining);
            acc += take * v[y];
            remaining -= take;
            if (remaining <= 0.0) break;
        }
        if (remaining > 0.0) acc += remaining * v[order.back()];
        return acc / tau_;
    }

private:
    double tau_;
};

/**
 * Mean plus lambda times the one-step semideviation of order r.
 *
 * lambda > 0 rewards the upper semideviation E[(v - mu)_+^r]^(1/r);
 * lambda < 0 penalizes the lower semideviation E[(mu - v)_+^r]^(1/r).
 * Both are monotone for |lambda| <= 1; larger magnitudes are accepted so
 * the axiom checker can exhibit the failure.
 */
class MeanSemideviationMap final : public ProspectMap {
public:
    MeanSemideviationMap(double lambda, double order) : lambda_(lambda), order_(order) {
        if (!std::isfinite(lambda)) throw InvalidInput("semideviation lambda must be finite");
        if (!(order >= 1.0) || !std::isfinite(order))
            throw InvalidInput("semideviation order r must be >= 1");
    }
    std::string kind() const override { return "mean_semideviation"; }
    double lambda() const noexcept { return lambda_; }
    double order() const noexcept { return order_; }

    double evaluate(RowView row, std::span<const double> v, std::size_t,
                    std::size_t) const override {
        const double mean = detail::expectation(row, v);
        if (lambda_ == 0.0) return mean;
        double dev = 0.0;
        for (std::size_t y : row.support) {
            const double gap = lambda_ > 0.0 ? v[y] - mean : mean - v[y];
            if (gap > 0.0) dev += row.probs[y] * std::pow(gap, order_);
        }
        return mean + lambda_ * std::pow(dev, 1.0 / order_);
    }

private:
    double lambda_;
    double order_;
};

/// sum_y w(Q(y|x,a)) u(v(y)). Translation invariant only when w is the identity and u is affine.
class ProbabilityWeightingMap final : public ProspectMap {
public:
    ProbabilityWeightingMap(Curve utility, Curve weighting)
        : utility_(std::move(utility)), weighting_(std::move(weighting)) {
        if (utility_(0.0) != 0.0) throw InvalidInput("utility must satisfy u(0) = 0");
        if (weighting_(0.0) != 0.0 || weighting_(1.0) != 1.0)
            throw InvalidInput("probability weighting must satisfy w(0) = 0 and w(1) = 1");
    }
    std::string kind() const override { return "probability_weighting"; }
    const Curve& utility() const noexcept { return utility_; }
    const Curve& weighting() const noexcept { return weighting_; }

    double evaluate(RowView row, std::span<const double> v, std::size_t,
                    std::size_t) const override {
        double out = 0.0;
        for (std::size_t y : row.support) out += weighting_(row.probs[y]) * utility_(v[y]);
        return out;
    }

    std::function<double(double)> reward_transform() const override {
        if (utility_.is_identity()) return {};
        return [u = utility_](double r) { return u(r); };
    }

private:
    Curve utility_;
    Curve weighting_;
};

/**
 * Discrete Choquet integral for the distorted capacity mu(A) = g(Q(A|x,a)):
 * with successors sorted so that v(1) >= ... >= v(n),
 *     sum_i v(i) [g(P_i) - g(P_{i-1})],  P_i = mass of the top-i successors.
 */
class ChoquetMap final : public ProspectMap {
public:
    explicit ChoquetMap(Curve distortion) : distortion_(std::move(distortion)) {
        if (distortion_(0.0) != 0.0 || distortion_(1.0) != 1.0)
            throw InvalidInput("Choquet distortion must satisfy g(0) = 0 and g(1) = 1");
        double prev = 0.0;
        for (int i = 1; i <= 100; ++i) {
            const double g = distortion_(i / 100.0);
            if (g < prev) throw InvalidInput("Choquet distortion must be nondecreasing");
            prev = g;
        }
    }
    std::string kind() const override { return "choquet"; }
    const Curve& distortion() const noexcept { return distortion_; }

    double evaluate(RowView row, std::span<const double> v, std::size_t,
                    std::size_t) const override {
        const auto order = detail::sorted_support(row, v, true);
        double cumulative = 0.0;
        double prev_g = 0.0;
        double out = 0.0;
        for (std::size_t i = 0; i < order.size(); ++i) {
            cumulative += row.probs[order[i]];
            // the full set always has capacity one
            const double g = i + 1 == order.size() ? 1.0 : distortion_(std::min(cumulative, 1.0));
            out += v[order[i]] * (g - prev_g);
            prev_g = g;
        }
        return out;
    }

private:
    Curve distortion_;
};

/**
 * Entropic map whose sign switches with the outcome: gamma = lambda when
 * E[exp(lambda v)] > 1, otherwise gamma = -lambda. Risk-seeking over gains,
 * risk-averse over losses.
 */
class MixedEntropicMap final : public ProspectMap {
public:
    explicit MixedEntropicMap(double lambda) : lambda_(lambda) {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw InvalidInput("mixed entropic map needs lambda >= 0");
    }
    std::string kind() const override { return "mixed_entropic"; }
    double lambda() const noexcept { return lambda_; }

    double evaluate(RowView row, std::span<const double> v, std::size_t,
                    std::size_t) const override {
        if (lambda_ == 0.0) return detail::expectation(row, v);
        // E[exp(lambda v)] > 1  <=>  entropic_lambda(v) > 0
        const double seeking = detail::entropic(row, v, lambda_);
        if (seeking > 0.0) return seeking;
        return detail::entropic(row, v, -lambda_);
    }

private:
    double lambda_;
};

} // namespace prospect
