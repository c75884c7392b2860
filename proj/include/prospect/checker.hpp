#pragma once

#include "prospect/maps.hpp"
#include "prospect/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace prospect {

/// Concrete counterexample found by a probe.
struct Witness {
    std::size_t state = 0;
    std::size_t action = 0;
    ValueFn v;
    ValueFn w;
    double scalar = 0.0; ///< shift c, scale s or mixing weight beta, depending on the probe
    double lhs = 0.0;
    double rhs = 0.0;

    bool operator==(const Witness&) const = default;
};

struct ProbeResult {
    bool passed = true;
    std::size_t failures = 0;
    double worst_violation = 0.0;
    std::optional<Witness> witness; ///< the worst violation seen

    void record(double violation, double tol, const Witness& w) {
        if (violation <= tol) return;
        passed = false;
        ++failures;
        if (violation > worst_violation) {
            worst_violation = violation;
            witness = w;
        }
    }

    bool operator==(const ProbeResult&) const = default;
};

enum class RiskClass { neutral, averse, seeking, mixed };

inline const char* risk_class_name(RiskClass c) {
    switch (c) {
    case RiskClass::neutral: return "neutral";
    case RiskClass::averse: return "averse";
    case RiskClass::seeking: return "seeking";
    case RiskClass::mixed: return "mixed";
    }
    return "mixed";
}

struct AxiomReport {
    std::string map_kind;
    std::size_t trials = 0;
    double tol = 0.0;

    ProbeResult monotonicity;
    ProbeResult translation;
    ProbeResult centralization;
    ProbeResult homogeneity;
    ProbeResult nonexpansive_sup;
    ProbeResult nonexpansive_hilbert;

    std::vector<RiskClass> state_class;
    RiskClass overall = RiskClass::neutral;

    /// Monotonicity, translation and centralization all held.
    bool axioms_pass() const {
        return monotonicity.passed && translation.passed && centralization.passed;
    }

    bool operator==(const AxiomReport&) const = default;
};

struct CheckOptions {
    std::size_t trials = 1000;
    double tol = 1e-8;
    double value_scale = 10.0; ///< random values are drawn from [-scale, scale]
};

namespace detail {

template <class Rng>
ValueFn random_values(std::size_t n, double scale, Rng& rng) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    ValueFn v(n);
    for (auto& e : v) e = dist(rng);
    return v;
}

template <class Rng>
PolicyRand random_policy(std::size_t n, std::size_t n_actions, Rng& rng) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> p(n * n_actions);
    for (std::size_t x = 0; x < n; ++x) {
        double sum = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) sum += p[x * n_actions + a] = dist(rng);
        for (std::size_t a = 0; a < n_actions; ++a) p[x * n_actions + a] /= sum;
        // force an exact unit row sum
        double tail = 1.0;
        for (std::size_t a = 0; a + 1 < n_actions; ++a) tail -= p[x * n_actions + a];
        p[x * n_actions + n_actions - 1] = std::max(0.0, tail);
    }
    return PolicyRand(n, n_actions, std::move(p));
}

inline RiskClass classify(double min_gap, double max_gap, double tol) {
    const bool concave = min_gap >= -tol;
    const bool convex = max_gap <= tol;
    if (concave && convex) return RiskClass::neutral;
    if (concave) return RiskClass::averse;
    if (convex) return RiskClass::seeking;
    return RiskClass::mixed;
}

} // namespace detail

/**
 * Empirical probe of the prospect-map axioms and related properties on `m`.
 *
 * Each trial draws fresh (v, w, c, s, beta) and a random (x, a); the
 * concavity probe runs over every (x, a) so that each state is classified.
 * Failures are reported as data, never thrown.
 */
template <class Rng>
AxiomReport check_axioms(const ProspectMap& map, const Mdp& m, Rng& rng,
                         const CheckOptions& opt = {}) {
    if (opt.trials < 1) throw InvalidInput("the axiom checker needs at least one trial");
    const std::size_t n = m.n_states();
    const std::size_t n_actions = m.n_actions();
    const double tol = opt.tol;

    AxiomReport report;
    report.map_kind = map.kind();
    report.trials = opt.trials;
    report.tol = tol;

    const ValueFn zero(n, 0.0);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t a = 0; a < n_actions; ++a) {
            const double r0 = prospect(map, m, zero, x, a);
            report.centralization.record(std::abs(r0), tol, {x, a, zero, {}, 0.0, r0, 0.0});
        }

    std::vector<double> min_gap(n, 0.0);
    std::vector<double> max_gap(n, 0.0);

    std::uniform_int_distribution<std::size_t> pick_state(0, n - 1);
    std::uniform_int_distribution<std::size_t> pick_action(0, n_actions - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double scale = opt.value_scale;

    for (std::size_t t = 0; t < opt.trials; ++t) {
        const std::size_t x = pick_state(rng);
        const std::size_t a = pick_action(rng);
        const ValueFn v = detail::random_values(n, scale, rng);
        const double rv = prospect(map, m, v, x, a);

        // monotonicity: w >= v
        ValueFn up = v;
        for (auto& e : up)
            if (unit(rng) < 0.5) e += 0.5 * scale * unit(rng);
        const double rup = prospect(map, m, up, x, a);
        report.monotonicity.record(rv - rup, tol, {x, a, v, up, 0.0, rv, rup});

        // translation
        const double c = scale * (2.0 * unit(rng) - 1.0);
        ValueFn shifted = v;
        for (auto& e : shifted) e += c;
        const double rs = prospect(map, m, shifted, x, a);
        report.translation.record(std::abs(rs - rv - c), tol, {x, a, v, shifted, c, rs, rv + c});

        // positive homogeneity
        const double s = 0.1 + 3.9 * unit(rng);
        ValueFn scaled = v;
        for (auto& e : scaled) e *= s;
        const double rsc = prospect(map, m, scaled, x, a);
        report.homogeneity.record(std::abs(rsc - s * rv), tol * s,
                                  {x, a, v, scaled, s, rsc, s * rv});

        // sup-norm nonexpansiveness
        const ValueFn w = detail::random_values(n, scale, rng);
        const double rw = prospect(map, m, w, x, a);
        const double dist_sup = sup_norm(difference(v, w));
        report.nonexpansive_sup.record(std::abs(rv - rw) - dist_sup, tol,
                                       {x, a, v, w, 0.0, std::abs(rv - rw), dist_sup});

        // Hilbert-seminorm nonexpansiveness of the policy-lifted operator
        const PolicyRand pi = detail::random_policy(n, n_actions, rng);
        const ValueFn lifted = difference(prospect_policy(map, m, v, pi),
                                          prospect_policy(map, m, w, pi));
        const double lhs_h = hilbert_seminorm(lifted);
        const double dist_h = hilbert_seminorm(difference(v, w));
        report.nonexpansive_hilbert.record(lhs_h - dist_h, tol, {0, 0, v, w, 0.0, lhs_h, dist_h});

        // concavity / convexity over every (x, a)
        const double beta = unit(rng);
        ValueFn mix(n);
        for (std::size_t y = 0; y < n; ++y) mix[y] = beta * v[y] + (1.0 - beta) * w[y];
        for (std::size_t xx = 0; xx < n; ++xx)
            for (std::size_t aa = 0; aa < n_actions; ++aa) {
                const double gap = prospect(map, m, mix, xx, aa) -
                                   beta * prospect(map, m, v, xx, aa) -
                                   (1.0 - beta) * prospect(map, m, w, xx, aa);
                min_gap[xx] = std::min(min_gap[xx], gap);
                max_gap[xx] = std::max(max_gap[xx], gap);
            }
    }

    report.state_class.resize(n);
    bool any_averse = false, any_seeking = false, any_mixed = false;
    for (std::size_t x = 0; x < n; ++x) {
        report.state_class[x] = detail::classify(min_gap[x], max_gap[x], tol);
        any_averse |= report.state_class[x] == RiskClass::averse;
        any_seeking |= report.state_class[x] == RiskClass::seeking;
        any_mixed |= report.state_class[x] == RiskClass::mixed;
    }
    if (any_mixed || (any_averse && any_seeking))
        report.overall = RiskClass::mixed;
    else if (any_averse)
        report.overall = RiskClass::averse;
    else if (any_seeking)
        report.overall = RiskClass::seeking;
    else
        report.overall = RiskClass::neutral;
    return report;
}

struct ContractionWitness {
    std::vector<PolicyDet> policies;
    ValueFn u;
    ValueFn v;
    double ratio = 0.0;
};

struct ContractionEstimate {
    double beta_hat = 0.0;
    std::size_t pairs_used = 0; ///< pairs with a non-degenerate seminorm distance
    std::optional<ContractionWitness> worst_witness;
};

/**
 * Largest observed ||R^{f_1..f_K}(u) - R^{f_1..f_K}(v)||_H / ||u - v||_H
 * over random deterministic policy sequences of length K. A value below one
 * is evidence, not proof, of a K-step span contraction.
 */
template <class Rng>
ContractionEstimate estimate_policy_contraction(const ProspectMap& map, const Mdp& m,
                                                std::size_t horizon, std::size_t trials, Rng& rng,
                                                double value_scale = 10.0) {
    if (horizon < 1) throw InvalidInput("contraction probe needs K >= 1");
    const std::size_t n = m.n_states();
    std::uniform_int_distribution<std::size_t> pick_action(0, m.n_actions() - 1);

    ContractionEstimate out;
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<PolicyDet> seq(horizon);
        for (auto& f : seq) {
            f.action_of.resize(n);
            for (auto& a : f.action_of) a = pick_action(rng);
        }
        const ValueFn u = detail::random_values(n, value_scale, rng);
        const ValueFn v = detail::random_values(n, value_scale, rng);
        const double base = hilbert_seminorm(difference(u, v));
        if (base < 1e-12) continue;

        ValueFn ru = u, rv = v;
        for (std::size_t k = horizon; k-- > 0;) {
            ru = prospect_policy(map, m, ru, seq[k]);
            rv = prospect_policy(map, m, rv, seq[k]);
        }
        ++out.pairs_used;
        const double ratio = hilbert_seminorm(difference(ru, rv)) / base;
        if (!out.worst_witness || ratio > out.beta_hat) {
            out.beta_hat = ratio;
            out.worst_witness = ContractionWitness{seq, u, v, ratio};
        }
    }
    return out;
}

} // namespace prospect
