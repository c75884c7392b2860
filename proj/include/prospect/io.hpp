#pragma once

#include "prospect/checker.hpp"
#include "prospect/curve.hpp"
#include "prospect/environments.hpp"
#include "prospect/errors.hpp"
#include "prospect/learning.hpp"
#include "prospect/maps.hpp"
#include "prospect/mdp.hpp"
#include "prospect/solvers.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace prospect {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Numbers and CSV
// ---------------------------------------------------------------------------

/// 12 significant digits; the CSV contract.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

struct SweepRow {
    double param_value = 0.0;
    double start_state_value = 0.0;
    std::string policy_string; ///< action labels, or an error code when the row failed
    std::size_t iterations = 0;
    bool converged = false;
};

inline constexpr const char* sweep_csv_header = "param_value,start_state_value,policy_string,iterations,converged";
inline constexpr const char* trace_csv_header = "episode,v1,abs_error,epsilon,steps";

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << sweep_csv_header << '\n';
    for (const auto& r : rows)
        os << format_number(r.param_value) << ',' << format_number(r.start_state_value) << ','
           << csv_quote(r.policy_string) << ',' << r.iterations << ',' << (r.converged ? "true" : "false")
           << '\n';
}

inline void write_trace_csv(std::ostream& os, const LearnTrace& trace) {
    os << trace_csv_header << '\n';
    for (const auto& r : trace.records)
        os << r.episode << ',' << format_number(r.v1) << ',' << format_number(r.abs_error) << ','
           << format_number(r.exploration) << ',' << format_number(r.steps) << '\n';
}

// ---------------------------------------------------------------------------
// Model types
// ---------------------------------------------------------------------------

inline void to_json(json& j, const Mdp& m) {
    json q = json::array(), r = json::array();
    for (std::size_t x = 0; x < m.n_states(); ++x) {
        json qx = json::array(), rx = json::array();
        for (std::size_t a = 0; a < m.n_actions(); ++a) {
            const auto row = m.row(x, a);
            qx.push_back(std::vector<double>(row.begin(), row.end()));
            rx.push_back(m.reward(x, a));
        }
        q.push_back(std::move(qx));
        r.push_back(std::move(rx));
    }
    j = json{{"n_states", m.n_states()}, {"n_actions", m.n_actions()}, {"transitions", q}, {"rewards", r}};
}

/// {"transitions": [x][a][y], "rewards": [x][a]}; the size fields are optional cross-checks.
inline Mdp mdp_from_json(const json& j) {
    if (!j.is_object() || !j.contains("transitions") || !j.contains("rewards"))
        throw ParseError("an MDP needs 'transitions' and 'rewards'");
    Mdp m = Mdp::from_nested(j.at("transitions").get<std::vector<std::vector<std::vector<double>>>>(),
                             j.at("rewards").get<std::vector<std::vector<double>>>());
    if (j.contains("n_states") && j.at("n_states").get<std::size_t>() != m.n_states())
        throw DimensionMismatch("n_states disagrees with the transition tensor");
    if (j.contains("n_actions") && j.at("n_actions").get<std::size_t>() != m.n_actions())
        throw DimensionMismatch("n_actions disagrees with the transition tensor");
    return m;
}

inline void to_json(json& j, const PolicyDet& f) { j = f.action_of; }
inline void from_json(const json& j, PolicyDet& f) { f.action_of = j.get<std::vector<std::size_t>>(); }

// ---------------------------------------------------------------------------
// Curves and map descriptors
// ---------------------------------------------------------------------------

inline json curve_to_json(const Curve& c) {
    switch (c.family()) {
    case Curve::Family::identity: return {{"family", "identity"}};
    case Curve::Family::inverse_s: return {{"family", "inverse_s"}, {"gamma", c.parameter()}};
    case Curve::Family::power: return {{"family", "power"}, {"exponent", c.parameter()}};
    case Curve::Family::table: {
        json pts = json::array();
        for (const auto& [x, y] : c.points()) pts.push_back({x, y});
        return {{"family", "table"}, {"points", pts}};
    }
    case Curve::Family::custom: break;
    }
    throw InvalidInput("custom curve '" + c.label() + "' has no JSON form");
}

inline Curve curve_from_json(const json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "identity") return Curve::identity();
    if (family == "inverse_s") return Curve::inverse_s(j.at("gamma").get<double>());
    if (family == "power") return Curve::power(j.at("exponent").get<double>());
    if (family == "table") {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : j.at("points")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        return Curve::table(std::move(pts));
    }
    throw InvalidInput("unknown curve family '" + family + "'");
}

/// Numeric keys of a map descriptor that a sweep may vary.
inline std::set<std::string> sweepable_parameters(const std::string& kind) {
    if (kind == "entropic" || kind == "mixed_entropic") return {"lambda"};
    if (kind == "cvar") return {"tau"};
    if (kind == "robust") return {"contamination"};
    if (kind == "mean_semideviation") return {"lambda", "order"};
    return {};
}

/**
 * Builds a map from its descriptor, e.g. {"kind": "entropic", "lambda": -0.5}.
 * Robust maps take either "contamination" or explicit "kernels" shaped like
 * the MDP's transition tensor.
 */
inline MapPtr make_map(const json& d, const Mdp& m) {
    if (!d.is_object() || !d.contains("kind")) throw InvalidInput("map descriptor needs a 'kind'");
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "expectation") return std::make_shared<ExpectationMap>();
    if (kind == "entropic") return std::make_shared<EntropicMap>(d.at("lambda").get<double>());
    if (kind == "mixed_entropic") return std::make_shared<MixedEntropicMap>(d.at("lambda").get<double>());
    if (kind == "minimax") return std::make_shared<MinimaxMap>();
    if (kind == "cvar") return std::make_shared<CvarMap>(d.at("tau").get<double>());
    if (kind == "mean_semideviation")
        return std::make_shared<MeanSemideviationMap>(d.at("lambda").get<double>(), d.value("order", 1.0));
    if (kind == "robust") {
        if (d.contains("contamination"))
            return std::make_shared<RobustMap>(RobustMap::contamination(m, d.at("contamination").get<double>()));
        std::vector<std::vector<double>> kernels;
        for (const auto& k : d.at("kernels")) {
            std::vector<double> flat;
            for (const auto& qx : k)
                for (const auto& qa : qx)
                    for (double p : qa.get<std::vector<double>>()) flat.push_back(p);
            kernels.push_back(std::move(flat));
        }
        return std::make_shared<RobustMap>(m.n_states(), m.n_actions(), std::move(kernels));
    }
    if (kind == "probability_weighting") {
        const Curve u = d.contains("utility") ? curve_from_json(d.at("utility")) : Curve::identity();
        const Curve w = d.contains("weighting") ? curve_from_json(d.at("weighting")) : Curve::identity();
        return std::make_shared<ProbabilityWeightingMap>(u, w);
    }
    if (kind == "choquet") return std::make_shared<ChoquetMap>(curve_from_json(d.at("distortion")));
    throw InvalidInput("unknown map kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

inline void to_json(json& j, const SolveResult& r) {
    j = json{{"criterion", "discounted"}, {"value", r.value},         {"policy", r.policy},
             {"iterations", r.iterations}, {"residuals", r.residuals}, {"converged", r.converged},
             {"discount", r.discount},   {"epsilon", r.epsilon},     {"optimality_bound", r.optimality_bound}};
}
inline void from_json(const json& j, SolveResult& r) {
    j.at("value").get_to(r.value);
    j.at("policy").get_to(r.policy);
    j.at("iterations").get_to(r.iterations);
    j.at("residuals").get_to(r.residuals);
    j.at("converged").get_to(r.converged);
    j.at("discount").get_to(r.discount);
    j.at("epsilon").get_to(r.epsilon);
    j.at("optimality_bound").get_to(r.optimality_bound);
}

inline void to_json(json& j, const AverageSolveResult& r) {
    j = json{{"criterion", "average"},   {"gain", r.gain},           {"bias", r.bias},
             {"policy", r.policy},       {"iterations", r.iterations}, {"residuals", r.residuals},
             {"converged", r.converged}, {"epsilon", r.epsilon},     {"gain_bound", r.gain_bound},
             {"apoe_residual", r.apoe_residual}};
}
inline void from_json(const json& j, AverageSolveResult& r) {
    j.at("gain").get_to(r.gain);
    j.at("bias").get_to(r.bias);
    j.at("policy").get_to(r.policy);
    j.at("iterations").get_to(r.iterations);
    j.at("residuals").get_to(r.residuals);
    j.at("converged").get_to(r.converged);
    j.at("epsilon").get_to(r.epsilon);
    j.at("gain_bound").get_to(r.gain_bound);
    j.at("apoe_residual").get_to(r.apoe_residual);
}

inline void to_json(json& j, const FiniteStageResult& r) {
    j = json{{"criterion", "finite"}, {"horizon", r.horizon()}, {"stage_values", r.stage_values},
             {"stage_policies", r.stage_policies}};
}
inline void from_json(const json& j, FiniteStageResult& r) {
    j.at("stage_values").get_to(r.stage_values);
    j.at("stage_policies").get_to(r.stage_policies);
}

inline void to_json(json& j, const Witness& w) {
    j = json{{"state", w.state}, {"action", w.action}, {"v", w.v},     {"w", w.w},
             {"scalar", w.scalar}, {"lhs", w.lhs},     {"rhs", w.rhs}};
}
inline void from_json(const json& j, Witness& w) {
    j.at("state").get_to(w.state);
    j.at("action").get_to(w.action);
    j.at("v").get_to(w.v);
    j.at("w").get_to(w.w);
    j.at("scalar").get_to(w.scalar);
    j.at("lhs").get_to(w.lhs);
    j.at("rhs").get_to(w.rhs);
}

inline void to_json(json& j, const ProbeResult& p) {
    j = json{{"passed", p.passed}, {"failures", p.failures}, {"worst_violation", p.worst_violation}};
    j["witness"] = p.witness ? json(*p.witness) : json(nullptr);
}
inline void from_json(const json& j, ProbeResult& p) {
    j.at("passed").get_to(p.passed);
    j.at("failures").get_to(p.failures);
    j.at("worst_violation").get_to(p.worst_violation);
    if (j.at("witness").is_null())
        p.witness.reset();
    else
        p.witness = j.at("witness").get<Witness>();
}

inline RiskClass risk_class_from_name(const std::string& s) {
    for (RiskClass c : {RiskClass::neutral, RiskClass::averse, RiskClass::seeking, RiskClass::mixed})
        if (s == risk_class_name(c)) return c;
    throw ParseError("unknown risk class '" + s + "'");
}

inline void to_json(json& j, const AxiomReport& r) {
    std::vector<std::string> classes;
    for (RiskClass c : r.state_class) classes.emplace_back(risk_class_name(c));
    j = json{{"map_kind", r.map_kind},
             {"trials", r.trials},
             {"tol", r.tol},
             {"axioms_pass", r.axioms_pass()},
             {"monotonicity", r.monotonicity},
             {"translation", r.translation},
             {"centralization", r.centralization},
             {"homogeneous", r.homogeneity.passed},
             {"homogeneity", r.homogeneity},
             {"nonexpansive_sup", r.nonexpansive_sup},
             {"nonexpansive_hilbert", r.nonexpansive_hilbert},
             {"state_class", classes},
             {"overall", risk_class_name(r.overall)}};
}
inline void from_json(const json& j, AxiomReport& r) {
    j.at("map_kind").get_to(r.map_kind);
    j.at("trials").get_to(r.trials);
    j.at("tol").get_to(r.tol);
    j.at("monotonicity").get_to(r.monotonicity);
    j.at("translation").get_to(r.translation);
    j.at("centralization").get_to(r.centralization);
    j.at("homogeneity").get_to(r.homogeneity);
    j.at("nonexpansive_sup").get_to(r.nonexpansive_sup);
    j.at("nonexpansive_hilbert").get_to(r.nonexpansive_hilbert);
    r.state_class.clear();
    for (const auto& s : j.at("state_class")) r.state_class.push_back(risk_class_from_name(s.get<std::string>()));
    r.overall = risk_class_from_name(j.at("overall").get<std::string>());
}

inline void to_json(json& j, const QTable& t) {
    json rows = json::array();
    for (std::size_t x = 0; x < t.n_states; ++x) {
        const auto row = t.row(x);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j = json{{"space", t.space == QSpace::wspace ? "wspace" : "vspace"}, {"q", rows}};
}
inline void from_json(const json& j, QTable& t) {
    const auto rows = j.at("q").get<std::vector<std::vector<double>>>();
    const std::string space = j.at("space").get<std::string>();
    if (space != "wspace" && space != "vspace") throw ParseError("unknown Q-table space '" + space + "'");
    t.space = space == "wspace" ? QSpace::wspace : QSpace::vspace;
    t.n_states = rows.size();
    t.n_actions = rows.empty() ? 0 : rows.front().size();
    t.q.clear();
    for (const auto& r : rows) {
        if (r.size() != t.n_actions) throw DimensionMismatch("ragged Q-table");
        t.q.insert(t.q.end(), r.begin(), r.end());
    }
}

// ---------------------------------------------------------------------------
// Environment specs
// ---------------------------------------------------------------------------

inline void to_json(json& j, const Cell& c) { j = json::array({c.row, c.col}); }
inline void from_json(const json& j, Cell& c) {
    if (!j.is_array() || j.size() != 2) throw ParseError("a cell is a [row, col] pair");
    c.row = j.at(0).get<int>();
    c.col = j.at(1).get<int>();
}

inline void to_json(json& j, const BettingGameSpec& s) {
    j = json{{"win_amount", s.win_amount},   {"win_prob", s.win_prob},   {"safe_gain", s.safe_gain},
             {"loss_amount", s.loss_amount}, {"loss_prob", s.loss_prob}, {"safe_loss", s.safe_loss},
             {"discount", s.discount}};
}
/// Missing fields keep their defaults.
inline void from_json(const json& j, BettingGameSpec& s) {
    s.win_amount = j.value("win_amount", s.win_amount);
    s.win_prob = j.value("win_prob", s.win_prob);
    s.safe_gain = j.value("safe_gain", s.safe_gain);
    s.loss_amount = j.value("loss_amount", s.loss_amount);
    s.loss_prob = j.value("loss_prob", s.loss_prob);
    s.safe_loss = j.value("safe_loss", s.safe_loss);
    s.discount = j.value("discount", s.discount);
}

inline void to_json(json& j, const GridWorldSpec& s) {
    j = json{{"side", s.side},
             {"r_small", s.r_small},
             {"r_large", s.r_large},
             {"r_danger", s.r_danger},
             {"danger_cells", s.danger_cells},
             {"escape_prob", s.escape_prob},
             {"start", s.start},
             {"small_cell", s.small_cell},
             {"large_cell", s.large_cell}};
}
/// Missing fields keep their defaults; the default cells follow `side`.
inline void from_json(const json& j, GridWorldSpec& s) {
    s.side = j.value("side", s.side);
    s.r_small = j.value("r_small", s.r_small);
    s.r_large = j.value("r_large", s.r_large);
    s.r_danger = j.value("r_danger", s.r_danger);
    s.escape_prob = j.value("escape_prob", s.escape_prob);
    s.danger_cells = j.contains("danger_cells") ? j.at("danger_cells").get<std::vector<Cell>>()
                                                : default_danger_ring(s.side);
    s.start = j.contains("start") ? j.at("start").get<Cell>() : Cell{0, 0};
    s.small_cell = j.contains("small_cell") ? j.at("small_cell").get<Cell>() : Cell{0, s.side - 1};
    s.large_cell = j.contains("large_cell") ? j.at("large_cell").get<Cell>() : Cell{s.side - 1, 0};
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct Criterion {
    enum class Kind { finite, discounted, average };
    Kind kind = Kind::discounted;
    double discount = 0.0;
    std::size_t horizon = 0;

    bool operator==(const Criterion&) const = default;
};

/// "finite:T", "discounted:alpha" or "average".
inline Criterion parse_criterion(const std::string& s) {
    const auto colon = s.find(':');
    const std::string head = s.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : s.substr(colon + 1);
    try {
        if (head == "average" && tail.empty()) return {Criterion::Kind::average, 0.0, 0};
        std::size_t used = 0;
        if (head == "discounted" && !tail.empty()) {
            const double alpha = std::stod(tail, &used);
            if (used == tail.size()) return {Criterion::Kind::discounted, alpha, 0};
        }
        if (head == "finite" && !tail.empty() && tail.front() != '-') {
            const unsigned long long horizon = std::stoull(tail, &used);
            if (used == tail.size()) return {Criterion::Kind::finite, 0.0, std::size_t(horizon)};
        }
    } catch (const std::logic_error&) {
    }
    throw InvalidInput("criterion must be 'finite:T', 'discounted:alpha' or 'average', got '" + s + "'");
}

struct SweepSpec {
    std::string parameter;
    std::vector<double> values;
};

struct LearnSettings {
    std::string algorithm = "entropic_q"; ///< or "dyna_q"
    std::size_t trials = 1;
    LearnConfig config;
};

struct ExperimentConfig {
    json mdp_source;   ///< {"builtin": "betting"|"gridworld", "spec": {...}} or {"inline": mdp} or {"file": path}
    json map = {{"kind", "expectation"}};
    Criterion criterion;
    double epsilon = 1e-8;
    std::optional<std::size_t> max_iter;
    std::optional<SweepSpec> sweep;
    LearnSettings learning;
    CheckOptions check;
    std::string output_dir = ".";
    std::uint64_t seed = 0;
};

namespace detail {

inline LearnSettings parse_learning(const json& j) {
    LearnSettings s;
    s.algorithm = j.value("algorithm", s.algorithm);
    if (s.algorithm != "entropic_q" && s.algorithm != "dyna_q")
        throw InvalidInput("learning algorithm must be 'entropic_q' or 'dyna_q'");
    s.trials = j.value("trials", s.trials);
    LearnConfig& c = s.config;
    c.episodes = j.value("episodes", c.episodes);
    c.steps_per_episode = j.value("steps_per_episode", c.steps_per_episode);
    c.learning_rate.beta0 = j.value("beta0", c.learning_rate.beta0);
    c.learning_rate.decay = j.value("beta_decay", c.learning_rate.decay);
    c.planning_steps = j.value("planning_steps", c.planning_steps);
    c.eval_epsilon = j.value("eval_epsilon", c.eval_epsilon);
    c.underflow_floor = j.value("underflow_floor", c.underflow_floor);
    const std::string kind = j.value("exploration", std::string("epsilon_greedy"));
    if (kind != "epsilon_greedy" && kind != "softmax")
        throw InvalidInput("exploration must be 'epsilon_greedy' or 'softmax'");
    const auto ek = kind == "softmax" ? Exploration::Kind::softmax : Exploration::Kind::epsilon_greedy;
    c.exploration = ExplorationSchedule::reaching(j.value("exploration_initial", 1.0),
                                                  j.value("exploration_final", 0.05), c.episodes, ek);
    if (s.trials == 0) throw InvalidInput("learning needs at least one trial");
    return s;
}

} // namespace detail

inline ExperimentConfig parse_experiment(const json& j) {
    if (!j.is_object()) throw ParseError("the configuration must be a JSON object");
    ExperimentConfig c;
    try {
        if (j.contains("mdp")) c.mdp_source = j.at("mdp");
        if (j.contains("map")) c.map = j.at("map");
        if (!j.contains("criterion")) throw InvalidInput("the configuration needs exactly one 'criterion'");
        c.criterion = parse_criterion(j.at("criterion").get<std::string>());
        c.epsilon = j.value("epsilon", c.epsilon);
        if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<std::size_t>();
        if (j.contains("sweep")) {
            SweepSpec s;
            s.parameter = j.at("sweep").at("parameter").get<std::string>();
            s.values = j.at("sweep").at("values").get<std::vector<double>>();
            c.sweep = std::move(s);
        }
        if (j.contains("learning")) c.learning = detail::parse_learning(j.at("learning"));
        if (j.contains("check")) {
            c.check.trials = j.at("check").value("trials", c.check.trials);
            c.check.tol = j.at("check").value("tol", c.check.tol);
            c.check.value_scale = j.at("check").value("value_scale", c.check.value_scale);
        }
        c.output_dir = j.value("output", c.output_dir);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad configuration field: ") + e.what());
    }
    if (!(c.epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
    return c;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("'" + path + "' is not valid JSON: " + e.what());
    }
}

/**
 * Resolves the MDP source. A builtin betting game without an explicit
 * discount inherits the discounted criterion's alpha.
 */
inline Environment load_environment(const ExperimentConfig& c) {
    const json& src = c.mdp_source;
    try {
        if (src.is_object() && src.contains("builtin")) {
            const std::string name = src.at("builtin").get<std::string>();
            const json spec = src.value("spec", json::object());
            if (name == "betting") {
                BettingGameSpec s;
                if (c.criterion.kind == Criterion::Kind::discounted) s.discount = c.criterion.discount;
                from_json(spec, s);
                return build_betting_game(s);
            }
            if (name == "gridworld") {
                GridWorldSpec s;
                from_json(spec, s);
                return build_grid_world(s);
            }
            throw InvalidInput("unknown builtin environment '" + name + "'");
        }
        if (src.is_object() && src.contains("inline")) return {mdp_from_json(src.at("inline")), 0, {}, {}};
        if (src.is_object() && src.contains("file"))
            return {mdp_from_json(read_json_file(src.at("file").get<std::string>())), 0, {}, {}};
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad MDP source: ") + e.what());
    }
    throw InvalidInput("the configuration needs an 'mdp' source (builtin, inline or file)");
}

/// Applies one sweep value to a copy of the map descriptor or the criterion.
inline std::pair<json, Criterion> with_parameter(const json& map, const Criterion& criterion,
                                                 const std::string& parameter, double value) {
    json m = map;
    Criterion c = criterion;
    const std::string kind = map.value("kind", std::string());
    if (sweepable_parameters(kind).count(parameter)) {
        m[parameter] = value;
    } else if (parameter == "discount" && c.kind == Criterion::Kind::discounted) {
        c.discount = value;
    } else if (parameter == "horizon" && c.kind == Criterion::Kind::finite) {
        if (!(value >= 0.0) || value != std::floor(value)) throw InvalidInput("horizon must be a whole number");
        c.horizon = std::size_t(value);
    } else {
        throw InvalidInput("sweep parameter '" + parameter + "' does not exist on map '" + kind +
                           "' or the criterion");
    }
    return {m, c};
}

} // namespace prospect
