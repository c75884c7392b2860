// prospect-mdp: solve, sweep, learn and check risk-sensitive MDPs from a JSON config.

#include "prospect/checker.hpp"
#include "prospect/environments.hpp"
#include "prospect/errors.hpp"
#include "prospect/io.hpp"
#include "prospect/learning.hpp"
#include "prospect/solvers.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace prospect;

namespace {

enum Exit { ok = 0, input_error = 1, not_converged = 2, axiom_failure = 3 };

struct Options {
    std::string config;
    std::string mdp;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> kappa;
};

void fail(ErrorCode code, const std::string& message) {
    std::cerr << "prospect-mdp: error " << error_code_name(code) << ": " << message << '\n';
}

void report_no_convergence(const std::string& what) {
    fail(ErrorCode::not_converged, what + " did not converge");
    std::cerr << "hint: periodic chains stall relative value iteration; retry with --aperiodicity 0.1\n";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string label(const Environment& env, std::size_t a) {
    return a < env.action_labels.size() ? env.action_labels[a] : std::to_string(a);
}

ExperimentConfig load_config(const Options& opt) {
    ExperimentConfig c = parse_experiment(read_json_file(opt.config));
    if (!opt.mdp.empty()) c.mdp_source = json{{"file", opt.mdp}};
    if (!opt.out.empty()) c.output_dir = opt.out;
    if (opt.seed) c.seed = *opt.seed;
    return c;
}

Environment prepare(const ExperimentConfig& c, const Options& opt) {
    Environment env = load_environment(c);
    if (opt.kappa) env.mdp = aperiodicity_transform(env.mdp, *opt.kappa);
    return env;
}

fs::path output_dir(const ExperimentConfig& c) {
    fs::path dir(c.output_dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------

int cmd_solve(const Options& opt) {
    const ExperimentConfig c = load_config(opt);
    const Environment env = prepare(c, opt);
    const MapPtr map = make_map(c.map, env.mdp);
    const fs::path dir = output_dir(c);
    std::string table;

    switch (c.criterion.kind) {
    case Criterion::Kind::discounted: {
        const SolveResult r = value_iteration_discounted(env.mdp, *map, c.criterion.discount, {}, c.epsilon,
                                                         c.max_iter.value_or(default_max_iter_discounted));
        write_json(dir / "result.json", r);
        table = "state\taction\tvalue\n";
        for (std::size_t x = 0; x < r.value.size(); ++x)
            table += std::to_string(x) + '\t' + label(env, r.policy[x]) + '\t' + format_number(r.value[x]) + '\n';
        write_text(dir / "policy.txt", table);
        if (!r.converged) {
            report_no_convergence("discounted value iteration");
            return not_converged;
        }
        std::cout << "value[" << env.start_state << "] = " << format_number(r.value[env.start_state])
                  << " after " << r.iterations << " iterations\n";
        return ok;
    }
    case Criterion::Kind::average: {
        const AverageSolveResult r = value_iteration_average(env.mdp, *map, {}, c.epsilon,
                                                             c.max_iter.value_or(default_max_iter_average));
        write_json(dir / "result.json", r);
        table = "gain\t" + format_number(r.gain) + "\nstate\taction\tbias\n";
        for (std::size_t x = 0; x < r.bias.size(); ++x)
            table += std::to_string(x) + '\t' + label(env, r.policy[x]) + '\t' + format_number(r.bias[x]) + '\n';
        write_text(dir / "policy.txt", table);
        if (!r.converged) {
            report_no_convergence("average value iteration");
            return not_converged;
        }
        std::cout << "gain = " << format_number(r.gain) << " after " << r.iterations << " iterations\n";
        return ok;
    }
    case Criterion::Kind::finite: {
        const FiniteStageResult r = finite_stage_dp(env.mdp, *map, c.criterion.horizon);
        write_json(dir / "result.json", r);
        table = "stage\tstate\taction\tvalue\n";
        for (std::size_t t = 0; t < r.stage_policies.size(); ++t)
            for (std::size_t x = 0; x < r.stage_values[t].size(); ++x)
                table += std::to_string(t) + '\t' + std::to_string(x) + '\t' +
                         label(env, r.stage_policies[t][x]) + '\t' + format_number(r.stage_values[t][x]) + '\n';
        write_text(dir / "policy.txt", table);
        std::cout << "V_0[" << env.start_state << "] = "
                  << format_number(r.stage_values.front()[env.start_state]) << '\n';
        return ok;
    }
    }
    return ok;
}

// ---------------------------------------------------------------------------

SweepRow sweep_point(const ExperimentConfig& base, const Options& opt, double value) {
    SweepRow row;
    row.param_value = value;
    row.start_state_value = std::numeric_limits<double>::quiet_NaN();
    try {
        ExperimentConfig c = base;
        std::tie(c.map, c.criterion) = with_parameter(base.map, base.criterion, base.sweep->parameter, value);
        const Environment env = prepare(c, opt);
        const MapPtr map = make_map(c.map, env.mdp);
        switch (c.criterion.kind) {
        case Criterion::Kind::discounted: {
            const auto r = value_iteration_discounted(env.mdp, *map, c.criterion.discount, {}, c.epsilon,
                                                      c.max_iter.value_or(default_max_iter_discounted));
            row = {value, r.value[env.start_state], policy_string(env, r.policy), r.iterations, r.converged};
            break;
        }
        case Criterion::Kind::average: {
            const auto r = value_iteration_average(env.mdp, *map, {}, c.epsilon,
                                                   c.max_iter.value_or(default_max_iter_average));
            row = {value, r.gain, policy_string(env, r.policy), r.iterations, r.converged};
            break;
        }
        case Criterion::Kind::finite: {
            const auto r = finite_stage_dp(env.mdp, *map, c.criterion.horizon);
            row = {value, r.stage_values.front()[env.start_state], policy_string(env, r.stage_policies.front()),
                   r.horizon(), true};
            break;
        }
        }
    } catch (const Error& e) {
        row.policy_string = error_code_name(e.code());
    }
    return row;
}

int cmd_sweep(const Options& opt) {
    const ExperimentConfig c = load_config(opt);
    if (!c.sweep || c.sweep->values.empty()) throw InvalidInput("the sweep list is empty");
    // reject unknown parameters before any work starts
    with_parameter(c.map, c.criterion, c.sweep->parameter, c.sweep->values.front());
    prepare(c, opt);

    const auto& values = c.sweep->values;
    std::vector<SweepRow> rows(values.size());
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), values.size()));
    std::vector<std::future<void>> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < values.size(); i += workers) rows[i] = sweep_point(c, opt, values[i]);
        }));
    for (auto& f : pool) f.get();

    std::ofstream out(output_dir(c) / "sweep.csv", std::ios::binary);
    write_sweep_csv(out, rows);
    const auto failed = std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return !r.converged; });
    std::cout << rows.size() << " sweep points, " << failed << " failed or unconverged\n";
    if (failed) {
        fail(ErrorCode::not_converged, std::to_string(failed) + " sweep points did not converge");
        return not_converged;
    }
    return ok;
}

// ---------------------------------------------------------------------------

int cmd_learn(const Options& opt) {
    const ExperimentConfig c = load_config(opt);
    if (c.criterion.kind != Criterion::Kind::discounted)
        throw InvalidInput("learning needs a discounted criterion");
    const Environment env = prepare(c, opt);
    const MapPtr map = make_map(c.map, env.mdp);

    LearnConfig cfg = c.learning.config;
    cfg.discount = c.criterion.discount;
    cfg.start_state = env.start_state;
    cfg.seed = c.seed;
    const bool entropic = c.learning.algorithm == "entropic_q";
    if (entropic) {
        if (map->kind() != "entropic") throw InvalidInput("entropic Q-learning needs an entropic map");
        cfg.lambda = c.map.at("lambda").get<double>();
    }

    const SolveResult exact = value_iteration_discounted(env.mdp, *map, cfg.discount, {}, cfg.eval_epsilon,
                                                         c.max_iter.value_or(default_max_iter_discounted));
    if (!exact.converged) {
        report_no_convergence("reference value iteration");
        return not_converged;
    }
    const double reference = exact.value[env.start_state];

    const LearnResult result =
        entropic ? run_trials([&](const LearnConfig& t) { return entropic_q_learning(env.mdp, t, reference); },
                              cfg, c.learning.trials)
                 : run_trials([&](const LearnConfig& t) { return dyna_q_learning(env.mdp, *map, t, reference); },
                              cfg, c.learning.trials);

    const fs::path dir = output_dir(c);
    std::ofstream trace(dir / "trace.csv", std::ios::binary);
    write_trace_csv(trace, result.trace);
    write_json(dir / "qtable.json", result.table);
    const auto& last = result.trace.records.back();
    std::cout << "v1* = " << format_number(reference) << ", final mean |v1 - v1*| = "
              << format_number(last.abs_error) << " over " << c.learning.trials << " trials\n";
    if (result.trace.clamped_updates)
        std::cerr << "warning " << error_code_name(ErrorCode::underflow) << ": "
                  << result.trace.clamped_updates << " w-space updates clamped at the floor\n";
    return ok;
}

// ---------------------------------------------------------------------------

int cmd_check(const Options& opt) {
    const ExperimentConfig c = load_config(opt);
    const Environment env = prepare(c, opt);
    const MapPtr map = make_map(c.map, env.mdp);
    std::mt19937_64 rng(c.seed);
    const AxiomReport report = check_axioms(*map, env.mdp, rng, c.check);
    json j = report;
    j["map"] = c.map;
    write_json(output_dir(c) / "axioms.json", j);
    std::cout << "map " << report.map_kind << ": monotonicity " << report.monotonicity.passed
              << ", translation " << report.translation.passed << ", centralization "
              << report.centralization.passed << ", homogeneous " << report.homogeneity.passed << ", "
              << risk_class_name(report.overall) << '\n';
    if (!report.axioms_pass()) {
        std::cerr << "prospect-mdp: axiom check failed for map '" << report.map_kind << "'\n";
        return axiom_failure;
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Risk-sensitive MDPs with prospect maps"};
    app.name("prospect-mdp");
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--mdp", opt.mdp, "MDP file overriding the configured source")->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--seed", opt.seed, "random seed");
        sub->add_option("--aperiodicity", opt.kappa, "mix every row with a self-loop of this weight");
    };
    CLI::App* solve = app.add_subcommand("solve", "run the solver for the configured criterion");
    CLI::App* sweep = app.add_subcommand("sweep", "solve once per sweep value and write sweep.csv");
    CLI::App* learn = app.add_subcommand("learn", "run Q-learning or dyna-Q and write trace.csv");
    CLI::App* check = app.add_subcommand("check", "probe the prospect-map axioms and write axioms.json");
    for (CLI::App* sub : {solve, sweep, learn, check}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : input_error;
    }

    try {
        if (*solve) return cmd_solve(opt);
        if (*sweep) return cmd_sweep(opt);
        if (*learn) return cmd_learn(opt);
        if (*check) return cmd_check(opt);
    } catch (const Error& e) {
        fail(e.code(), e.what());
        if (e.code() == ErrorCode::not_converged) return not_converged;
        return input_error;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, e.what());
        return input_error;
    } catch (const fs::filesystem_error& e) {
        fail(ErrorCode::invalid_input, e.what());
        return input_error;
    }
    return ok;
}
