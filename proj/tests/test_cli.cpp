#include "prospect/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using prospect::json;

namespace {

struct RunResult {
    int code = -1;
    std::string err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("prospect_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    RunResult run(const std::string& args) const {
        const fs::path err = dir_ / "stderr.txt";
        const std::string cmd = std::string("\"") + PROSPECT_MDP_PATH + "\" " + args + " > \"" +
                                (dir_ / "stdout.txt").string() + "\" 2> \"" + err.string() + "\"";
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
    }

    fs::path write_config(const std::string& name, const json& j) const {
        const fs::path p = dir_ / name;
        std::ofstream(p) << j.dump(2);
        return p;
    }

    static std::string config(const std::string& name) { return std::string(PROSPECT_CONFIG_DIR) + "/" + name; }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string out(const std::string& sub) const { return "--out \"" + (dir_ / sub).string() + "\""; }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, SolveWritesResultAndPolicy) {
    const RunResult r = run("solve --config " + config("betting_solve.json") + " " + out("solve"));
    ASSERT_EQ(r.code, 0) << r.err;
    const json result = json::parse(slurp(dir_ / "solve" / "result.json"));
    EXPECT_TRUE(result.at("converged").get<bool>());
    EXPECT_EQ(result.at("value").size(), 6u);
    EXPECT_FALSE(slurp(dir_ / "solve" / "policy.txt").empty());
}

TEST_F(Cli, MissingConfigIsAnInputError) {
    EXPECT_EQ(run("solve --config /nonexistent.json").code, 1);
    EXPECT_EQ(run("frobnicate").code, 1);
}

TEST_F(Cli, MalformedJsonReportsParseError) {
    const fs::path p = dir_ / "broken.json";
    std::ofstream(p) << "{\"criterion\": ";
    const RunResult r = run("solve --config \"" + p.string() + "\" " + out("x"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("prospect-mdp: error E_PARSE:"), std::string::npos) << r.err;
}

TEST_F(Cli, InvalidMdpIsAnInputError) {
    const auto p = write_config("bad.json", {{"mdp", {{"inline", {{"transitions", {{{0.5, 0.6}}, {{0.0, 1.0}}}},
                                                                   {"rewards", {{0.0}, {0.0}}}}}}},
                                             {"criterion", "discounted:0.9"}});
    const RunResult r = run("solve --config \"" + p.string() + "\" " + out("x"));
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("prospect-mdp: error E_"), std::string::npos) << r.err;
}

TEST_F(Cli, PeriodicAverageIsNotConvergedUntilTransformed) {
    const RunResult raw = run("solve --config " + config("two_cycle_average.json") + " " + out("avg"));
    EXPECT_EQ(raw.code, 2);
    EXPECT_NE(raw.err.find("E_NOCONV"), std::string::npos);
    EXPECT_NE(raw.err.find("--aperiodicity"), std::string::npos);
    const RunResult fixed =
        run("solve --config " + config("two_cycle_average.json") + " --aperiodicity 0.1 " + out("avg"));
    ASSERT_EQ(fixed.code, 0) << fixed.err;
    EXPECT_NEAR(json::parse(slurp(dir_ / "avg" / "result.json")).at("gain").get<double>(), 1.0, 1e-6);
}

TEST_F(Cli, AxiomFailureExitsThree) {
    EXPECT_EQ(run("check --config " + config("check_probability_weighting.json") + " " + out("pw")).code, 3);
    const json report = json::parse(slurp(dir_ / "pw" / "axioms.json"));
    EXPECT_FALSE(report.at("axioms_pass").get<bool>());
    EXPECT_EQ(run("check --config " + config("check_entropic.json") + " " + out("ent")).code, 0);
}

TEST_F(Cli, SweepIsByteIdenticalOnRerun) {
    ASSERT_EQ(run("sweep --config " + config("betting_entropic_sweep.json") + " " + out("a")).code, 0);
    ASSERT_EQ(run("sweep --config " + config("betting_entropic_sweep.json") + " " + out("b")).code, 0);
    const std::string a = slurp(dir_ / "a" / "sweep.csv");
    EXPECT_EQ(a, slurp(dir_ / "b" / "sweep.csv"));
    EXPECT_EQ(a.substr(0, a.find('\n')), prospect::sweep_csv_header);
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 21);
    EXPECT_NE(a.find("\"no,no\""), std::string::npos);
    EXPECT_NE(a.find("\"bet,bet\""), std::string::npos);
}

TEST_F(Cli, SweepRejectsUnknownParameter) {
    const auto p = write_config("sweep.json", {{"mdp", {{"builtin", "betting"}}},
                                               {"map", {{"kind", "cvar"}, {"tau", 0.5}}},
                                               {"criterion", "discounted:0.9"},
                                               {"sweep", {{"parameter", "lambda"}, {"values", {0.1}}}}});
    EXPECT_EQ(run("sweep --config \"" + p.string() + "\" " + out("x")).code, 1);
}

TEST_F(Cli, LearnIsDeterministicForASeed) {
    const auto p = write_config("learn.json", {{"mdp", {{"builtin", "betting"}}},
                                               {"map", {{"kind", "entropic"}, {"lambda", -0.05}}},
                                               {"criterion", "discounted:0.9"},
                                               {"learning", {{"trials", 3}, {"episodes", 5}, {"steps_per_episode", 40}}},
                                               {"seed", 11}});
    ASSERT_EQ(run("learn --config \"" + p.string() + "\" " + out("a")).code, 0);
    ASSERT_EQ(run("learn --config \"" + p.string() + "\" " + out("b")).code, 0);
    const std::string a = slurp(dir_ / "a" / "trace.csv");
    EXPECT_EQ(a, slurp(dir_ / "b" / "trace.csv"));
    EXPECT_EQ(a.substr(0, a.find('\n')), prospect::trace_csv_header);
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 6);
    EXPECT_EQ(slurp(dir_ / "a" / "qtable.json"), slurp(dir_ / "b" / "qtable.json"));
    ASSERT_EQ(run("learn --config \"" + p.string() + "\" --seed 12 " + out("c")).code, 0);
    EXPECT_NE(a, slurp(dir_ / "c" / "trace.csv"));
}

TEST_F(Cli, LearnNeedsADiscountedCriterion) {
    const auto p = write_config("learn.json", {{"mdp", {{"builtin", "betting"}}},
                                               {"map", {{"kind", "entropic"}, {"lambda", -0.05}}},
                                               {"criterion", "average"}});
    EXPECT_EQ(run("learn --config \"" + p.string() + "\" " + out("x")).code, 1);
}
