#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "episodic/cli.hpp"
#include "episodic/io.hpp"
#include "episodic/simulation.hpp"

using namespace episodic;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kGames = EPISODIC_GAME_DATA;
const std::string kData = EPISODIC_TEST_DATA;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("episodic_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, ValidateClassifiesMatchingPennies) {
  const Result r = run({"validate", "--game", kGames + "/matching_pennies.json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_TRUE(doc.at("valid").get<bool>());
  EXPECT_EQ(doc.at("class"), "zero-sum-SG");
}

TEST_F(Cli, ValidateReportsSwitchingControllers) {
  const Result r = run({"validate", "--game", kGames + "/switching_controller.json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json doc = json::parse(r.out);
  EXPECT_EQ(doc.at("class"), "switching-controller");
  EXPECT_EQ(doc.at("controllers").at("left"), 1);
  EXPECT_EQ(doc.at("controllers").at("right"), 2);
}

TEST_F(Cli, ValidateNamesOffendingRow) {
  const Result r = run({"validate", "--game", kData + "/bad_row_sum.json"});
  EXPECT_EQ(r.code, kExitDomainFailure);
  EXPECT_NE(r.err.find("(s=1,a1=1,a2=0)"), std::string::npos) << r.err;
  EXPECT_FALSE(json::parse(r.out).at("valid").get<bool>());
}

TEST_F(Cli, MalformedInputIsUsageError) {
  EXPECT_EQ(run({"validate", "--game", kData + "/malformed.json"}).code, kExitUsage);
  EXPECT_EQ(run({"validate", "--game", path("missing.json")}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"check-graph", "--game", kGames + "/coordination.json", "--M", "0"}).code, kExitUsage);
  EXPECT_EQ(run({"solve", "--game", kGames + "/coordination.json", "--M", "2"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST_F(Cli, CheckGraphReportsWitness) {
  Result r = run({"check-graph", "--game", kData + "/two_cycle.json", "--M", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  json doc = json::parse(r.out);
  EXPECT_TRUE(doc.at("strongly_connected").get<bool>());
  EXPECT_FALSE(doc.at("coprime_cycle").get<bool>());
  EXPECT_FALSE(doc.at("extended_strongly_connected").get<bool>());
  EXPECT_TRUE(doc.at("witness").is_null());

  r = run({"check-graph", "--game", kData + "/two_cycle.json", "--M", "3"});
  doc = json::parse(r.out);
  EXPECT_TRUE(doc.at("coprime_cycle").get<bool>());
  EXPECT_TRUE(doc.at("extended_strongly_connected").get<bool>());
  const int residue = doc.at("witness").at("residue");
  EXPECT_TRUE(residue == 1 || residue == 2);
}

TEST_F(Cli, SolveWritesLoadableTables) {
  const std::string out = path("tables.json");
  const Result r = run({"solve", "--game", kGames + "/switching_controller.json", "--M", "2",
                        "--method", "logit", "--tau", "0.05", "--out", out});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const SolutionTables t = tables_from_json(json::parse(read_text_file(out)));
  const StochasticGame game = load_game_file(kGames + "/switching_controller.json");
  const SolutionTables direct = backward_induction_logit(game, 2, 0.05);
  for (int i = 0; i < 2; ++i) EXPECT_LE((t.q[i] - direct.q[i]).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(t.tau, 0.05);
}

TEST_F(Cli, MinimaxNeedsCommonDiscount) {
  const Result r = run({"solve", "--game", kGames + "/switching_controller.json", "--M", "2",
                        "--method", "minimax"});
  EXPECT_EQ(r.code, kExitDomainFailure);
  EXPECT_EQ(run({"solve", "--game", kGames + "/matching_pennies.json", "--M", "3", "--method",
                 "minimax"})
                .code,
            kExitOk);
}

TEST_F(Cli, BoundThenReportPasses) {
  const std::string tables = path("t.json"), bound = path("b.json"), metrics = path("m.csv");
  const std::string game = kGames + "/coordination.json";
  ASSERT_EQ(run({"solve", "--game", game, "--M", "2", "--tau", "0.05", "--out", tables}).code, kExitOk);
  ASSERT_EQ(run({"bound", "--game", game, "--M", "2", "--profile", tables, "--out", bound}).code, kExitOk);
  const BoundReport b = bound_report_from_json(json::parse(read_text_file(bound)));
  ASSERT_TRUE(b.tau.has_value());
  EXPECT_EQ(*b.tau, 0.05);

  const Result learn = run({"learn", "--game", game, "--M", "2", "--tau", "0.05", "--K", "20000",
                            "--seeds", "3", "--oracle", tables, "--metrics", metrics});
  ASSERT_EQ(learn.code, kExitOk) << learn.err;
  const json summary = json::parse(learn.out);
  ASSERT_EQ(summary.size(), 1u);
  EXPECT_EQ(summary[0].at("seed"), 3);
  EXPECT_FALSE(parse_metrics_csv(read_text_file(metrics)).empty());

  const Result r = run({"report", "--metrics", metrics, "--bound", bound});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("PASS bound agent 1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("PASS bound agent 2"), std::string::npos) << r.out;
}

TEST_F(Cli, ReportFailsWithBothNumbers) {
  const std::string tables = path("t.json"), bound = path("b.json"), metrics = path("m.csv");
  const std::string game = kGames + "/coordination.json";
  ASSERT_EQ(run({"solve", "--game", game, "--M", "2", "--tau", "0.05", "--out", tables}).code, kExitOk);
  ASSERT_EQ(run({"bound", "--game", game, "--M", "2", "--profile", tables, "--out", bound}).code, kExitOk);
  BoundReport b = bound_report_from_json(json::parse(read_text_file(bound)));
  b.epsilon[0] = 0.125;
  b.exploit_infinite[0] = 0.5;
  write_text_file(bound, bound_report_to_json(b).dump());
  write_text_file(metrics, std::string(kMetricsHeader) + "\n10,1,0.1,0.1,,,1,2\n");

  const Result r = run({"report", "--metrics", metrics, "--bound", bound});
  EXPECT_EQ(r.code, kExitDomainFailure);
  const auto line = r.out.find("FAIL bound agent 1");
  ASSERT_NE(line, std::string::npos) << r.out;
  const std::string text = r.out.substr(line, r.out.find('\n', line) - line);
  EXPECT_NE(text.find("0.5"), std::string::npos) << text;
  EXPECT_NE(text.find("0.125"), std::string::npos) << text;
  EXPECT_NE(r.out.find("SKIP learned agent 1"), std::string::npos);
}

TEST_F(Cli, ReportRejectsMissingColumn) {
  const std::string tables = path("t.json"), bound = path("b.json"), metrics = path("m.csv");
  const std::string game = kGames + "/coordination.json";
  ASSERT_EQ(run({"solve", "--game", game, "--M", "1", "--tau", "0.05", "--out", tables}).code, kExitOk);
  ASSERT_EQ(run({"bound", "--game", game, "--M", "1", "--profile", tables, "--out", bound}).code, kExitOk);
  write_text_file(metrics, "stage,agent,sup_q_err\n1,1,0.5\n");
  const Result r = run({"report", "--metrics", metrics, "--bound", bound});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("lacks column"), std::string::npos) << r.err;
}

TEST_F(Cli, LearnWritesPerSeedFiles) {
  const std::string metrics = path("m.csv"), tables = path("t.json");
  const Result r = run({"learn", "--game", kGames + "/matching_pennies.json", "--M", "1", "--tau",
                        "0.1", "--K", "5000", "--seeds", "1", "2", "--solve-oracle", "--metrics",
                        metrics, "--tables", tables});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out).size(), 2u);
  for (const char* seed : {"1", "2"}) {
    EXPECT_TRUE(fs::exists(path(std::string("m.seed") + seed + ".csv")));
    EXPECT_TRUE(fs::exists(path(std::string("t.seed") + seed + ".json")));
  }
  EXPECT_EQ(run({"learn", "--game", kGames + "/matching_pennies.json", "--M", "1", "--tau", "-1",
                 "--K", "10"})
                .code,
            kExitUsage);
}
