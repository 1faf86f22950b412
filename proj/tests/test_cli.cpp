#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gridmix/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "gridmix");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = gridmix::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string config_path(const char* name) { return std::string(GRIDMIX_CONFIG_DIR) + "/" + name; }

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("gridmix_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& text) {
    const auto path = dir_ / "scenario.cfg";
    std::ofstream(path) << text;
    return path.string();
  }
  std::string base_with(const std::string& extra) {
    std::ifstream in(config_path("base.cfg"));
    std::stringstream ss;
    ss << in.rdbuf() << extra;
    return write_config(ss.str());
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

int count(const std::string& s, const std::string& needle) {
  int n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST(Cli, GainsReportsResiduals) {
  const auto r = run({"gains", "--config", config_path("base.cfg")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("key,value\n", 0), 0u);
  for (const char* key : {"K_c,", "K11,", "Lambda22,", "residual_K,", "residual_K_f,"})
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
}

TEST(Cli, GlobalOptionsMayPrecedeTheSubcommand) {
  const auto a = run({"--config", config_path("base.cfg"), "pareto"});
  const auto b = run({"pareto", "--config", config_path("base.cfg")});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST(Cli, Table1MarksMissingEquilibria) {
  const auto r = run({"table1", "--config", config_path("base.cfg"), "--calibrate-pd", "282", "--format", "md"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count(r.out, "n.e."), 2);
  EXPECT_EQ(count(r.out, "| Price |"), 4);
  EXPECT_EQ(count(r.out, "| X_inf (GW) |"), 4);
  // Both missing cells sit in the pi = 0 rows.
  std::istringstream lines(r.out);
  std::string line;
  while (std::getline(lines, line))
    if (line.find("n.e.") != std::string::npos) EXPECT_NE(line.find("pi = 0,"), std::string::npos) << line;
  EXPECT_NE(r.out.find("| pi = 0, delta = 1 | Price | 80 |"), std::string::npos) << r.out;
}

TEST(Cli, OrderingHoldsAtCalibratedMarket) {
  const auto r = run({"ordering", "--config", config_path("base.cfg"), "--calibrate-pd", "282"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count(r.out, ",1,"), 5) << r.out;
  EXPECT_EQ(count(r.out, ",0,"), 0) << r.out;
}

TEST(Cli, CalibrateReportsGamma) {
  const auto r = run({"calibrate", "--config", config_path("base.cfg"), "--calibrate-pd", "282"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gamma,1.29388668"), std::string::npos) << r.out;
  EXPECT_EQ(run({"calibrate", "--config", config_path("base.cfg")}).code, 1);
}

TEST_F(TempDir, InvalidParametersNameTheRule) {
  const auto r = run({"gains", "--config", base_with("rho = 0.09\n")});
  // Duplicate keys are themselves a validation error; build a clean file instead.
  EXPECT_EQ(r.code, 1);
  std::ifstream in(config_path("base.cfg"));
  std::string text, line;
  while (std::getline(in, line)) text += (line.rfind("rho", 0) == 0 ? "rho = 0.09" : line) + "\n";
  const auto r2 = run({"gains", "--config", write_config(text)});
  EXPECT_EQ(r2.code, 1);
  EXPECT_NE(r2.err.find("rho > sigma^2"), std::string::npos) << r2.err;
  EXPECT_TRUE(r2.out.empty());
}

TEST_F(TempDir, UnknownKeyIsRejected) {
  const auto r = run({"gains", "--config", base_with("price.colour = red\n")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("price.colour"), std::string::npos) << r.err;
}

TEST_F(TempDir, MissingConfigIsAnIoError) {
  EXPECT_EQ(run({"gains", "--config", (dir_ / "absent.cfg").string()}).code, 3);
}

TEST_F(TempDir, UnwritableOutputIsAnIoError) {
  const auto blocker = dir_ / "file";
  std::ofstream(blocker) << "x";
  const auto r = run({"pareto", "--config", config_path("base.cfg"), "--out", (blocker / "sub").string()});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(TempDir, DegenerateModelIsANumericalFailure) {
  std::ifstream in(config_path("base.cfg"));
  std::string text, line;
  while (std::getline(in, line)) text += (line.rfind("lambda", 0) == 0 ? "lambda = 0" : line) + "\n";
  const auto r = run({"gains", "--config", write_config(text)});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, UnknownSubcommandOrAgentIsAValidationError) {
  EXPECT_EQ(run({"frobnicate", "--config", config_path("base.cfg")}).code, 1);
  EXPECT_EQ(run({"simulate", "--config", config_path("montecarlo.cfg"), "--agent", "regulator"}).code, 1);
  EXPECT_EQ(run({"gains"}).code, 1);
}

TEST(Cli, StiffSimulationIsRejectedAsOutOfDomain) {
  const auto r = run({"simulate", "--config", config_path("base.cfg"), "--agent", "firm"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("stability"), std::string::npos) << r.err;
}

TEST_F(TempDir, OutputsAreByteIdenticalAcrossRuns) {
  const auto a = dir_ / "a", b = dir_ / "b";
  for (const auto& d : {a, b}) {
    ASSERT_EQ(run({"simulate", "--config", config_path("montecarlo.cfg"), "--agent", "firm", "--seed", "9", "--out",
                   d.string()}).code, 0);
    ASSERT_EQ(run({"stationary", "--config", config_path("montecarlo.cfg"), "--out", d.string()}).code, 0);
  }
  for (const char* f : {"simulate.csv", "simulate_summary.csv", "stationary.csv", "consumer_trajectory.csv",
                        "firm_trajectory.csv", "planner_trajectory.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto c = dir_ / "c";
  ASSERT_EQ(run({"simulate", "--config", config_path("montecarlo.cfg"), "--agent", "firm", "--seed", "10", "--out",
                 c.string()}).code, 0);
  EXPECT_NE(slurp(a / "simulate_summary.csv"), slurp(c / "simulate_summary.csv"));
}

TEST_F(TempDir, ScanWritesTheGrid) {
  ASSERT_EQ(run({"scan", "--config", config_path("base.cfg"), "--out", dir_.string()}).code, 0);
  const auto text = slurp(dir_ / "scan.csv");
  EXPECT_EQ(count(text, "\n"), 17);  // header + 4 x 4
  EXPECT_EQ(text.rfind("gamma,delta,K11,x_inf_mw,share,violates_gamma,violates_delta\n", 0), 0u);
}

TEST(Cli, StackelbergUsesRunQ) {
  const auto r = run({"stackelberg", "--config", config_path("base.cfg"), "--format", "md"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("| q | 0 |"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("| P_diamond |"), std::string::npos);
}

TEST(Cli, HelpExitsCleanly) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("table1"), std::string::npos);
}
