// End-to-end runs of the command-line tool.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("lureid_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + std::string(LUREID_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Runs and captures stderr.
int run_capture(const std::string& args, std::string& err) {
  const fs::path f = fs::temp_directory_path() / "lureid_cli_stderr.txt";
  const std::string cmd = std::string(LUREID_CLI) + " " + args + " >/dev/null 2>" + f.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(f);
  std::stringstream ss;
  ss << in.rdbuf();
  err = ss.str();
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("identify --scenario experiment1"), 2);  // --gamma missing
  EXPECT_EQ(run("sweep --mode strict"), 2);
  EXPECT_EQ(run("sweep --kernel polynomial"), 2);
}

TEST(Cli, SimulateWritesFilesDeterministically) {
  const fs::path a = fresh_dir("sim_a");
  const fs::path b = fresh_dir("sim_b");
  ASSERT_EQ(run("simulate --scenario experiment1 --seed 7 --out " + a.string()), 0);
  ASSERT_EQ(run("simulate --scenario experiment1 --seed 7 --truth --out " + b.string()), 0);
  EXPECT_EQ(count_lines(a / "dataset.csv"), 52);  // header plus 51 state rows
  EXPECT_TRUE(fs::exists(a / "scenario.json"));
  EXPECT_FALSE(fs::exists(a / "truth.csv"));
  EXPECT_TRUE(fs::exists(b / "truth.csv"));
  EXPECT_EQ(slurp(a / "dataset.csv"), slurp(b / "dataset.csv"));
  EXPECT_EQ(slurp(a / "scenario.json"), slurp(b / "scenario.json"));
  EXPECT_EQ(slurp(a / "dataset.csv"), slurp(fs::path(LUREID_GOLDEN_DIR) / "experiment1_seed7.csv"));
}

TEST(Cli, UnknownScenarioListsValidNames) {
  std::string err;
  EXPECT_EQ(run_capture("simulate --scenario experiment9 --out " + fresh_dir("bad").string(), err), 2);
  EXPECT_NE(err.find("experiment1"), std::string::npos);
  EXPECT_NE(err.find("linear_sanity"), std::string::npos);
}

TEST(Cli, IdentifyInfeasibleVerdictAndRequireFlag) {
  const fs::path d = fresh_dir("identify");
  EXPECT_EQ(run("identify --scenario experiment2 --seed 1 --gamma 1e-4 --out " + d.string()), 0);
  const json j = json::parse(slurp(d / "model.json"));
  EXPECT_FALSE(j["feasible"].get<bool>());
  EXPECT_EQ(j["config"]["mode"], "constrained");
  EXPECT_EQ(j["gamma"].get<double>(), 1e-4);
  EXPECT_EQ(run("identify --scenario experiment2 --seed 1 --gamma 1e-4 --require-contractive --out " + d.string()), 3);
  EXPECT_EQ(run("identify --scenario experiment1 --seed 1 --gamma 10 --require-contractive --out " + d.string()), 0);
  const json k = json::parse(slurp(d / "model.json"));
  EXPECT_TRUE(k["feasible"].get<bool>());
  EXPECT_TRUE(k["model"]["contractive"].get<bool>());
  EXPECT_FALSE(k["theta_error"].is_null());
  EXPECT_FALSE(k["val_rmse"].is_null());
}

TEST(Cli, SweepInfeasibleGridExitsThree) {
  const fs::path d = fresh_dir("sweep_infeasible");
  EXPECT_EQ(run("sweep --scenario experiment2 --seed 1 --gamma-min 1e-6 --gamma-max 1e-4 --n-gamma 3 --out " +
                d.string()),
            3);
  const json j = json::parse(slurp(d / "sweep.json"));
  EXPECT_TRUE(j["feasible_set"].empty());
  EXPECT_TRUE(j["gamma_star"].is_null());
  EXPECT_FALSE(fs::exists(d / "model.json"));
}

TEST(Cli, SweepBothModesAndOutputs) {
  for (const std::string mode : {"post_check", "constrained"}) {
    const fs::path d = fresh_dir("sweep_" + mode);
    ASSERT_EQ(run("sweep --scenario experiment1 --seed 2 --n-gamma 5 --mode " + mode + " --out " + d.string()), 0);
    EXPECT_EQ(count_lines(d / "sweep.csv"), 6);
    const json j = json::parse(slurp(d / "sweep.json"));
    EXPECT_EQ(j["config"]["mode"], mode);
    EXPECT_EQ(j["records"].size(), 5u);
    EXPECT_TRUE(fs::exists(d / "model.json"));
    EXPECT_TRUE(fs::exists(d / "model_best_rmse.json"));
  }
}

TEST(Cli, SweepIsByteDeterministic) {
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  const std::string args = "sweep --scenario experiment1 --seed 3 --n-gamma 8 --out ";
  ASSERT_EQ(run(args + a.string()), 0);
  ASSERT_EQ(run(args + b.string(), "LURE_ID_THREADS=1"), 0);
  for (const char* f : {"sweep.json", "sweep.csv", "model.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, DatasetInputAndErrors) {
  const fs::path d = fresh_dir("dataset");
  ASSERT_EQ(run("simulate --scenario experiment1 --seed 4 --out " + d.string()), 0);
  ASSERT_EQ(run("sweep --dataset " + (d / "dataset.csv").string() + " --n-gamma 4 --out " + d.string()), 0);
  const json j = json::parse(slurp(d / "sweep.json"));
  EXPECT_TRUE(j["records"][0]["theta_error"].is_null());  // no scenario, no truth

  EXPECT_EQ(run("sweep --dataset " + (d / "missing.csv").string() + " --out " + d.string()), 2);
  std::ofstream(d / "broken.csv") << "t,u_1,q_1\n0,1,2\n";
  EXPECT_EQ(run("sweep --dataset " + (d / "broken.csv").string() + " --out " + d.string()), 2);
  EXPECT_EQ(run("sweep --scenario experiment1 --out " + d.string(), "LURE_ID_THREADS=zero"), 2);
}

TEST(Cli, FlagsOverrideScenarioJson) {
  const fs::path d = fresh_dir("precedence");
  std::ofstream(d / "s.json") << R"({"name": "experiment1", "seed": 5, "kernel": {"sigma": 2.0}})";
  ASSERT_EQ(run("sweep --scenario " + (d / "s.json").string() + " --seed 6 --n-gamma 3 --out " + d.string()), 0);
  const json j = json::parse(slurp(d / "sweep.json"));
  EXPECT_EQ(j["config"]["seed"], 6);
  EXPECT_EQ(j["config"]["scenario"]["seed"], 6);
  EXPECT_EQ(j["config"]["kernel"]["sigma"], 2.0);
  EXPECT_EQ(j["config"]["gamma_min"], 0.1);  // built-in default
  ASSERT_EQ(run("sweep --scenario " + (d / "s.json").string() + " --sigma 3 --n-gamma 3 --out " + d.string()), 0);
  EXPECT_EQ(json::parse(slurp(d / "sweep.json"))["config"]["kernel"]["sigma"], 3.0);
}

TEST(Cli, ReportColumns) {
  const fs::path d = fresh_dir("report");
  ASSERT_EQ(run("identify --scenario experiment1 --seed 1 --gamma 10 --out " + d.string()), 0);
  fs::copy_file(d / "model.json", d / "a.json");
  ASSERT_EQ(run("report --constrained " + (d / "a.json").string() + " --kernel-only " + (d / "a.json").string() +
                " --out " + d.string()),
            0);
  std::ifstream in(d / "report.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "metric,constrained,kernel_only");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    EXPECT_EQ(line.substr(first + 1, second - first - 1), line.substr(second + 1)) << line;
  }
  EXPECT_EQ(rows, 6);
  EXPECT_EQ(run("report --constrained " + (d / "nope.json").string() + " --kernel-only " + (d / "a.json").string() +
                " --out " + d.string()),
            2);
}

TEST(Cli, ReportContractivityVerdicts) {
  const fs::path d = fresh_dir("report_verdict");
  ASSERT_EQ(run("identify --scenario experiment1 --seed 1 --gamma 10 --out " + d.string()), 0);
  fs::rename(d / "model.json", d / "c.json");
  ASSERT_EQ(run("identify --scenario experiment2 --seed 1 --gamma 1e-4 --mode post_check --out " + d.string()), 0);
  ASSERT_EQ(run("report --constrained " + (d / "c.json").string() + " --kernel-only " +
                (d / "model.json").string() + " --out " + d.string()),
            0);
  EXPECT_NE(slurp(d / "report.csv").find("contractive,yes,no"), std::string::npos);
}
