#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "adp_cli_test";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int adp(const std::string& args) {
  const std::string cmd = std::string(ADP_CLI_PATH) + " " + args + " >" + (work_dir() / "stdout").string() +
                          " 2>" + (work_dir() / "stderr").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string out() { return read(work_dir() / "stdout"); }
std::string err() { return read(work_dir() / "stderr"); }

const std::string kLengths = " --l-vis 512 --l-txt 40 --l-prop 1 --l-act 56";

std::string synth(const std::string& name, const std::string& profile = "mixed", int windows = 20) {
  const auto p = (work_dir() / name).string();
  EXPECT_EQ(adp("synth --seed 42 --profile " + profile + " -T " + std::to_string(windows) + " --out " + p), 0);
  return p;
}

}  // namespace

TEST(Cli, Version) {
  EXPECT_EQ(adp("--version"), 0);
  EXPECT_NE(out().find("0.3.0"), std::string::npos);
}

TEST(Cli, SimulateWritesReport) {
  const auto log = synth("sim.jsonl");
  ASSERT_EQ(adp("simulate --log " + log + kLengths), 0);
  const auto j = nlohmann::json::parse(out());
  EXPECT_EQ(j.at("aggregates").at("forwards"), 20);
  EXPECT_EQ(j.at("config").at("dims").at("l_vis"), 512);
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto log = synth("override.jsonl");
  const auto cfg = (work_dir() / "cfg.json").string();
  std::ofstream(cfg) << R"({"rule": "mean", "rho": 0.3, "dims": {"l_vis": 256, "l_txt": 20}})";
  ASSERT_EQ(adp("simulate --log " + log + " --config " + cfg + " --rho 0.6"), 0);
  const auto j = nlohmann::json::parse(out());
  EXPECT_EQ(j.at("config").at("rule"), "mean");
  EXPECT_EQ(j.at("config").at("rho"), 0.6);
  EXPECT_EQ(j.at("config").at("dims").at("l_vis"), 256);
}

TEST(Cli, ValidationErrorsExitWithTwo) {
  const auto log = synth("bad.jsonl");
  EXPECT_EQ(adp("simulate --log " + log + kLengths + " --rho 1.5"), 2);
  EXPECT_NE(err().find("rho"), std::string::npos);
  EXPECT_EQ(adp("simulate --log " + log + kLengths + " --rule median"), 2);
  EXPECT_EQ(adp("simulate --log " + log), 2);
  EXPECT_EQ(adp("simulate --log " + log + kLengths + " --omega 4"), 2);
  EXPECT_EQ(adp("simulate --no-such-flag"), 2);
  EXPECT_EQ(adp("simulate --log /nonexistent/file.jsonl"), 2);
  const auto broken = (work_dir() / "broken.jsonl").string();
  std::ofstream(broken) << "{\"step\": 0, \"action\": [1, 2]}\n";
  EXPECT_EQ(adp("gate --log " + broken), 2);
  EXPECT_NE(err().find("line 1"), std::string::npos);
}

TEST(Cli, GateReportsDecisions) {
  const auto log = synth("gate.jsonl", "coarse");
  ASSERT_EQ(adp("gate --log " + log), 0);
  const auto j = nlohmann::json::parse(out());
  EXPECT_EQ(j.at("windows").size(), 20u);
  EXPECT_EQ(j.at("windows")[0].at("decision"), 0);
}

TEST(Cli, FlopsTableAndCalibration) {
  ASSERT_EQ(adp("flops --csv --rho-grid 0.5 1.0" + kLengths), 0);
  const auto csv = out();
  EXPECT_EQ(csv.rfind("rho,k,", 0), 0u);
  EXPECT_NE(csv.find("\n0.5,256,"), std::string::npos);
  ASSERT_EQ(adp("flops --calibrate"), 0);
  const auto j = nlohmann::json::parse(out());
  EXPECT_LE(j.at("per_forward").at("max_relative_error").get<double>(), 0.05);
  EXPECT_EQ(j.at("per_forward").at("points").size(), 5u);
}

TEST(Cli, StatsCsv) {
  const auto scores = (work_dir() / "scores.txt").string();
  std::ofstream(scores) << "1 1 1 1\n0, 0, 5, 0\n";
  ASSERT_EQ(adp("stats --scores " + scores), 0);
  const auto csv = out();
  EXPECT_NE(csv.find("0,4,4,1.38629,2"), std::string::npos);
  EXPECT_NE(csv.find("1,4,1,0,0"), std::string::npos);
  std::ofstream(scores) << "0 0 0\n";
  EXPECT_EQ(adp("stats --scores " + scores), 2);
}

TEST(Cli, CompareRandomFromKeptCounts) {
  ASSERT_EQ(adp("compare-random -V 512 -m 1 -k 256 --trials 1000"), 0);
  const auto j = nlohmann::json::parse(out());
  EXPECT_EQ(j.at("rows")[0].at("analytic"), 0.5);
  EXPECT_EQ(adp("compare-random -V 10 -m 11 -k 5"), 2);
}

TEST(Cli, SynthIsDeterministic) {
  const auto a = read(synth("s1.jsonl"));
  const auto b = read(synth("s2.jsonl"));
  EXPECT_EQ(a, b);
  ASSERT_EQ(adp("synth -T 2 --extra-steps 3 --out " + (work_dir() / "partial.jsonl").string()), 0);
  ASSERT_EQ(adp("gate --log " + (work_dir() / "partial.jsonl").string()), 0);
  EXPECT_NE(err().find("warning"), std::string::npos);
}
