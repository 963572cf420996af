// Copyright 2026 The Trajplan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "trajplan/cli/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "gtest/gtest.h"
#include "json.hpp"
#include "trajplan/envs/envs.h"
#include "trajplan/planner/planner.h"

namespace trajplan {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result Cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string ReadBytes(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path TempDir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("trajplan_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

// Small chain dataset plus a briefly trained model, shared by several tests.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = TempDir("pipeline");
    ASSERT_EQ(Cli({"make-dataset", "--env", "chain", "--episodes", "40", "--mix",
                   "expert:0.5:0.2,myopic:0.5:0.2", "--seed", "3", "--out",
                   (root_ / "data").string()})
                  .code,
              0);
    const Result r = Cli({"train", "--dataset", (root_ / "data").string(), "--vocab",
                          "10", "--embed", "16", "--heads", "2", "--context", "2",
                          "--updates", "20", "--batch", "8", "--lr", "1e-3",
                          "--warmup", "5", "--seed", "4", "--out",
                          (root_ / "run").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static fs::path root_;
};

fs::path CliPipeline::root_;

TEST(CliTest, GammaPrintsStepsToMass) {
  const Result r = Cli({"gamma", "--gamma", "0", "--gamma-tilde", "0.99", "--mass", "0.95"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "299\n");
}

TEST(CliTest, GammaWritesTablesAndFigures) {
  const fs::path dir = TempDir("gamma");
  ASSERT_EQ(Cli({"gamma", "--gamma", "0.5", "--gamma-tilde", "0.9", "--horizon", "10",
                 "--out", dir.string()})
                .code,
            0);
  const std::string alpha = ReadBytes(dir / "alpha.csv");
  EXPECT_EQ(alpha.substr(0, alpha.find('\n')), "n,alpha,cumulative");
  EXPECT_EQ(std::count(alpha.begin(), alpha.end(), '\n'), 11);
  for (const char* svg : {"alpha.svg", "steps_to_mass.svg"}) {
    EXPECT_EQ(ReadBytes(dir / svg).rfind("<svg", 0), 0u) << svg;
  }
  const auto config = nlohmann::json::parse(ReadBytes(dir / "config.json"));
  EXPECT_EQ(config.at("command"), "gamma");
  EXPECT_EQ(config.at("version"), ToolVersion());
  EXPECT_EQ(config.at("settings").at("gamma_tilde"), 0.9);
}

TEST(CliTest, RejectsBadInvocations) {
  Result r = Cli({"gamma", "--gamma", "0", "--gamma-tilde", "0.99", "--bogus", "1"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos) << r.err;

  r = Cli({"frobnicate"});
  EXPECT_NE(r.code, 0);

  r = Cli({"gamma", "--gamma", "zero", "--gamma-tilde", "0.99"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("cannot parse 'zero'"), std::string::npos) << r.err;

  r = Cli({"gamma", "--gamma-tilde", "0.99"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("missing required setting --gamma"), std::string::npos) << r.err;

  r = Cli({"train", "--dataset", TempDir("nowhere").string(), "--out",
           TempDir("unused").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("does not exist"), std::string::npos) << r.err;
}

TEST(CliTest, HelpDocumentsCsvColumns) {
  const Result r = Cli({"evaluate", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("episode,success,steps,return,expert_return"), std::string::npos);
  EXPECT_NE(r.out.find("slot,name,role,nll"), std::string::npos);
  EXPECT_NE(r.out.find("--beam-width"), std::string::npos);
  EXPECT_NE(r.out.find("--k-act"), std::string::npos);
}

TEST(CliTest, EvaluateRejectsEmptyDataset) {
  const fs::path dir = TempDir("empty");
  Dataset empty;
  empty.manifest = {{"format", "trajplan-dataset"}, {"env", "chain"},
                    {"state_dim", 1},               {"action_dim", 1},
                    {"gamma", 0.99}};
  SaveDataset(dir / "data", empty);
  const Result r = Cli({"evaluate", "--dataset", (dir / "data").string(), "--model",
                        (dir / "model").string(), "--out", (dir / "eval").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("empty dataset"), std::string::npos) << r.err;
}

TEST(CliTest, EvaluateVerifiesChecksums) {
  const fs::path dir = TempDir("tamper");
  ASSERT_EQ(Cli({"make-dataset", "--episodes", "3", "--out", (dir / "data").string()}).code,
            0);
  {
    std::fstream f(dir / "data" / "rewards.f32",
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('\x7f');
  }
  const Result r = Cli({"evaluate", "--dataset", (dir / "data").string(), "--model",
                        (dir / "model").string(), "--out", (dir / "eval").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("checksum mismatch"), std::string::npos) << r.err;
}

TEST(CliTest, MakeDatasetIsByteIdenticalAndSeedEnvOverrides) {
  const fs::path dir = TempDir("dataset");
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(Cli({"make-dataset", "--env", "ring", "--episodes", "5", "--seed", "9",
                   "--out", (dir / name).string()})
                  .code,
              0);
  }
  setenv("TRAJPLAN_SEED", "11", 1);
  // The config file and the environment both lose to an explicit flag.
  Cli({"make-dataset", "--env", "ring", "--episodes", "5", "--out", (dir / "env").string()});
  Cli({"make-dataset", "--config", (dir / "a" / "config.json").string(), "--seed", "12",
       "--out", (dir / "flag").string()});
  unsetenv("TRAJPLAN_SEED");
  EXPECT_EQ(nlohmann::json::parse(ReadBytes(dir / "env" / "config.json")).at("seed"), 11);
  EXPECT_EQ(nlohmann::json::parse(ReadBytes(dir / "flag" / "config.json")).at("seed"), 12);

  // Re-running from a resolved config reproduces the directory.
  ASSERT_EQ(Cli({"make-dataset", "--config", (dir / "a" / "config.json").string(),
                 "--out", (dir / "a2").string()})
                .code,
            0);
  auto strip_config = [](const fs::path& d) {
    fs::remove(d / "config.json");
    return DirectoryChecksum(d);
  };
  // config.json differs only in the output path.
  const std::string a = strip_config(dir / "a");
  EXPECT_EQ(a, strip_config(dir / "b"));
  EXPECT_EQ(a, strip_config(dir / "a2"));
}

TEST(CliTest, TokenizeWritesStats) {
  const fs::path dir = TempDir("tokenize");
  ASSERT_EQ(Cli({"make-dataset", "--episodes", "10", "--out", (dir / "data").string()}).code,
            0);
  const Result r = Cli({"tokenize", "--dataset", (dir / "data").string(), "--vocab", "10",
                        "--out", (dir / "tok").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string stats = ReadBytes(dir / "tok" / "token_stats.csv");
  EXPECT_EQ(stats.substr(0, stats.find('\n')),
            "slot,role,scheme,vocab,lo,hi,distinct_tokens,mean_abs_error,max_abs_error");
  EXPECT_EQ(std::count(stats.begin(), stats.end(), '\n'), 5);  // header + 4 slots
  const auto config = nlohmann::json::parse(ReadBytes(dir / "tok" / "config.json"));
  EXPECT_EQ(config.at("inputs").at("dataset"), DirectoryChecksum(dir / "data"));
}

TEST_F(CliPipeline, TrainTwiceGivesIdenticalCheckpoints) {
  const fs::path again = root_ / "again";
  const fs::path replay = root_ / "replay";
  fs::remove_all(again);
  fs::remove_all(replay);
  ASSERT_EQ(Cli({"train", "--dataset", (root_ / "data").string(), "--vocab", "10",
                 "--embed", "16", "--heads", "2", "--context", "2", "--updates", "20",
                 "--batch", "8", "--lr", "1e-3", "--warmup", "5", "--seed", "4",
                 "--out", again.string()})
                .code,
            0);
  ASSERT_EQ(Cli({"train", "--config", (root_ / "run" / "config.json").string(), "--out",
                 replay.string()})
                .code,
            0);
  const std::string hash = DirectoryChecksum(root_ / "run" / "model");
  EXPECT_EQ(DirectoryChecksum(again / "model"), hash);
  EXPECT_EQ(DirectoryChecksum(replay / "model"), hash);
  EXPECT_EQ(ReadBytes(root_ / "run" / "train_log.csv"), ReadBytes(replay / "train_log.csv"));

  // Preset values are written back, so the config is complete.
  const auto config = nlohmann::json::parse(ReadBytes(root_ / "run" / "config.json"));
  EXPECT_EQ(config.at("settings").at("layers"), 2);
  EXPECT_EQ(config.at("settings").at("embed"), 16);
}

TEST_F(CliPipeline, EvaluateIsDeterministicAcrossWorkers) {
  std::vector<std::string> base = {"evaluate", "--dataset", (root_ / "data").string(),
                                   "--model", (root_ / "run" / "model").string(),
                                   "--mode", "offline", "--beam-width", "4", "--horizon",
                                   "3", "--episodes", "6", "--heuristic", "data"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  const fs::path one = root_ / "eval1", two = root_ / "eval2";
  Result r = Cli(with({"--workers", "1", "--out", one.string()}));
  ASSERT_EQ(r.code, 0) << r.err;
  r = Cli(with({"--workers", "3", "--out", two.string()}));
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* file :
       {"episodes.csv", "trajectories.csv", "slot_nll.csv", "summary.json"}) {
    EXPECT_EQ(ReadBytes(one / file), ReadBytes(two / file)) << file;
  }
  const auto summary = nlohmann::json::parse(ReadBytes(one / "summary.json"));
  EXPECT_EQ(summary.at("episodes"), 6);
  EXPECT_EQ(summary.at("slot_nll").size(), 4u);

  const auto config = nlohmann::json::parse(ReadBytes(one / "config.json"));
  EXPECT_EQ(config.at("inputs").at("model"), DirectoryChecksum(root_ / "run" / "model"));

  // Plotting the loss curve of the run.
  r = Cli({"plot", "--kind", "loss", "--input", (root_ / "run" / "train_log.csv").string(),
           "--out", (root_ / "loss.svg").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(ReadBytes(root_ / "loss.svg").rfind("<svg", 0), 0u);
}

TEST_F(CliPipeline, LayoutMismatchIsReported) {
  const Result r = Cli({"evaluate", "--dataset", (root_ / "data").string(), "--model",
                        (root_ / "run" / "model").string(), "--env", "four_rooms",
                        "--out", (root_ / "bad").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("layout mismatch"), std::string::npos) << r.err;
}

TEST_F(CliPipeline, PlanPrintsActionAndTrace) {
  const fs::path trace = root_ / "trace.json";
  const Result r = Cli({"plan", "--model", (root_ / "run" / "model").string(), "--state",
                        "2", "--mode", "offline", "--beam-width", "4", "--horizon", "2",
                        "--trace", trace.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const double action = std::stod(r.out);
  EXPECT_TRUE(std::abs(action - 0.05) < 1e-9 || std::abs(action - 0.95) < 1e-9) << r.out;
  const auto doc = nlohmann::json::parse(ReadBytes(trace));
  EXPECT_EQ(doc.at("trace").at("mode"), "offline");
  EXPECT_EQ(doc.at("settings").at("k_act"), 20);

  const Result bad = Cli({"plan", "--model", (root_ / "run" / "model").string(),
                          "--state", "2,3"});
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.err.find("layout mismatch"), std::string::npos) << bad.err;
}

TEST(EmpiricalValueHeuristicTest, MatchesValueIterationWithFullCoverage) {
  const TabularEnv chain = MakeChain(0.9);
  DatasetConfig config;
  config.env = "chain";
  config.episodes = 300;
  config.seed = 5;
  config.mix = {{"random", 1.0, 0.0}};
  const Dataset data = GenerateDataset(config);
  const ValueHeuristic fitted = EmpiricalValueHeuristic(data.trajectories, 0.9);
  const ValueHeuristic exact = TabularValueHeuristic(chain, 0.9);
  // Deterministic dynamics: every seen pair has the true successor.
  for (double s = 0; s < 10; ++s) {
    for (double a = 0; a < 2; ++a) {
      const std::vector<double> sv = {s}, av = {a};
      EXPECT_NEAR(fitted(sv, av), exact(sv, av), 1e-6) << s << " " << a;
    }
  }
  EXPECT_THROW(EmpiricalValueHeuristic({}, 0.9), std::invalid_argument);
}

}  // namespace
}  // namespace trajplan
