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

#include "trajplan/envs/envs.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>

#include "gtest/gtest.h"

namespace trajplan {
namespace {

std::string ReadBytes(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::filesystem::path TempDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("trajplan_envs_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

TEST(FourRoomsTest, LayoutMatchesCellGrid) {
  for (int col = 0; col < FourRooms::kGrid; ++col) {
    for (int row = 0; row < FourRooms::kGrid; ++row) {
      const double x = (col + 0.5) / FourRooms::kGrid;
      const double y = (row + 0.5) / FourRooms::kGrid;
      EXPECT_EQ(FourRooms::IsFree(x, y), !FourRooms::IsWallCell(col, row))
          << col << "," << row;
    }
  }
  EXPECT_FALSE(FourRooms::IsFree(-0.01, 0.5));
  EXPECT_FALSE(FourRooms::IsFree(0.5, 1.01));
  EXPECT_FALSE(FourRooms::IsFree(1.0, 6.5 / 11));  // wall cell on the edge
}

TEST(FourRoomsTest, ZeroActionKeepsState) {
  FourRooms env({0.9, 0.9});
  Rng rng(0);
  const std::vector<double> s = {0.2f, 0.2f};
  StepResult r = env.Step(s, std::vector<double>{0.0, 0.0}, rng);
  EXPECT_EQ(r.state, s);
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_FALSE(r.done);
}

TEST(FourRoomsTest, MovesIntoWallsStayFree) {
  FourRooms env({0.9, 0.9});
  Rng rng(3);
  for (int i = 0; i < 20000; ++i) {
    const auto p = FourRooms::SampleFreePoint(rng);
    const std::vector<double> a = {rng.Uniform(-0.2, 0.2), rng.Uniform(-0.2, 0.2)};
    StepResult r = env.Step(std::vector<double>{p[0], p[1]}, a, rng);
    ASSERT_TRUE(FourRooms::IsFree(r.state[0], r.state[1]));
    EXPECT_LE(std::abs(r.state[0] - p[0]), 0.05 + 1e-6);
    EXPECT_LE(std::abs(r.state[1] - p[1]), 0.05 + 1e-6);
    EXPECT_EQ(static_cast<float>(r.state[0]), r.state[0]);
  }
  // pushing straight into the central wall from just left of it
  const std::vector<double> s = {0.44f, 0.3f};
  StepResult r = env.Step(s, std::vector<double>{0.05, 0.0}, rng);
  EXPECT_TRUE(FourRooms::IsFree(r.state[0], r.state[1]));
  EXPECT_LT(r.state[0], 5.0 / 11);
  EXPECT_GT(r.state[0], 0.44);
  // sliding along the wall keeps the parallel component
  r = env.Step(s, std::vector<double>{0.05, 0.03}, rng);
  EXPECT_NEAR(r.state[1], 0.33, 1e-6);
}

TEST(FourRoomsTest, GoalEntryPaysAndEnds) {
  FourRooms env({0.2, 0.2});
  Rng rng(0);
  StepResult r = env.Step(std::vector<double>{0.2, 0.28},
                          std::vector<double>{0.0, -0.05}, rng);
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_TRUE(r.done);
}

TEST(FourRoomsTest, GoalInsideWallThrows) {
  EXPECT_THROW(FourRooms({5.5 / 11, 0.5}), std::invalid_argument);
  EXPECT_THROW(FourRoomsPath({0.1, 0.1}, {5.5 / 11, 0.5}), std::runtime_error);
}

TEST(FourRoomsTest, PathCrossesDoors) {
  // bottom-left to top-right needs two doors
  const auto path = FourRoomsPath({0.1, 0.1}, {0.9, 0.9});
  EXPECT_GE(path.size(), 4u);
  for (size_t i = 0; i + 1 < path.size(); ++i) {
    EXPECT_TRUE(FourRooms::SegmentFree(path[i], path[i + 1]));
  }
  // same room: direct
  EXPECT_EQ(FourRoomsPath({0.1, 0.1}, {0.3, 0.35}).size(), 2u);
}

TEST(ExpertTest, SameRoomStraightLine) {
  Rng rng(1);
  const std::vector<std::pair<std::vector<double>, std::array<double, 2>>> cases =
      {{{0.05, 0.05}, {0.4, 0.4}}, {{0.9, 0.1}, {0.6, 0.3}}, {{0.1, 0.9}, {0.1, 0.6}}};
  for (const auto& [start, goal] : cases) {
    FourRooms env(goal);
    auto expert = MakeExpertPolicy(env);
    Episode ep = RollOut(env, *expert, start, 0.99, rng);
    const double dist = std::hypot(goal[0] - start[0], goal[1] - start[1]);
    EXPECT_TRUE(ep.success);
    // the last record is the terminal state itself
    EXPECT_LE(ep.trajectory.steps() - 1,
              std::ceil(dist / FourRooms::kMaxDisplacement) + 2);
  }
}

TEST(ExpertTest, StartAtGoalIsImmediatelyDone) {
  FourRooms env({0.3, 0.3});
  auto expert = MakeExpertPolicy(env);
  Rng rng(0);
  Episode ep = RollOut(env, *expert, {0.3, 0.3}, 0.99, rng);
  EXPECT_TRUE(ep.success);
  EXPECT_EQ(ep.trajectory.steps(), 1);
  EXPECT_EQ(ep.discounted_return, 0.0);
}

TEST(ExpertTest, AlwaysReachesGoal) {
  Rng rng(2024);
  int successes = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto goal = FourRooms::SampleFreePoint(rng);
    const auto start = FourRooms::SampleFreePoint(rng);
    FourRooms env(goal);
    auto expert = MakeExpertPolicy(env);
    Episode ep = RollOut(env, *expert, {start[0], start[1]}, 0.99, rng);
    successes += ep.success;
  }
  EXPECT_EQ(successes, 1000);
}

// With this layout a random walk finds the goal in about 24% of episodes
// over the full 400-step cap and about 16% within 200 steps.
TEST(RandomPolicyTest, RarelyReachesGoal) {
  Rng rng(77);
  int within_cap = 0;
  int within_200 = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto goal = FourRooms::SampleFreePoint(rng);
    const auto start = FourRooms::SampleFreePoint(rng);
    FourRooms env(goal);
    auto random = MakeRandomPolicy(env);
    Episode ep = RollOut(env, *random, {start[0], start[1]}, 0.99, rng);
    within_cap += ep.success;
    // the terminal record adds one row beyond the steps taken
    within_200 += ep.success && ep.trajectory.steps() <= 201;
  }
  EXPECT_LT(within_200, 200);
  EXPECT_LT(within_cap, 300);
}

TEST(ValueIterationTest, BanditPicksBetterArm) {
  TabularEnv bandit = MakeBandit();
  ValueIterationResult vi = ValueIteration(bandit.mdp(), 0.9);
  EXPECT_EQ(vi.greedy[0], 1);
}

TEST(ValueIterationTest, ContractionBound) {
  Rng rng(5);
  TabularMDP mdp = RandomTabularMDP(6, 3, 0.9, rng);
  ValueIterationResult vi = ValueIteration(mdp, 0.9, 1e-10);
  ASSERT_GT(vi.residuals.size(), 2u);
  for (size_t k = 1; k < vi.residuals.size(); ++k) {
    EXPECT_LE(vi.residuals[k],
              std::pow(0.9, static_cast<double>(k)) * vi.residuals[0] * (1 + 1e-9) +
                  1e-15);
  }
  EXPECT_LT(vi.residuals.back(), 1e-10);
}

TEST(ValueIterationTest, AgreesWithLinearSolveForGreedyPolicy) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    TabularMDP mdp = RandomTabularMDP(6, 3, 0.9, rng);
    const double tol = 1e-10;
    ValueIterationResult vi = ValueIteration(mdp, 0.9, tol);
    TabularMDP greedy = mdp.WithPolicy(DeterministicPolicy(vi.greedy, 3));
    EXPECT_LT((ExactStateValue(greedy, 0.9) - vi.v).cwiseAbs().maxCoeff(), tol);
  }
}

TEST(ChainTest, ExpertMatchesValueIteration) {
  TabularEnv chain = MakeChain();
  ValueIterationResult vi = ValueIteration(chain.mdp(), chain.mdp().gamma);
  auto expert = MakeExpertPolicy(chain);
  Rng rng(0);
  for (int s = 0; s < 10; ++s) {
    EXPECT_EQ(expert->Act(std::vector<double>{double(s)}, rng)[0], vi.greedy[s]);
    EXPECT_EQ(vi.greedy[s], 1);  // heading right is optimal everywhere
  }
}

TEST(ChainTest, MyopicBehaviorHeadsLeftFromStartStates) {
  TabularEnv chain = MakeChain();
  ValueIterationResult vi = ValueIteration(chain.mdp(), 0.3);
  for (int s = 1; s <= 3; ++s) EXPECT_EQ(vi.greedy[s], 0) << s;
}

TEST(DatasetTest, PureExpertChainIsOptimal) {
  DatasetConfig config;
  config.env = "chain";
  config.episodes = 30;
  config.seed = 4;
  Dataset data = GenerateDataset(config);
  for (const RawTrajectory& raw : data.trajectories) {
    ASSERT_EQ(raw.steps(), 20);
    const int start = static_cast<int>(raw.state(0)[0]);
    for (int t = 0; t < raw.steps(); ++t) {
      EXPECT_EQ(raw.action(t)[0], 1.0);
      EXPECT_EQ(raw.state(t)[0], std::min(start + t, 9));
    }
  }
}

TEST(DatasetTest, MixtureFractionsRecovered) {
  DatasetConfig config;
  config.env = "chain";
  config.episodes = 37;
  config.mix = {{"expert", 0.25, 0.0}, {"myopic", 0.5, 0.2}, {"random", 0.25, 0}};
  Dataset data = GenerateDataset(config);
  std::map<std::string, int> counts;
  for (const auto& b : data.behaviors) ++counts[b];
  for (const auto& m : config.mix) {
    EXPECT_LE(std::abs(counts[m.name] / 37.0 - m.fraction), 1.0 / 37);
  }
  for (const auto& entry : data.manifest.at("mix")) {
    EXPECT_EQ(entry.at("episodes").get<int>(),
              counts[entry.at("behavior").get<std::string>()]);
  }
}

TEST(DatasetTest, BadMixRejected) {
  DatasetConfig config;
  config.mix = {{"expert", 0.5, 0.0}};
  EXPECT_THROW(GenerateDataset(config), std::invalid_argument);
  config.mix = {{"teleport", 1.0, 0.0}};
  EXPECT_THROW(GenerateDataset(config), std::invalid_argument);
  config.mix = {{"myopic", 1.0, 0.0}};
  config.env = "four_rooms";
  EXPECT_THROW(GenerateDataset(config), std::invalid_argument);
}

TEST(DatasetTest, SameSeedGivesIdenticalFilesAndReplays) {
  for (const std::string env : {"chain", "four_rooms", "bandit", "ring"}) {
    DatasetConfig config;
    config.env = env;
    config.episodes = 40;
    config.seed = 9;
    config.mix = {{"expert", 0.5, 0.1}, {"random", 0.5, 0.0}};
    const auto a = TempDir(env + "_a");
    const auto b = TempDir(env + "_b");
    SaveDataset(a, GenerateDataset(config));
    SaveDataset(b, GenerateDataset(config));
    for (const auto& entry : std::filesystem::directory_iterator(a)) {
      EXPECT_EQ(ReadBytes(entry.path()),
                ReadBytes(b / entry.path().filename()))
          << entry.path();
    }
    Dataset loaded = LoadDataset(a);
    EXPECT_EQ(loaded.trajectories.size(), 40u);
    EXPECT_LE(ReplayError(loaded), 1e-9) << env;
    Dataset direct = GenerateDataset(config);
    for (size_t e = 0; e < direct.trajectories.size(); ++e) {
      EXPECT_EQ(loaded.trajectories[e].states, direct.trajectories[e].states);
      EXPECT_EQ(loaded.trajectories[e].actions, direct.trajectories[e].actions);
      EXPECT_EQ(loaded.goals[e], direct.goals[e]);
    }
  }
}

TEST(DatasetTest, CorruptionDetected) {
  DatasetConfig config;
  config.episodes = 3;
  const auto dir = TempDir("corrupt");
  SaveDataset(dir, GenerateDataset(config));
  {
    std::fstream f(dir / "states.f32", std::ios::in | std::ios::out |
                                           std::ios::binary);
    f.seekp(0);
    f.put('\x7f');
  }
  EXPECT_THROW(LoadDataset(dir), std::runtime_error);
  EXPECT_THROW(LoadDataset(TempDir("missing")), std::runtime_error);
}

}  // namespace
}  // namespace trajplan
