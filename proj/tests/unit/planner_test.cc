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

#include "trajplan/planner/planner.h"

#include <cmath>

#include "gtest/gtest.h"
#include "trajplan/seqmodel/train.h"

namespace trajplan {
namespace {

RawTrajectory EmptyHistory() {
  RawTrajectory h;
  h.state_dim = 1;
  h.action_dim = 1;
  return h;
}

// Small random decoder with vocabulary `vocab` on a 1+1 layout.
std::shared_ptr<const DecoderWeights> RandomModel(int vocab, uint64_t seed,
                                                  double scale = 1.0) {
  ModelConfig c;
  c.layers = 1;
  c.heads = 2;
  c.embed_dim = 8;
  c.vocab = vocab;
  c.state_dim = 1;
  c.action_dim = 1;
  c.context_transitions = 3;
  ModelParams p = InitParams(c, seed);
  Rng rng(seed + 7);
  for (auto& [name, t] : p.tensors) {
    for (double& x : t.data()) x += scale * rng.Normal();
  }
  return std::make_shared<DecoderWeights>(p);
}

SessionCursor CursorWithPrefix(std::shared_ptr<const DecoderWeights> model,
                               const std::vector<int>& prefix) {
  DecoderSession session(std::move(model));
  for (int t : prefix) session.Push(t);
  return SessionCursor(std::move(session));
}

std::vector<int> RandomPrefix(int vocab, Rng& rng) {
  std::vector<int> prefix(1 + rng.UniformInt(3));
  for (int& t : prefix) t = static_cast<int>(rng.UniformInt(vocab));
  return prefix;
}

int Pow(int base, int exp) {
  int out = 1;
  while (exp-- > 0) out *= base;
  return out;
}

TEST(BeamSearchTest, FullWidthMatchesExhaustiveSearch) {
  Rng rng(1);
  for (int instance = 0; instance < 30; ++instance) {
    const int vocab = 2 + static_cast<int>(rng.UniformInt(4));
    const int steps = 1 + static_cast<int>(rng.UniformInt(4));
    const auto model = RandomModel(vocab, 100 + instance);
    const SessionCursor cursor = CursorWithPrefix(model, RandomPrefix(vocab, rng));
    const Hypothesis beam = BeamSearch(cursor, steps, Pow(vocab, steps));
    const Hypothesis oracle = ExhaustiveSearch(cursor, steps);
    EXPECT_EQ(beam.tokens, oracle.tokens) << instance;
    EXPECT_EQ(beam.score, oracle.score) << instance;
  }
}

TEST(BeamSearchTest, WidthOneIsGreedy) {
  Rng rng(2);
  for (int instance = 0; instance < 10; ++instance) {
    const auto model = RandomModel(5, 200 + instance);
    SessionCursor cursor = CursorWithPrefix(model, RandomPrefix(5, rng));
    const Hypothesis beam = BeamSearch(cursor, 4, 1);
    std::vector<int> greedy;
    double score = 0.0;
    for (int step = 0; step < 4; ++step) {
      const Eigen::VectorXd& lp = cursor.NextLogProbs();
      int best = 0;
      for (int v = 1; v < 5; ++v) {
        if (lp(v) > lp(best)) best = v;
      }
      greedy.push_back(best);
      score += lp(best);
      cursor.Push(best);
    }
    EXPECT_EQ(beam.tokens, greedy);
    EXPECT_EQ(beam.score, score);
  }
}

TEST(BeamSearchTest, UniformModelReturnsFirstSequence) {
  ModelConfig c;
  c.vocab = 4;
  c.embed_dim = 8;
  c.state_dim = 1;
  c.action_dim = 1;
  // zero output head: every next-token distribution is uniform
  const auto model = std::make_shared<DecoderWeights>(InitParams(c, 3));
  const Hypothesis h = BeamSearch(CursorWithPrefix(model, {2}), 3, 16);
  EXPECT_EQ(h.tokens, (std::vector<int>{0, 0, 0}));
  EXPECT_NEAR(h.score, 3 * std::log(1.0 / 4), 1e-12);
}

TEST(BeamSearchTest, WideningNeverHurts) {
  Rng rng(4);
  for (int instance = 0; instance < 100; ++instance) {
    const int vocab = 3 + static_cast<int>(rng.UniformInt(3));
    const auto model = RandomModel(vocab, 300 + instance);
    const SessionCursor cursor = CursorWithPrefix(model, RandomPrefix(vocab, rng));
    const int b = 1 + static_cast<int>(rng.UniformInt(4));
    EXPECT_GE(BeamSearch(cursor, 4, 2 * b).score, BeamSearch(cursor, 4, b).score)
        << instance;
  }
}

TEST(BeamSearchTest, BestScoreNonIncreasingInSteps) {
  Rng rng(5);
  for (int instance = 0; instance < 20; ++instance) {
    const auto model = RandomModel(4, 400 + instance);
    const SessionCursor cursor = CursorWithPrefix(model, RandomPrefix(4, rng));
    double previous = 0.0;
    for (int steps = 1; steps <= 6; ++steps) {
      const double score = BeamSearch(cursor, steps, 3).score;
      EXPECT_LE(score, previous);
      previous = score;
    }
  }
}

TEST(BeamSearchTest, DeterministicAndValidated) {
  const auto model = RandomModel(5, 6);
  const SessionCursor cursor = CursorWithPrefix(model, {1, 3});
  std::vector<Hypothesis> a_beam, b_beam;
  const Hypothesis a = BeamSearch(cursor, 5, 7, &a_beam);
  const Hypothesis b = BeamSearch(cursor, 5, 7, &b_beam);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.score, b.score);
  ASSERT_EQ(a_beam.size(), 7u);
  for (size_t i = 0; i + 1 < a_beam.size(); ++i) {
    EXPECT_TRUE(RanksBefore(a_beam[i], a_beam[i + 1]));
  }
  EXPECT_THROW(BeamSearch(cursor, 0, 2), std::invalid_argument);
  EXPECT_THROW(BeamSearch(cursor, 2, 0), std::invalid_argument);
  const std::vector<int> fits(model->config.block_size() - 1, 0);
  EXPECT_NO_THROW(BeamSearchTokens(model, fits, 2, 2));
  const std::vector<int> too_long(model->config.block_size(), 0);
  EXPECT_THROW(BeamSearchTokens(model, too_long, 2, 2), std::invalid_argument);
  EXPECT_THROW(BeamSearchTokens(model, {}, 2, 2), std::invalid_argument);
}

TEST(OfflineScoreTest, Formulas) {
  const std::vector<double> r = {1.0, 2.0, 4.0};
  EXPECT_DOUBLE_EQ(RewardToGoScore(r, 10.0, 0.5), 1.0 + 0.5 * 2.0 + 0.25 * 10.0);
  EXPECT_DOUBLE_EQ(HeuristicScore(r, 8.0, 0.5),
                   1.0 + 0.5 * 2.0 + 0.25 * 4.0 + 0.125 * 8.0);
  // a tail of (R - r_last) / gamma reproduces the reward-to-go score
  EXPECT_DOUBLE_EQ(HeuristicScore(r, (10.0 - 4.0) / 0.5, 0.5),
                   RewardToGoScore(r, 10.0, 0.5));
  EXPECT_THROW(RewardToGoScore({}, 1.0, 0.5), std::invalid_argument);
}

// Tokenized dataset plus a model trained on it.
struct Trained {
  DiscretizerSpec spec;
  std::shared_ptr<const DecoderWeights> model;
  double gamma = 0.99;
};

Trained TrainOn(const std::string& env, std::vector<BehaviorMix> mix,
                int episodes, int updates, bool goal = false) {
  DatasetConfig dc;
  dc.env = env;
  dc.episodes = episodes;
  dc.seed = 11;
  dc.mix = std::move(mix);
  const Dataset ds = GenerateDataset(dc);
  VocabOptions vo;
  vo.vocab = 10;
  Trained out;
  out.gamma = dc.gamma;
  out.spec = FitUniform(ds.trajectories, vo, dc.gamma);
  std::vector<TokenizedTrajectory> data;
  for (const RawTrajectory& raw : ds.trajectories) {
    data.push_back(Encode(out.spec, raw, dc.gamma));
  }
  ModelConfig mc;
  mc.embed_dim = 32;
  mc.context_transitions = 2;
  mc.dropout = 0.0;
  mc.goal_conditioned = goal;
  mc = ConfigureForTokenizer(mc, out.spec);
  TrainConfig tc;
  tc.updates = updates;
  tc.batch = 16;
  tc.lr_max = 3e-3;
  tc.warmup_updates = updates / 10;
  tc.seed = 12;
  out.model = std::make_shared<DecoderWeights>(
      Train(InitParams(mc, 13), data, tc).params);
  return out;
}

class BanditPlannerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    trained_ = new Trained(TrainOn("bandit", {{"random", 1.0, 0.0}}, 60, 300));
  }
  static void TearDownTestSuite() { delete trained_; }
  static Trained* trained_;
};
Trained* BanditPlannerTest::trained_ = nullptr;

TEST_F(BanditPlannerTest, OfflinePicksTheBetterArm) {
  const TabularEnv env = MakeBandit();
  PlanConfig pc;
  pc.beam_width = 8;
  pc.horizon = 3;
  pc.gamma = trained_->gamma;
  const Planner planner(trained_->model, trained_->spec, pc, PlanMode::kOffline);
  const int best_arm =
      ValueIteration(env.mdp(), env.mdp().gamma).greedy[0];
  int picked = 0;
  for (int run = 0; run < 100; ++run) {
    Rng rng(HashCounters(5, run));
    const PlanResult plan = planner.Plan(EmptyHistory(), std::vector<double>{0.0}, rng);
    picked += env.ActionIndex(env.NormalizeAction(plan.action)) == best_arm;
  }
  EXPECT_EQ(picked, 100);
}

TEST_F(BanditPlannerTest, TracedScoresFollowTheFormula) {
  const TrajectoryLayout& layout = trained_->spec.layout;
  for (bool zero_heuristic : {false, true}) {
    PlanConfig pc;
    pc.beam_width = 6;
    pc.horizon = 3;
    pc.gamma = 0.9;
    Planner planner(trained_->model, trained_->spec, pc, PlanMode::kOffline);
    planner.set_trace(true);
    if (zero_heuristic) {
      planner.set_heuristic([](auto, auto) { return 0.0; });
    }
    Rng rng(9);
    const PlanResult plan = planner.Plan(EmptyHistory(), std::vector<double>{0.0}, rng);
    const nlohmann::json& last = plan.trace.at("steps").back();
    ASSERT_FALSE(last.empty());
    double previous = 1e300;
    for (const auto& hyp : last) {
      const std::vector<int> tokens = hyp.at("tokens");
      std::vector<double> rewards;
      double value = 0.0;
      for (size_t start = 0; start < tokens.size(); start += layout.stride()) {
        const size_t r = start + layout.action_dim;
        rewards.push_back(
            trained_->spec.dim(layout.reward_index()).Decode(tokens[r]));
        value = trained_->spec.dim(layout.value_index()).Decode(tokens[r + 1]);
      }
      double discounted = 0.0;
      for (size_t i = 0; i < rewards.size(); ++i) {
        discounted += std::pow(0.9, static_cast<double>(i)) * rewards[i];
      }
      const double score = hyp.at("score");
      if (zero_heuristic) {
        EXPECT_EQ(score, HeuristicScore(rewards, 0.0, 0.9));
        EXPECT_NEAR(score, discounted, 1e-12);
      } else {
        EXPECT_EQ(score, RewardToGoScore(rewards, value, 0.9));
      }
      EXPECT_LE(score, previous);
      previous = score;
    }
  }
}

TEST_F(BanditPlannerTest, RunEpisodeBookkeeping) {
  const TabularEnv env = MakeBandit();
  PlanConfig pc;
  pc.beam_width = 4;
  pc.horizon = 2;
  const Planner planner(trained_->model, trained_->spec, pc, PlanMode::kOffline);
  Rng rng(1);
  const Episode empty = RunEpisode(env, planner, {0.0}, 0, 0.9, rng);
  EXPECT_EQ(empty.trajectory.steps(), 0);
  EXPECT_EQ(empty.discounted_return, 0.0);

  Rng a_rng(2), b_rng(2);
  const Episode a = RunEpisode(env, planner, {0.0}, -1, 0.9, a_rng);
  const Episode b = RunEpisode(env, planner, {0.0}, -1, 0.9, b_rng);
  EXPECT_EQ(a.trajectory.states, b.trajectory.states);
  EXPECT_EQ(a.trajectory.actions, b.trajectory.actions);
  double ret = 0.0;
  for (int t = 0; t < a.trajectory.steps(); ++t) {
    ret += std::pow(0.9, t) * a.trajectory.rewards[t];
  }
  EXPECT_DOUBLE_EQ(a.discounted_return, ret);
  EXPECT_TRUE(a.success);
}

TEST_F(BanditPlannerTest, RejectsMismatchedModels) {
  EXPECT_THROW(
      Planner(trained_->model, trained_->spec, PlanConfig{}, PlanMode::kGoal),
      std::invalid_argument);
  DiscretizerSpec other = trained_->spec;
  other.layout.state_dim = 2;
  EXPECT_THROW(
      Planner(trained_->model, other, PlanConfig{}, PlanMode::kImitation),
      std::invalid_argument);
  PlanConfig bad;
  bad.k_act = 0.0;
  EXPECT_THROW(Planner(trained_->model, trained_->spec, bad, PlanMode::kOffline),
               std::invalid_argument);
}

TEST(ImitationPlannerTest, ReplaysTheExpertOnTheChain) {
  const Trained trained = TrainOn("chain", {{"expert", 1.0, 0.0}}, 30, 300);
  const TabularEnv env = MakeChain();
  PlanConfig pc;
  pc.beam_width = 4;
  pc.horizon_tokens = 1;  // the action token only: behavior cloning
  const Planner planner(trained.model, trained.spec, pc, PlanMode::kImitation);
  auto expert = MakeExpertPolicy(env);
  int matches = 0;
  int visited = 0;
  for (int episode = 0; episode < 5; ++episode) {
    Rng rng(HashCounters(21, episode));
    const Episode ep = RunEpisode(env, planner, env.SampleStart(rng), -1, 0.99, rng);
    for (int t = 0; t < ep.trajectory.steps(); ++t) {
      Rng unused(0);
      const auto want = expert->Act(ep.trajectory.state(t), unused);
      matches += env.ActionIndex(ep.trajectory.action(t)) == env.ActionIndex(want);
      ++visited;
    }
  }
  EXPECT_EQ(visited, 100);
  EXPECT_EQ(matches, visited);

  // a longer horizon plans a full transition ahead and still acts like the expert
  PlanConfig longer = pc;
  longer.horizon_tokens = 0;
  longer.horizon = 3;
  const Planner ahead(trained.model, trained.spec, longer, PlanMode::kImitation);
  Rng rng(3);
  const PlanResult plan = ahead.Plan(EmptyHistory(), std::vector<double>{2.0}, rng);
  EXPECT_EQ(plan.tokens.size(), 3u + 2 * 4);
  EXPECT_EQ(env.ActionIndex(env.NormalizeAction(plan.action)), 1);
}

}  // namespace
}  // namespace trajplan
