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

#ifndef TRAJPLAN_ENVS_ENVS_H_
#define TRAJPLAN_ENVS_ENVS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "trajplan/numerics/random.h"
#include "trajplan/occupancy/occupancy.h"
#include "trajplan/tokenizer/tokenizer.h"

namespace trajplan {

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
};

// Environment over real-valued state and action vectors. Step is a pure
// function of (state, action) plus the supplied generator, which only
// stochastic dynamics consume.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int max_steps() const = 0;
  // The action as the dynamics apply it (clamped, and rounded where the
  // environment stores reduced precision).
  virtual std::vector<double> NormalizeAction(
      std::span<const double> action) const = 0;
  // Out-of-bounds actions are clamped.
  virtual StepResult Step(std::span<const double> state,
                          std::span<const double> action, Rng& rng) const = 0;
  // True when an episode starting (or arriving) here is already over.
  virtual bool IsTerminal(std::span<const double> state) const = 0;
  virtual std::vector<double> SampleStart(Rng& rng) const = 0;
  virtual std::vector<double> SampleRandomAction(Rng& rng) const = 0;
  // Whether logged episodes end with the terminal state as an extra record
  // (zero action, zero reward).
  virtual bool records_terminal_state() const { return false; }
  // Constants needed to rebuild the environment.
  virtual nlohmann::json Describe() const = 0;
};

// ---------------------------------------------------------------------------
// Tabular environments

// Bellman optimality solution. Rewards are earned on arrival:
// Q(s,a) = sum_s' p(s'|s,a) (r(s') + gamma V(s')).
struct ValueIterationResult {
  Eigen::VectorXd v;
  Eigen::MatrixXd q;             // S x A
  std::vector<int> greedy;       // argmax_a Q, lowest index on ties
  std::vector<double> residuals;  // sup-norm Bellman residual before each sweep
};

ValueIterationResult ValueIteration(const TabularMDP& mdp, double gamma,
                                    double tol = 1e-12);

// One-hot policy matrix from per-state action choices.
Eigen::MatrixXd DeterministicPolicy(std::span<const int> actions,
                                    int num_actions);

// A TabularMDP run as an episodic environment. The state and action vectors
// are single integer-valued entries.
class TabularEnv : public Environment {
 public:
  TabularEnv(std::string id, TabularMDP mdp, std::vector<bool> terminal,
             int max_steps);

  std::string id() const override { return id_; }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int max_steps() const override { return max_steps_; }
  std::vector<double> NormalizeAction(
      std::span<const double> action) const override;
  StepResult Step(std::span<const double> state, std::span<const double> action,
                  Rng& rng) const override;
  bool IsTerminal(std::span<const double> state) const override;
  std::vector<double> SampleStart(Rng& rng) const override;
  std::vector<double> SampleRandomAction(Rng& rng) const override;
  nlohmann::json Describe() const override;

  const TabularMDP& mdp() const { return mdp_; }
  int StateIndex(std::span<const double> state) const;
  int ActionIndex(std::span<const double> action) const;

 private:
  std::string id_;
  TabularMDP mdp_;
  std::vector<bool> terminal_;
  int max_steps_;
};

// Ten states in a row; moving off either end stays put. Arriving at state 0
// pays 0.1, arriving at state 9 pays 1. Actions: 0 = left, 1 = right.
// Episodes last 20 steps and start uniformly in states 1..3.
TabularEnv MakeChain(double gamma = 0.99);
// Start state 0; pulling arm a moves to state 1 + a and ends the episode.
// Arriving at state 1 pays 0, at state 2 pays 1.
TabularEnv MakeBandit();
// Five states on a cycle; action 0 stays, action 1 advances. No reward.
// Episodes last 20 steps from a uniform start.
TabularEnv MakeRing();

// ---------------------------------------------------------------------------
// Four rooms

// Continuous navigation in the unit square over an 11 x 11 cell layout of
// four rooms joined by one-cell doors. Actions are displacements clamped to
// [-0.05, 0.05]^2; blocked moves slide along walls. States and actions are
// rounded to float32 so logged data replays exactly.
class FourRooms : public Environment {
 public:
  static constexpr int kGrid = 11;
  static constexpr double kMaxDisplacement = 0.05;
  static constexpr double kGoalRadius = 0.05;
  static constexpr int kMaxSteps = 400;

  explicit FourRooms(std::array<double, 2> goal = {0.9, 0.9});

  std::string id() const override { return "four_rooms"; }
  int state_dim() const override { return 2; }
  int action_dim() const override { return 2; }
  int max_steps() const override { return kMaxSteps; }
  std::vector<double> NormalizeAction(
      std::span<const double> action) const override;
  StepResult Step(std::span<const double> state, std::span<const double> action,
                  Rng& rng) const override;
  bool IsTerminal(std::span<const double> state) const override;
  std::vector<double> SampleStart(Rng& rng) const override;
  std::vector<double> SampleRandomAction(Rng& rng) const override;
  bool records_terminal_state() const override { return true; }
  nlohmann::json Describe() const override;

  const std::array<double, 2>& goal() const { return goal_; }
  // Free space: inside the unit square and outside wall cells.
  static bool IsWallCell(int col, int row);
  static bool IsFree(double x, double y);
  // Half-open rectangle [x0, x1) x [y0, y1).
  struct Rect {
    double x0, x1, y0, y1;
  };
  static const std::vector<Rect>& WallRects();
  // Exact test: no point of the closed segment lies in a wall.
  static bool SegmentFree(std::array<double, 2> a, std::array<double, 2> b);
  // Uniform point in free space, rounded to float32.
  static std::array<double, 2> SampleFreePoint(Rng& rng);
  // Deterministic move with wall sliding; `from` must be free.
  static std::array<double, 2> Move(std::array<double, 2> from,
                                    std::array<double, 2> displacement);

 private:
  std::array<double, 2> goal_;
};

// Shortest collision-free polyline from `from` to `to` through door
// waypoints (visibility graph, Dijkstra). The first point is `from`, the last
// `to`. Throws std::runtime_error if either point is not free.
std::vector<std::array<double, 2>> FourRoomsPath(std::array<double, 2> from,
                                                 std::array<double, 2> to);

// ---------------------------------------------------------------------------
// Policies

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<double> Act(std::span<const double> state, Rng& rng) = 0;
};

// Four rooms: head for the next waypoint of the shortest path to the goal at
// full speed. Tabular: greedy with respect to value iteration at the MDP's
// discount. Throws std::runtime_error if the goal cannot be reached.
std::unique_ptr<Policy> MakeExpertPolicy(const Environment& env);
// Tabular: greedy with respect to value iteration at `gamma`.
std::unique_ptr<Policy> MakeGreedyTabularPolicy(const TabularEnv& env,
                                                double gamma);
std::unique_ptr<Policy> MakeRandomPolicy(const Environment& env);
// With probability epsilon replace the base action by a random one.
std::unique_ptr<Policy> MakeNoisyPolicy(const Environment& env,
                                        std::unique_ptr<Policy> base,
                                        double epsilon);

// ---------------------------------------------------------------------------
// Episodes and datasets

struct Episode {
  RawTrajectory trajectory;
  std::vector<double> goal;  // four rooms only
  bool success = false;      // reached a terminal state
  double discounted_return = 0.0;
};

// Rolls `policy` from `start` for at most env.max_steps() steps.
Episode RollOut(const Environment& env, Policy& policy,
                std::vector<double> start, double gamma, Rng& rng);

// Named behavior used for a share of a dataset's episodes:
//   "expert", "random", or "myopic" (tabular only: greedy w.r.t. value
//   iteration at myopic_gamma), each optionally epsilon-noised.
struct BehaviorMix {
  std::string name;
  double fraction = 1.0;
  double epsilon = 0.0;
};

struct DatasetConfig {
  std::string env = "chain";  // chain | bandit | ring | four_rooms
  int episodes = 100;
  uint64_t seed = 0;
  double gamma = 0.99;         // reward-to-go discount recorded in manifest
  double myopic_gamma = 0.3;
  std::vector<BehaviorMix> mix = {{"expert", 1.0, 0.0}};
};

struct Dataset {
  nlohmann::json manifest;
  std::vector<RawTrajectory> trajectories;
  std::vector<std::vector<double>> goals;  // per episode; empty if none
  std::vector<std::string> behaviors;      // per episode
};

// Builds an environment from its id (and per-episode goal for four rooms).
std::unique_ptr<Environment> MakeEnvironment(const std::string& id,
                                             std::span<const double> goal = {});

// Episode counts per behavior by largest remainder, so realized fractions
// are within 1/episodes of the request. Assignment order is shuffled with
// the dataset seed; episode i draws from Rng(HashCounters(seed, i)).
Dataset GenerateDataset(const DatasetConfig& config);

// Directory layout: manifest.json plus little-endian float32 arrays
// states.f32, actions.f32, rewards.f32 and (if any) goals.f32. Episode
// lengths, terminal flags and behaviors live in the manifest.
void SaveDataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset LoadDataset(const std::filesystem::path& dir);

// Largest |replayed - logged| state difference when re-simulating each
// trajectory from its first state and logged actions.
double ReplayError(const Dataset& dataset);

}  // namespace trajplan

#endif  // TRAJPLAN_ENVS_ENVS_H_
