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

#include <cmath>
#include <stdexcept>

#include "trajplan/envs/envs.h"

namespace trajplan {
namespace {

class FourRoomsExpert : public Policy {
 public:
  explicit FourRoomsExpert(const FourRooms& env) : goal_(env.goal()) {}

  std::vector<double> Act(std::span<const double> state, Rng&) override {
    const auto path = FourRoomsPath({state[0], state[1]}, goal_);
    size_t next = 1;
    while (next + 1 < path.size() &&
           std::hypot(path[next][0] - state[0], path[next][1] - state[1]) <
               1e-6) {
      ++next;
    }
    double dx = path[next][0] - state[0];
    double dy = path[next][1] - state[1];
    const double norm = std::hypot(dx, dy);
    if (norm > FourRooms::kMaxDisplacement) {
      dx *= FourRooms::kMaxDisplacement / norm;
      dy *= FourRooms::kMaxDisplacement / norm;
    }
    return {dx, dy};
  }

 private:
  std::array<double, 2> goal_;
};

class TablePolicy : public Policy {
 public:
  TablePolicy(const TabularEnv& env, std::vector<int> actions)
      : env_(env), actions_(std::move(actions)) {}

  std::vector<double> Act(std::span<const double> state, Rng&) override {
    return {static_cast<double>(actions_[env_.StateIndex(state)])};
  }

 private:
  const TabularEnv& env_;
  std::vector<int> actions_;
};

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(const Environment& env) : env_(env) {}
  std::vector<double> Act(std::span<const double>, Rng& rng) override {
    return env_.SampleRandomAction(rng);
  }

 private:
  const Environment& env_;
};

class NoisyPolicy : public Policy {
 public:
  NoisyPolicy(const Environment& env, std::unique_ptr<Policy> base,
              double epsilon)
      : env_(env), base_(std::move(base)), epsilon_(epsilon) {}

  std::vector<double> Act(std::span<const double> state, Rng& rng) override {
    if (rng.Uniform() < epsilon_) return env_.SampleRandomAction(rng);
    return base_->Act(state, rng);
  }

 private:
  const Environment& env_;
  std::unique_ptr<Policy> base_;
  double epsilon_;
};

}  // namespace

std::unique_ptr<Policy> MakeGreedyTabularPolicy(const TabularEnv& env,
                                                double gamma) {
  return std::make_unique<TablePolicy>(
      env, ValueIteration(env.mdp(), gamma).greedy);
}

std::unique_ptr<Policy> MakeExpertPolicy(const Environment& env) {
  if (const auto* rooms = dynamic_cast<const FourRooms*>(&env)) {
    return std::make_unique<FourRoomsExpert>(*rooms);
  }
  if (const auto* tabular = dynamic_cast<const TabularEnv*>(&env)) {
    return MakeGreedyTabularPolicy(*tabular, tabular->mdp().gamma);
  }
  throw std::invalid_argument("no expert for environment '" + env.id() + "'");
}

std::unique_ptr<Policy> MakeRandomPolicy(const Environment& env) {
  return std::make_unique<RandomPolicy>(env);
}

std::unique_ptr<Policy> MakeNoisyPolicy(const Environment& env,
                                        std::unique_ptr<Policy> base,
                                        double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("epsilon must lie in [0, 1]");
  }
  if (epsilon == 0.0) return base;
  return std::make_unique<NoisyPolicy>(env, std::move(base), epsilon);
}

}  // namespace trajplan
