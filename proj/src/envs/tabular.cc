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

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "trajplan/envs/envs.h"

namespace trajplan {

ValueIterationResult ValueIteration(const TabularMDP& mdp, double gamma,
                                    double tol) {
  mdp.Validate();
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("value iteration needs gamma in [0, 1)");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const int n = mdp.num_states;
  ValueIterationResult out;
  out.v = Eigen::VectorXd::Zero(n);
  out.q = Eigen::MatrixXd::Zero(n, mdp.num_actions);
  // Stop once the residual is below tol and also certifies |V - V*| <= tol
  // through the contraction bound residual * gamma / (1 - gamma).
  for (int sweep = 0; sweep < 1000000; ++sweep) {
    const Eigen::VectorXd target = mdp.reward + gamma * out.v;
    for (int a = 0; a < mdp.num_actions; ++a) {
      out.q.col(a) = mdp.transitions[a] * target;
    }
    const Eigen::VectorXd next = out.q.rowwise().maxCoeff();
    const double residual = (next - out.v).cwiseAbs().maxCoeff();
    out.residuals.push_back(residual);
    out.v = next;
    if (residual < tol && residual * gamma <= tol * (1.0 - gamma)) break;
  }
  // final Q consistent with the returned V
  const Eigen::VectorXd target = mdp.reward + gamma * out.v;
  for (int a = 0; a < mdp.num_actions; ++a) {
    out.q.col(a) = mdp.transitions[a] * target;
  }
  out.greedy.resize(n);
  for (int s = 0; s < n; ++s) {
    int best = 0;
    for (int a = 1; a < mdp.num_actions; ++a) {
      if (out.q(s, a) > out.q(s, best)) best = a;
    }
    out.greedy[s] = best;
  }
  return out;
}

Eigen::MatrixXd DeterministicPolicy(std::span<const int> actions,
                                    int num_actions) {
  Eigen::MatrixXd pi =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(actions.size()),
                            num_actions);
  for (size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] < 0 || actions[s] >= num_actions) {
      throw std::out_of_range("action " + std::to_string(actions[s]) +
                              " out of range");
    }
    pi(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return pi;
}

TabularEnv::TabularEnv(std::string id, TabularMDP mdp,
                       std::vector<bool> terminal, int max_steps)
    : id_(std::move(id)),
      mdp_(std::move(mdp)),
      terminal_(std::move(terminal)),
      max_steps_(max_steps) {
  mdp_.Validate();
  if (static_cast<int>(terminal_.size()) != mdp_.num_states) {
    throw std::invalid_argument("terminal flags need one entry per state");
  }
  if (max_steps_ < 1) throw std::invalid_argument("max_steps must be positive");
}

int TabularEnv::StateIndex(std::span<const double> state) const {
  if (state.size() != 1) throw std::invalid_argument("tabular state has 1 dim");
  const double rounded = std::round(state[0]);
  if (!(rounded >= 0 && rounded < mdp_.num_states)) {
    throw std::out_of_range("state " + std::to_string(state[0]) +
                            " outside 0.." +
                            std::to_string(mdp_.num_states - 1));
  }
  return static_cast<int>(rounded);
}

int TabularEnv::ActionIndex(std::span<const double> action) const {
  if (action.size() != 1) {
    throw std::invalid_argument("tabular action has 1 dim");
  }
  if (std::isnan(action[0])) throw std::invalid_argument("NaN action");
  return static_cast<int>(
      std::clamp(std::round(action[0]), 0.0, mdp_.num_actions - 1.0));
}

std::vector<double> TabularEnv::NormalizeAction(
    std::span<const double> action) const {
  return {static_cast<double>(ActionIndex(action))};
}

StepResult TabularEnv::Step(std::span<const double> state,
                            std::span<const double> action, Rng& rng) const {
  const int s = StateIndex(state);
  const int a = ActionIndex(action);
  const auto row = mdp_.transitions[a].row(s);
  Eigen::Index next;
  // deterministic rows do not consume randomness
  if (row.maxCoeff(&next) < 1.0) next = SampleIndex(row, rng);
  StepResult out;
  out.state = {static_cast<double>(next)};
  out.reward = mdp_.reward(next);
  out.done = terminal_[next];
  return out;
}

bool TabularEnv::IsTerminal(std::span<const double> state) const {
  return terminal_[StateIndex(state)];
}

std::vector<double> TabularEnv::SampleStart(Rng& rng) const {
  return {static_cast<double>(SampleIndex(mdp_.initial.transpose(), rng))};
}

std::vector<double> TabularEnv::SampleRandomAction(Rng& rng) const {
  return {static_cast<double>(rng.UniformInt(mdp_.num_actions))};
}

nlohmann::json TabularEnv::Describe() const {
  nlohmann::json j;
  j["id"] = id_;
  j["states"] = mdp_.num_states;
  j["actions"] = mdp_.num_actions;
  j["max_steps"] = max_steps_;
  j["gamma"] = mdp_.gamma;
  j["reward"] = std::vector<double>(mdp_.reward.data(),
                                    mdp_.reward.data() + mdp_.reward.size());
  j["terminal"] = terminal_;
  return j;
}

namespace {

TabularMDP EmptyMDP(int states, int actions, double gamma) {
  TabularMDP mdp;
  mdp.num_states = states;
  mdp.num_actions = actions;
  mdp.gamma = gamma;
  mdp.transitions.assign(actions, Eigen::MatrixXd::Zero(states, states));
  mdp.reward = Eigen::VectorXd::Zero(states);
  mdp.initial = Eigen::VectorXd::Zero(states);
  mdp.policy = Eigen::MatrixXd::Constant(states, actions, 1.0 / actions);
  return mdp;
}

}  // namespace

TabularEnv MakeChain(double gamma) {
  constexpr int kStates = 10;
  TabularMDP mdp = EmptyMDP(kStates, 2, gamma);
  for (int s = 0; s < kStates; ++s) {
    mdp.transitions[0](s, std::max(s - 1, 0)) = 1.0;
    mdp.transitions[1](s, std::min(s + 1, kStates - 1)) = 1.0;
  }
  mdp.reward(0) = 0.1;
  mdp.reward(kStates - 1) = 1.0;
  for (int s = 1; s <= 3; ++s) mdp.initial(s) = 1.0 / 3.0;
  return TabularEnv("chain", std::move(mdp), std::vector<bool>(kStates, false),
                    20);
}

TabularEnv MakeBandit() {
  TabularMDP mdp = EmptyMDP(3, 2, 0.99);
  mdp.transitions[0](0, 1) = 1.0;
  mdp.transitions[1](0, 2) = 1.0;
  for (int a = 0; a < 2; ++a) {
    mdp.transitions[a](1, 1) = 1.0;
    mdp.transitions[a](2, 2) = 1.0;
  }
  mdp.reward(2) = 1.0;
  mdp.initial(0) = 1.0;
  return TabularEnv("bandit", std::move(mdp), {false, true, true}, 5);
}

TabularEnv MakeRing() {
  constexpr int kStates = 5;
  TabularMDP mdp = EmptyMDP(kStates, 2, 0.99);
  for (int s = 0; s < kStates; ++s) {
    mdp.transitions[0](s, s) = 1.0;
    mdp.transitions[1](s, (s + 1) % kStates) = 1.0;
  }
  mdp.initial.setConstant(1.0 / kStates);
  return TabularEnv("ring", std::move(mdp), std::vector<bool>(kStates, false),
                    20);
}

}  // namespace trajplan
