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

#include "trajplan/tokenizer/tokenizer.h"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace trajplan {
namespace {

constexpr double kConstantWiden = 1e-6;

void CheckVocab(int vocab) {
  if (vocab < 2) {
    throw std::invalid_argument("vocabulary size must be at least 2, got " +
                                std::to_string(vocab));
  }
}

// Column of values for layout slot `slot` gathered over the dataset.
std::vector<double> Column(std::span<const RawTrajectory> dataset,
                           const TrajectoryLayout& layout, int slot,
                           double gamma) {
  std::vector<double> values;
  for (const RawTrajectory& raw : dataset) {
    const int n = raw.state_dim;
    const int m = raw.action_dim;
    if (slot < n) {
      for (int t = 0; t < raw.steps(); ++t) values.push_back(raw.state(t)[slot]);
    } else if (slot < n + m) {
      for (int t = 0; t < raw.steps(); ++t) {
        values.push_back(raw.action(t)[slot - n]);
      }
    } else if (slot == layout.reward_index()) {
      values.insert(values.end(), raw.rewards.begin(), raw.rewards.end());
    } else {
      const std::vector<double> rtg = RewardToGo(raw.rewards, gamma);
      values.insert(values.end(), rtg.begin(), rtg.end());
    }
  }
  return values;
}

DimRole SlotRole(const TrajectoryLayout& layout, int slot) {
  if (slot < layout.state_dim) return DimRole::kState;
  if (slot < layout.state_dim + layout.action_dim) return DimRole::kAction;
  if (slot == layout.reward_index()) return DimRole::kReward;
  return DimRole::kRewardToGo;
}

int SlotVocab(const VocabOptions& options, DimRole role) {
  int v = options.vocab;
  switch (role) {
    case DimRole::kAction:
      if (options.action_vocab > 0) v = options.action_vocab;
      break;
    case DimRole::kReward:
      if (options.reward_vocab > 0) v = options.reward_vocab;
      break;
    case DimRole::kRewardToGo:
      if (options.value_vocab > 0) v = options.value_vocab;
      break;
    case DimRole::kState:
      break;
  }
  CheckVocab(v);
  return v;
}

TrajectoryLayout DatasetLayout(std::span<const RawTrajectory> dataset) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  TrajectoryLayout layout{dataset[0].state_dim, dataset[0].action_dim};
  bool any_steps = false;
  for (const RawTrajectory& raw : dataset) {
    raw.Validate();
    if (raw.state_dim != layout.state_dim ||
        raw.action_dim != layout.action_dim) {
      throw std::invalid_argument("dataset mixes trajectory layouts");
    }
    any_steps = any_steps || raw.steps() > 0;
  }
  if (!any_steps) throw std::invalid_argument("empty dataset");
  return layout;
}

template <typename FitDim>
DiscretizerSpec Fit(std::span<const RawTrajectory> dataset,
                    const VocabOptions& options, double gamma, FitDim fit_dim) {
  DiscretizerSpec spec;
  spec.layout = DatasetLayout(dataset);
  spec.gamma = gamma;
  for (int slot = 0; slot < spec.layout.stride(); ++slot) {
    DimDiscretizer dim;
    dim.role = SlotRole(spec.layout, slot);
    dim.vocab = SlotVocab(options, dim.role);
    std::vector<double> values = Column(dataset, spec.layout, slot, gamma);
    fit_dim(dim, values, slot, spec.warnings);
    spec.dims.push_back(std::move(dim));
  }
  return spec;
}

}  // namespace

void RawTrajectory::Validate() const {
  const size_t t = rewards.size();
  if (state_dim <= 0 || action_dim <= 0) {
    throw std::invalid_argument("trajectory needs positive state and action dims");
  }
  if (states.size() != t * state_dim || actions.size() != t * action_dim) {
    throw std::invalid_argument(
        "trajectory fields disagree on T: " + std::to_string(t) +
        " rewards, " + std::to_string(states.size()) + " state values, " +
        std::to_string(actions.size()) + " action values");
  }
}

std::vector<double> RewardToGo(std::span<const double> rewards, double gamma) {
  std::vector<double> rtg(rewards.size());
  double next = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    next = rewards[i] + gamma * next;
    rtg[i] = next;
  }
  return rtg;
}

const char* RoleName(DimRole role) {
  switch (role) {
    case DimRole::kState:
      return "state";
    case DimRole::kAction:
      return "action";
    case DimRole::kReward:
      return "reward";
    case DimRole::kRewardToGo:
      return "reward_to_go";
  }
  return "?";
}

const char* SchemeName(Scheme scheme) {
  return scheme == Scheme::kUniform ? "uniform" : "quantile";
}

int DimDiscretizer::Encode(double value) const {
  if (std::isnan(value)) throw std::invalid_argument("cannot encode NaN");
  if (scheme == Scheme::kUniform) {
    const double pos = std::floor((value - lo) / BinWidth());
    if (!(pos >= 0.0)) return 0;
    if (pos >= vocab - 1) return vocab - 1;
    return static_cast<int>(pos);
  }
  return static_cast<int>(std::lower_bound(edges.begin(), edges.end(), value) -
                          edges.begin());
}

double DimDiscretizer::Decode(int token) const {
  if (token < 0 || token >= vocab) {
    throw std::out_of_range("token " + std::to_string(token) +
                            " outside vocabulary of size " +
                            std::to_string(vocab));
  }
  if (scheme == Scheme::kUniform) return lo + (token + 0.5) * BinWidth();
  const double lower = token == 0 ? lo : edges[token - 1];
  const double upper = token == vocab - 1 ? hi : edges[token];
  return 0.5 * (lower + upper);
}

int DiscretizerSpec::vocab() const {
  int v = 0;
  for (const DimDiscretizer& d : dims) v = std::max(v, d.vocab);
  return v;
}

std::vector<int> DiscretizerSpec::EncodeState(
    std::span<const double> state) const {
  if (static_cast<int>(state.size()) != layout.state_dim) {
    throw std::invalid_argument("state has " + std::to_string(state.size()) +
                                " dims, layout expects " +
                                std::to_string(layout.state_dim));
  }
  std::vector<int> tokens(state.size());
  for (size_t i = 0; i < state.size(); ++i) tokens[i] = dims[i].Encode(state[i]);
  return tokens;
}

std::vector<double> DiscretizerSpec::DecodeState(
    std::span<const int> tokens) const {
  std::vector<double> out(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) out[i] = dims[i].Decode(tokens[i]);
  return out;
}

std::vector<int> DiscretizerSpec::EncodeAction(
    std::span<const double> action) const {
  if (static_cast<int>(action.size()) != layout.action_dim) {
    throw std::invalid_argument("action has " + std::to_string(action.size()) +
                                " dims, layout expects " +
                                std::to_string(layout.action_dim));
  }
  std::vector<int> tokens(action.size());
  for (size_t j = 0; j < action.size(); ++j) {
    tokens[j] = dims[layout.state_dim + j].Encode(action[j]);
  }
  return tokens;
}

std::vector<double> DiscretizerSpec::DecodeAction(
    std::span<const int> tokens) const {
  std::vector<double> out(tokens.size());
  for (size_t j = 0; j < tokens.size(); ++j) {
    out[j] = dims[layout.state_dim + j].Decode(tokens[j]);
  }
  return out;
}

DiscretizerSpec FitUniform(std::span<const RawTrajectory> dataset,
                           const VocabOptions& vocab, double gamma) {
  return Fit(dataset, vocab, gamma,
             [](DimDiscretizer& dim, const std::vector<double>& values,
                int slot, std::vector<std::string>& warnings) {
               dim.scheme = Scheme::kUniform;
               const auto [mn, mx] =
                   std::minmax_element(values.begin(), values.end());
               dim.lo = *mn;
               dim.hi = *mx;
               if (dim.hi == dim.lo) {
                 dim.lo -= kConstantWiden;
                 dim.hi += kConstantWiden;
                 warnings.push_back("slot " + std::to_string(slot) + " (" +
                                    RoleName(dim.role) +
                                    ") is constant; widened by 1e-6");
                 std::cerr << "warning: " << warnings.back() << "\n";
               }
             });
}

DiscretizerSpec FitQuantile(std::span<const RawTrajectory> dataset,
                            const VocabOptions& vocab, double gamma) {
  return Fit(dataset, vocab, gamma,
             [](DimDiscretizer& dim, std::vector<double> values, int,
                std::vector<std::string>&) {
               dim.scheme = Scheme::kQuantile;
               std::sort(values.begin(), values.end());
               const int64_t n = static_cast<int64_t>(values.size());
               dim.lo = values.front();
               dim.hi = values.back();
               dim.edges.clear();
               for (int k = 1; k < dim.vocab; ++k) {
                 // split after the first round(k n / V) order statistics
                 int64_t i = static_cast<int64_t>(
                     std::llround(static_cast<double>(k) * n / dim.vocab));
                 i = std::clamp<int64_t>(i, 1, std::max<int64_t>(n - 1, 1));
                 const double left = values[std::min(i - 1, n - 1)];
                 const double right = values[std::min(i, n - 1)];
                 dim.edges.push_back(0.5 * (left + right));
               }
             });
}

TokenizedTrajectory Encode(const DiscretizerSpec& spec, const RawTrajectory& raw,
                           double gamma) {
  raw.Validate();
  if (gamma < 0.0 || gamma > 1.0) {
    throw std::invalid_argument("reward-to-go discount must lie in [0, 1]");
  }
  const TrajectoryLayout& layout = spec.layout;
  if (raw.state_dim != layout.state_dim || raw.action_dim != layout.action_dim) {
    throw std::invalid_argument(
        "trajectory layout (" + std::to_string(raw.state_dim) + ", " +
        std::to_string(raw.action_dim) + ") does not match tokenizer (" +
        std::to_string(layout.state_dim) + ", " +
        std::to_string(layout.action_dim) + ")");
  }
  auto check = [](const std::vector<double>& values, const char* field) {
    for (size_t i = 0; i < values.size(); ++i) {
      if (std::isnan(values[i])) {
        throw std::invalid_argument(std::string("NaN in ") + field +
                                    " at index " + std::to_string(i));
      }
    }
  };
  check(raw.states, "states");
  check(raw.actions, "actions");
  check(raw.rewards, "rewards");

  TokenizedTrajectory out;
  out.layout = layout;
  out.steps = raw.steps();
  out.reward_to_go = RewardToGo(raw.rewards, gamma);
  out.tokens.reserve(static_cast<size_t>(out.steps) * layout.stride());
  for (int t = 0; t < out.steps; ++t) {
    for (int i = 0; i < layout.state_dim; ++i) {
      out.tokens.push_back(spec.dims[i].Encode(raw.state(t)[i]));
    }
    for (int j = 0; j < layout.action_dim; ++j) {
      out.tokens.push_back(
          spec.dims[layout.state_dim + j].Encode(raw.action(t)[j]));
    }
    out.tokens.push_back(spec.dims[layout.reward_index()].Encode(raw.rewards[t]));
    out.tokens.push_back(
        spec.dims[layout.value_index()].Encode(out.reward_to_go[t]));
  }
  return out;
}

double DecodeValue(const DiscretizerSpec& spec, int slot, int token) {
  return spec.dim(slot).Decode(token);
}

double DiscreteOracleLogLikelihood(const DiscretizerSpec& spec) {
  double total = 0.0;
  for (int i = 0; i < spec.layout.state_dim; ++i) {
    const DimDiscretizer& d = spec.dims.at(i);
    if (d.scheme != Scheme::kUniform) {
      throw std::invalid_argument(
          "discrete oracle is defined for uniform discretization only");
    }
    total += std::log(d.vocab / (d.hi - d.lo));
  }
  return total;
}

nlohmann::json ToJson(const DiscretizerSpec& spec) {
  nlohmann::json j;
  j["state_dim"] = spec.layout.state_dim;
  j["action_dim"] = spec.layout.action_dim;
  j["gamma"] = spec.gamma;
  j["dims"] = nlohmann::json::array();
  for (const DimDiscretizer& d : spec.dims) {
    nlohmann::json e = {{"role", RoleName(d.role)},
                        {"scheme", SchemeName(d.scheme)},
                        {"vocab", d.vocab},
                        {"lo", d.lo},
                        {"hi", d.hi}};
    if (d.scheme == Scheme::kQuantile) e["edges"] = d.edges;
    j["dims"].push_back(std::move(e));
  }
  return j;
}

DiscretizerSpec DiscretizerSpecFromJson(const nlohmann::json& j) {
  DiscretizerSpec spec;
  spec.layout.state_dim = j.at("state_dim");
  spec.layout.action_dim = j.at("action_dim");
  spec.gamma = j.value("gamma", 0.99);
  for (const auto& e : j.at("dims")) {
    DimDiscretizer d;
    const std::string role = e.at("role");
    if (role == "state") {
      d.role = DimRole::kState;
    } else if (role == "action") {
      d.role = DimRole::kAction;
    } else if (role == "reward") {
      d.role = DimRole::kReward;
    } else if (role == "reward_to_go") {
      d.role = DimRole::kRewardToGo;
    } else {
      throw std::invalid_argument("unknown dimension role '" + role + "'");
    }
    const std::string scheme = e.at("scheme");
    if (scheme == "uniform") {
      d.scheme = Scheme::kUniform;
    } else if (scheme == "quantile") {
      d.scheme = Scheme::kQuantile;
    } else {
      throw std::invalid_argument("unknown scheme '" + scheme + "'");
    }
    d.vocab = e.at("vocab");
    d.lo = e.at("lo");
    d.hi = e.at("hi");
    if (d.scheme == Scheme::kQuantile) {
      d.edges = e.at("edges").get<std::vector<double>>();
      if (static_cast<int>(d.edges.size()) != d.vocab - 1 ||
          !std::is_sorted(d.edges.begin(), d.edges.end())) {
        throw std::invalid_argument("quantile edges must be V - 1 sorted values");
      }
    } else if (!(d.lo < d.hi)) {
      throw std::invalid_argument("uniform bounds need lo < hi");
    }
    spec.dims.push_back(std::move(d));
  }
  if (static_cast<int>(spec.dims.size()) != spec.layout.stride()) {
    throw std::invalid_argument("tokenizer spec lists " +
                                std::to_string(spec.dims.size()) +
                                " dims, layout needs " +
                                std::to_string(spec.layout.stride()));
  }
  return spec;
}

}  // namespace trajplan
