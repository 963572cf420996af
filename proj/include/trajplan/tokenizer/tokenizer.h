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

#ifndef TRAJPLAN_TOKENIZER_TOKENIZER_H_
#define TRAJPLAN_TOKENIZER_TOKENIZER_H_

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace trajplan {

// A trajectory of T steps with N-dimensional states and M-dimensional
// actions, stored row-major.
struct RawTrajectory {
  int state_dim = 0;
  int action_dim = 0;
  std::vector<double> states;   // T x N
  std::vector<double> actions;  // T x M
  std::vector<double> rewards;  // T
  bool terminal = false;

  int steps() const { return static_cast<int>(rewards.size()); }
  std::span<const double> state(int t) const {
    return {states.data() + t * state_dim, static_cast<size_t>(state_dim)};
  }
  std::span<const double> action(int t) const {
    return {actions.data() + t * action_dim, static_cast<size_t>(action_dim)};
  }
  // throws std::invalid_argument if field lengths disagree with T
  void Validate() const;
};

// R_t = sum_{t' >= t} gamma^(t'-t) r_t', evaluated by the backward recursion
// R_t = r_t + gamma R_{t+1} with R_{T+1} = 0.
std::vector<double> RewardToGo(std::span<const double> rewards, double gamma);

enum class DimRole { kState, kAction, kReward, kRewardToGo };
enum class Scheme { kUniform, kQuantile };

const char* RoleName(DimRole role);
const char* SchemeName(Scheme scheme);

// Tokenization rule for one scalar dimension.
//
// Uniform: V half-open bins of width (hi - lo) / V, the top edge inclusive;
// values outside [lo, hi] clamp to the edge bins.
// Quantile: V - 1 sorted edges; token = number of edges strictly below the
// value. lo/hi hold the fitting data's min/max and bound the outer bins.
struct DimDiscretizer {
  DimRole role = DimRole::kState;
  Scheme scheme = Scheme::kUniform;
  int vocab = 0;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> edges;

  int Encode(double value) const;
  // Bin representative: the bin center for uniform bins, the midpoint of the
  // bounding edges for quantile bins.
  double Decode(int token) const;
  double BinWidth() const { return (hi - lo) / vocab; }
};

// Per-transition layout: N state tokens, M action tokens, one reward token and
// one reward-to-go token.
struct TrajectoryLayout {
  int state_dim = 0;
  int action_dim = 0;

  int stride() const { return state_dim + action_dim + 2; }
  int reward_index() const { return state_dim + action_dim; }
  int value_index() const { return state_dim + action_dim + 1; }
  // sub-vocabulary (dimension slot) of a flat token index
  int SubVocab(int flat_index) const { return flat_index % stride(); }

  friend bool operator==(const TrajectoryLayout&,
                         const TrajectoryLayout&) = default;
};

// One discretizer per slot of the transition layout, in layout order.
struct DiscretizerSpec {
  TrajectoryLayout layout;
  std::vector<DimDiscretizer> dims;
  double gamma = 0.99;  // reward-to-go discount used when fitting
  std::vector<std::string> warnings;

  // largest per-dimension vocabulary; the model's output head size
  int vocab() const;
  const DimDiscretizer& dim(int slot) const { return dims.at(slot); }
  // state tokens only (used for goal prefixes)
  std::vector<int> EncodeState(std::span<const double> state) const;
  std::vector<double> DecodeState(std::span<const int> tokens) const;
  std::vector<int> EncodeAction(std::span<const double> action) const;
  std::vector<double> DecodeAction(std::span<const int> tokens) const;
};

struct TokenizedTrajectory {
  TrajectoryLayout layout;
  int steps = 0;
  std::vector<int> tokens;             // steps * stride
  std::vector<double> reward_to_go;    // continuous R_t before discretization

  // offset of the sub-vocabulary of flat index k in the model's input table
  int InputOffset(int k, int vocab) const {
    return layout.SubVocab(k) * vocab;
  }
};

// Optional per-role vocabulary overrides; 0 means "same as states".
struct VocabOptions {
  int vocab = 100;
  int action_vocab = 0;
  int reward_vocab = 0;
  int value_vocab = 0;
};

DiscretizerSpec FitUniform(std::span<const RawTrajectory> dataset,
                           const VocabOptions& vocab, double gamma);
DiscretizerSpec FitQuantile(std::span<const RawTrajectory> dataset,
                            const VocabOptions& vocab, double gamma);

// Reward-to-go augmentation followed by per-slot discretization, flattened as
// s^1..s^N a^1..a^M r R per step. NaN inputs are rejected with the field and
// index named in the message.
TokenizedTrajectory Encode(const DiscretizerSpec& spec, const RawTrajectory& raw,
                           double gamma);

double DecodeValue(const DiscretizerSpec& spec, int slot, int token);

// Maximum attainable log-likelihood over the state dimensions under a uniform
// discretization: sum_i log(V / (hi_i - lo_i)). Quantile specs are rejected.
double DiscreteOracleLogLikelihood(const DiscretizerSpec& spec);

nlohmann::json ToJson(const DiscretizerSpec& spec);
DiscretizerSpec DiscretizerSpecFromJson(const nlohmann::json& json);

}  // namespace trajplan

#endif  // TRAJPLAN_TOKENIZER_TOKENIZER_H_
