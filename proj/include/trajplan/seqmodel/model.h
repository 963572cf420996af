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

#ifndef TRAJPLAN_SEQMODEL_MODEL_H_
#define TRAJPLAN_SEQMODEL_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "trajplan/numerics/checkpoint.h"
#include "trajplan/numerics/graph.h"
#include "trajplan/tokenizer/tokenizer.h"

namespace trajplan {

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int embed_dim = 64;
  double dropout = 0.1;
  int vocab = 100;              // output head size: the largest sub-vocabulary
  std::vector<int> slot_vocab;  // per layout slot; empty means all `vocab`
  int state_dim = 1;
  int action_dim = 1;
  int context_transitions = 5;
  // Truncated context: each prediction sees only the previous transition and
  // the current one. Applied to the input window rather than as an attention
  // mask, since stacked layers would otherwise relay older tokens.
  bool markovian = false;
  // Sequences start with the goal state's N tokens at positions 0..N-1.
  bool goal_conditioned = false;

  int stride() const { return state_dim + action_dim + 2; }
  int goal_length() const { return goal_conditioned ? state_dim : 0; }
  // transitions per input window: 2 when markovian, else context_transitions
  int window_transitions() const { return markovian ? 2 : context_transitions; }
  int block_size() const { return goal_length() + window_transitions() * stride(); }
  int input_vocab() const { return vocab * stride(); }
  int head_dim() const { return embed_dim / heads; }
  // layout slot of sequence position p (goal tokens use the state slots)
  int SlotAt(int position) const;
  // transition index of position p; -1 for goal tokens
  int TransitionAt(int position) const;
  int SlotVocab(int slot) const;
  // whether position `query` may attend to position `key`
  bool Visible(int query, int key) const;

  // Throws std::invalid_argument on inconsistent settings.
  void Validate() const;
  TrajectoryLayout layout() const { return {state_dim, action_dim}; }

  // "desk" (2 layers, 2 heads, 64 dims) or "full" (4, 4, 128).
  static ModelConfig Preset(const std::string& name);
};

nlohmann::json ToJson(const ModelConfig& config);
ModelConfig ModelConfigFromJson(const nlohmann::json& json);

// Config with layout and sub-vocabularies taken from a tokenizer spec.
ModelConfig ConfigureForTokenizer(ModelConfig config,
                                  const DiscretizerSpec& spec);

// Weights of the decoder, in a fixed order:
//   tok_emb [V*(N+M+2), D], pos_emb [block, D],
//   per layer: ln1.{g,b}, attn.{wqkv [D,3D], bqkv, wo [D,D], bo},
//              ln2.{g,b}, mlp.{w1 [D,4D], b1, w2 [4D,D], b2},
//   ln_f.{g,b}, head.{w [D,V], b [V]}.
struct ModelParams {
  ModelConfig config;
  NamedTensors tensors;

  const Tensor& Get(const std::string& name) const;
  int Index(const std::string& name) const;
  int64_t NumParameters() const;
  bool AllFinite() const;
};

// N(0, 0.02) embeddings and weights (residual projections scaled by
// 1/sqrt(2 layers)), unit LayerNorm gains, zero biases and a zero output
// head. Deterministic in (config, seed).
ModelParams InitParams(const ModelConfig& config, uint64_t seed);

void SaveModel(const std::filesystem::path& dir, const ModelParams& params,
               uint64_t seed, const nlohmann::json& metadata = {});
ModelParams LoadModel(const std::filesystem::path& dir);

// A batch of equal-length token rows. weights[b][p] scores the prediction of
// tokens[b][p] from the prefix before it (weights at p = 0 must be 0).
struct Batch {
  int rows = 0;
  int length = 0;
  std::vector<int> tokens;      // rows x length
  std::vector<double> weights;  // rows x length
};

// Input ids (slot * V + token); throws std::out_of_range on a token outside
// its sub-vocabulary and std::invalid_argument on overlong rows.
std::vector<int> InputIds(const ModelConfig& config, const Batch& batch);

struct ForwardOptions {
  bool train = false;
  uint64_t dropout_seed = 0;
  uint64_t step = 0;
};

// Graph-side parameters: one trainable leaf per tensor, in ModelParams order.
std::vector<Var> AddParameters(Graph& graph, const ModelParams& params);

// Logits [rows, length, V] recorded on `graph`.
Var Forward(Graph& graph, const std::vector<Var>& vars,
            const ModelConfig& config, const Batch& batch,
            const ForwardOptions& options);

// Weighted mean NLL of batch targets; position p is predicted by logits at
// p - 1. Throws std::invalid_argument on an empty batch.
Var Loss(Graph& graph, const std::vector<Var>& vars, const ModelConfig& config,
         const Batch& batch, const ForwardOptions& options);

// Convenience: eval-mode logits for one token row, [length, V] row-major.
Eigen::MatrixXd ComputeLogits(const ModelParams& params,
                              std::span<const int> tokens);

// Sum over `positions` of log softmax(logits[p - 1])[tokens[p]]. Positions
// must lie in [1, tokens.size()); throws std::out_of_range otherwise.
double SeqLogProb(const ModelParams& params, std::span<const int> tokens,
                  std::span<const int> positions);

}  // namespace trajplan

#endif  // TRAJPLAN_SEQMODEL_MODEL_H_
