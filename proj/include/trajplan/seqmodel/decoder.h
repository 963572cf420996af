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

#ifndef TRAJPLAN_SEQMODEL_DECODER_H_
#define TRAJPLAN_SEQMODEL_DECODER_H_

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "trajplan/seqmodel/model.h"

namespace trajplan {

// Model weights unpacked into Eigen matrices for incremental decoding.
struct DecoderWeights {
  struct Layer {
    Eigen::VectorXd ln1_g, ln1_b, bqkv, bo, ln2_g, ln2_b, b1, b2;
    Eigen::MatrixXd wqkv, wo, w1, w2;  // stored transposed: [out, in]
  };
  ModelConfig config;
  Eigen::MatrixXd tok_emb;  // [input_vocab, D]
  Eigen::MatrixXd pos_emb;  // [block, D]
  std::vector<Layer> layers;
  Eigen::VectorXd lnf_g, lnf_b, head_b;
  Eigen::MatrixXd head_w;  // [V, D]

  explicit DecoderWeights(const ModelParams& params);
};

// Eval-mode decoder with a key/value cache. Tokens are pushed one at a time;
// after each push log_probs() holds the log-softmax over all V outputs for the
// next position. When the window fills up, the oldest whole transition is
// dropped (the goal prefix is kept) and the cache is rebuilt, so positions
// always match the layout seen during training.
//
// Copying a session is cheap enough to fork beam hypotheses.
class DecoderSession {
 public:
  explicit DecoderSession(std::shared_ptr<const DecoderWeights> weights);

  // Throws std::out_of_range on a token outside the next slot's vocabulary.
  void Push(int token);
  void Reset();

  const ModelConfig& config() const { return weights_->config; }
  // tokens currently inside the window
  const std::vector<int>& window() const { return window_; }
  int64_t pushed() const { return pushed_; }
  // layout slot of the next token
  int next_slot() const { return config().SlotAt(static_cast<int>(window_.size())); }
  int next_vocab() const { return config().SlotVocab(next_slot()); }
  // Requires at least one pushed token.
  const Eigen::VectorXd& log_probs() const;

 private:
  void Append(int token);
  void Slide();

  std::shared_ptr<const DecoderWeights> weights_;
  std::vector<int> window_;
  int64_t pushed_ = 0;
  std::vector<Eigen::MatrixXd> keys_;    // per layer [block, D], rows used
  std::vector<Eigen::MatrixXd> values_;  // per layer [block, D]
  Eigen::VectorXd log_probs_;
};

}  // namespace trajplan

#endif  // TRAJPLAN_SEQMODEL_DECODER_H_
