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

#ifndef TRAJPLAN_SEQMODEL_TRAIN_H_
#define TRAJPLAN_SEQMODEL_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "trajplan/seqmodel/model.h"
#include "trajplan/tokenizer/tokenizer.h"

namespace trajplan {

struct TrainConfig {
  double lr_max = 2.5e-4;
  int warmup_updates = 2000;
  int batch = 64;
  // Training stops after `updates` updates, or after `epochs` passes over the
  // windows when updates is 0.
  int updates = 0;
  int epochs = 1;
  uint64_t seed = 0;
  double grad_clip = 1.0;  // global norm; 0 disables
  std::filesystem::path log_csv;  // "update,lr,nll" per update when non-empty
  // Called after each update; returning false stops training early.
  std::function<bool(int update, double nll, const ModelParams& params)>
      on_update;

  void Validate() const;
};

// lr_max * min(1, update / warmup_updates) for 1-based update indices.
double LearningRate(const TrainConfig& config, int64_t update);

// One training row per transition `start`, optionally preceded by the
// trajectory's final state as goal. Normally the row holds up to
// context_transitions transitions from `start` on; a markovian row holds
// transitions start - 1 and start and scores only the latter.
struct WindowRef {
  int trajectory = 0;
  int start = 0;
};

std::vector<WindowRef> EnumerateWindows(
    std::span<const TokenizedTrajectory> data);

// Builds a padded batch. Padding and goal-prefix targets carry zero weight;
// the first token of a row is never scored.
Batch MakeBatch(const ModelConfig& config,
                std::span<const TokenizedTrajectory> data,
                std::span<const WindowRef> windows);

struct TrainResult {
  ModelParams params;
  std::vector<double> losses;  // per update, training-mode NLL
};

// Adam with linear warmup, seeded shuffling and dropout. Throws
// std::invalid_argument when the data layout differs from the model's.
TrainResult Train(ModelParams params, std::span<const TokenizedTrajectory> data,
                  const TrainConfig& config);

// Eval-mode mean NLL per layout slot over all windows (NaN for slots that
// never occur as a scored target).
std::vector<double> SlotNll(const ModelParams& params,
                            std::span<const TokenizedTrajectory> data);

}  // namespace trajplan

#endif  // TRAJPLAN_SEQMODEL_TRAIN_H_
