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

#ifndef TRAJPLAN_NUMERICS_OPS_H_
#define TRAJPLAN_NUMERICS_OPS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "trajplan/numerics/graph.h"
#include "trajplan/numerics/tensor.h"

// Differentiable primitives. Every function records one node on the graph
// of its operands and throws std::invalid_argument on shape mismatch.
//
// Binary elementwise ops accept either identical shapes or a right operand
// whose shape equals the trailing dimensions of the left operand (the left
// operand's leading dimensions act as a batch). Nothing else broadcasts.

namespace trajplan {

Var Add(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double factor);

// a[..., n, k] x b[k, m], or batched a[..., n, k] x b[..., k, m] with equal
// leading dimensions.
Var MatMul(const Var& a, const Var& b);

// swaps the last two dimensions
Var Transpose(const Var& a);
Var Reshape(const Var& a, Shape shape);
Var Permute(const Var& a, const std::vector<int>& axes);
// elements [begin, end) along `axis`
Var Slice(const Var& a, int axis, int64_t begin, int64_t end);
Var Concat(const std::vector<Var>& parts, int axis);

// Rows of `table` [V, D] selected by `ids`; result is [ids.size(), D].
Var Embedding(const Var& table, std::span<const int> ids);

// Row-wise over the last dimension, shifted by the row maximum.
Var Softmax(const Var& a);

// Normalizes the last dimension to zero mean and unit variance, then applies
// per-feature gain and bias of shape [D].
Var LayerNorm(const Var& x, const Var& gain, const Var& bias,
              double eps = 1e-5);

// tanh approximation used by GPT
Var Gelu(const Var& a);

// Identifies one dropout mask. Masks are a pure function of this key and the
// element index, so a training run is bit-reproducible.
struct DropoutKey {
  uint64_t seed = 0;
  uint64_t layer = 0;
  uint64_t step = 0;
};

// Inverted dropout. Returns `a` unchanged when `train` is false or p == 0.
Var Dropout(const Var& a, double p, const DropoutKey& key, bool train);

// Replaces entries where `mask` is nonzero by `fill`. `mask` has the shape of
// `a` or of its trailing dimensions.
Var MaskedFill(const Var& a, const Tensor& mask, double fill);

// Weighted mean of -log softmax(logits)[target] over rows of logits [n, V].
// Rows with zero weight are ignored; all-zero weights are an error.
Var SoftmaxCrossEntropy(const Var& logits, std::span<const int> targets,
                        std::span<const double> weights);

Var Sum(const Var& a);
Var Mean(const Var& a);

}  // namespace trajplan

#endif  // TRAJPLAN_NUMERICS_OPS_H_
