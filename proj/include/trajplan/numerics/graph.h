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

#ifndef TRAJPLAN_NUMERICS_GRAPH_H_
#define TRAJPLAN_NUMERICS_GRAPH_H_

#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "trajplan/numerics/tensor.h"

namespace trajplan {

class Graph;

// Handle to a node recorded on a Graph. Cheap to copy; only valid while the
// owning graph is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph* graph() const { return graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, int id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

// Backward rule of a primitive. `grad_in[i]` accumulates the gradient of
// input i and is null when that input does not need one.
using BackwardFn = std::function<void(const Tensor& out, const Tensor& grad_out,
                                      std::span<Tensor* const> grad_in)>;

// Gradients of the trainable leaves, keyed by leaf id.
using GradientMap = std::map<int, Tensor>;

// Tape of primitive operations for reverse-mode differentiation. Nodes are
// appended in execution order, so operands always precede their users.
// A graph supports a single backward pass.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var Constant(Tensor value);
  Var Parameter(Tensor value);

  // Appends a node. Throws if `value` holds NaN or Inf.
  Var Record(std::string op, Tensor value, const std::vector<Var>& inputs,
             BackwardFn backward);

  const Tensor& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // d(loss)/d(leaf) for every trainable leaf. `loss` must be a scalar on
  // this graph. Leaves the loss does not depend on get zero gradients.
  GradientMap Backward(const Var& loss);

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<int> inputs;
    BackwardFn backward;
    bool trainable = false;
    bool requires_grad = false;
  };

  // deque keeps node references stable while new nodes are appended
  std::deque<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace trajplan

#endif  // TRAJPLAN_NUMERICS_GRAPH_H_
