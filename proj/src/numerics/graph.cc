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

#include "trajplan/numerics/graph.h"

#include <stdexcept>
#include <utility>

namespace trajplan {

const Tensor& Var::value() const {
  if (graph_ == nullptr) throw std::logic_error("value() on an empty Var");
  return graph_->value(id_);
}

Var Graph::Constant(Tensor value) {
  return Record("constant", std::move(value), {}, nullptr);
}

Var Graph::Parameter(Tensor value) {
  Var v = Record("parameter", std::move(value), {}, nullptr);
  nodes_.back().trainable = true;
  nodes_.back().requires_grad = true;
  return v;
}

Var Graph::Record(std::string op, Tensor value, const std::vector<Var>& inputs,
                  BackwardFn backward) {
  if (consumed_) {
    throw std::logic_error("cannot record '" + op +
                           "' on a graph that was already differentiated");
  }
  if (!value.AllFinite()) {
    throw std::domain_error("non-finite output from '" + op +
                            "' with shape " + ShapeToString(value.shape()));
  }
  Node node;
  node.op = std::move(op);
  node.value = std::move(value);
  node.backward = std::move(backward);
  for (const Var& in : inputs) {
    if (in.graph() != this) {
      throw std::invalid_argument("operand of '" + node.op +
                                  "' belongs to a different graph");
    }
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

GradientMap Graph::Backward(const Var& loss) {
  if (loss.graph() != this) {
    throw std::invalid_argument("loss belongs to a different graph");
  }
  if (consumed_) throw std::logic_error("graph already consumed by Backward");
  if (loss.value().size() != 1) {
    throw std::invalid_argument("loss must be a scalar, got shape " +
                                ShapeToString(loss.shape()));
  }
  consumed_ = true;

  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id()] = Tensor::Full(loss.shape(), 1.0);

  std::vector<Tensor*> grad_in;
  for (int id = loss.id(); id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.requires_grad || grads[id].empty() || !node.backward) continue;
    grad_in.assign(node.inputs.size(), nullptr);
    for (size_t i = 0; i < node.inputs.size(); ++i) {
      const int in = node.inputs[i];
      if (!nodes_[in].requires_grad) continue;
      if (grads[in].empty()) grads[in] = Tensor(nodes_[in].value.shape());
      grad_in[i] = &grads[in];
    }
    node.backward(node.value, grads[id], grad_in);
    if (!node.trainable) grads[id] = Tensor();
  }

  GradientMap result;
  for (size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].trainable) continue;
    if (grads[id].empty()) grads[id] = Tensor(nodes_[id].value.shape());
    result.emplace(static_cast<int>(id), std::move(grads[id]));
  }
  return result;
}

}  // namespace trajplan
