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

#include "trajplan/numerics/adam.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace trajplan {

void Adam::Step(std::span<Tensor* const> params, std::span<const Tensor> grads,
                double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam: lr must be positive");
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam: " + std::to_string(params.size()) +
                                " parameters but " +
                                std::to_string(grads.size()) + " gradients");
  }
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (m_.size() != params.size()) {
    throw std::invalid_argument("adam: parameter count changed between steps");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() ||
        params[i]->shape() != m_[i].shape()) {
      throw std::invalid_argument(
          "adam: parameter " + std::to_string(i) + " has shape " +
          ShapeToString(params[i]->shape()) + " but gradient " +
          ShapeToString(grads[i].shape()));
    }
  }

  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (int64_t j = 0; j < params[i]->size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / corr1;
      const double v_hat = v[j] / corr2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

}  // namespace trajplan
