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

#ifndef TRAJPLAN_NUMERICS_ADAM_H_
#define TRAJPLAN_NUMERICS_ADAM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "trajplan/numerics/tensor.h"

namespace trajplan {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moments are created lazily on the first step
// and keyed by position in the parameter list.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Updates `params` in place. Shapes of params and grads must agree with each
  // other and with earlier calls.
  void Step(std::span<Tensor* const> params, std::span<const Tensor> grads,
            double lr);

  int64_t step() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  int64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace trajplan

#endif  // TRAJPLAN_NUMERICS_ADAM_H_
