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

#include "trajplan/seqmodel/train.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

#include "trajplan/numerics/adam.h"
#include "trajplan/numerics/ops.h"
#include "trajplan/numerics/random.h"

namespace trajplan {
namespace {

constexpr uint64_t kShuffleTag = 0x73687566;  // "shuf"

void CheckLayout(const ModelConfig& config,
                 std::span<const TokenizedTrajectory> data) {
  for (size_t i = 0; i < data.size(); ++i) {
    if (!(data[i].layout == config.layout())) {
      throw std::invalid_argument(
          "trajectory " + std::to_string(i) + " has layout (" +
          std::to_string(data[i].layout.state_dim) + ", " +
          std::to_string(data[i].layout.action_dim) + ") but the model expects (" +
          std::to_string(config.state_dim) + ", " +
          std::to_string(config.action_dim) + ")");
    }
  }
}

void Shuffle(std::vector<int>& order, uint64_t seed, uint64_t epoch) {
  Rng rng(HashCounters(seed, kShuffleTag, epoch));
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.UniformInt(static_cast<int64_t>(i))]);
  }
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(lr_max > 0.0)) throw std::invalid_argument("lr_max must be positive");
  if (warmup_updates < 0) throw std::invalid_argument("warmup must be >= 0");
  if (batch < 1) throw std::invalid_argument("batch must be positive");
  if (updates < 0 || (updates == 0 && epochs < 1)) {
    throw std::invalid_argument("need a positive number of updates or epochs");
  }
  if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be >= 0");
}

double LearningRate(const TrainConfig& config, int64_t update) {
  if (config.warmup_updates == 0) return config.lr_max;
  return config.lr_max *
         std::min(1.0, static_cast<double>(update) / config.warmup_updates);
}

std::vector<WindowRef> EnumerateWindows(
    std::span<const TokenizedTrajectory> data) {
  std::vector<WindowRef> out;
  for (size_t i = 0; i < data.size(); ++i) {
    for (int t = 0; t < data[i].steps; ++t) {
      out.push_back({static_cast<int>(i), t});
    }
  }
  return out;
}

Batch MakeBatch(const ModelConfig& config,
                std::span<const TokenizedTrajectory> data,
                std::span<const WindowRef> windows) {
  if (windows.empty()) throw std::invalid_argument("empty batch");
  const int stride = config.stride();
  const int goal = config.goal_length();
  // [first transition, end transition) of a row, and the first scored one.
  // A markovian row ends at the scored transition and starts one earlier.
  struct Range {
    int begin, end, scored;
  };
  auto range_of = [&](const WindowRef& w) {
    const int steps = data[w.trajectory].steps;
    if (w.start < 0 || w.start >= steps) {
      throw std::out_of_range("window start outside trajectory");
    }
    if (config.markovian) {
      const int begin = std::max(0, w.start - 1);
      return Range{begin, w.start + 1, w.start == 0 ? 0 : w.start};
    }
    return Range{w.start, std::min(steps, w.start + config.context_transitions),
                 w.start};
  };
  int length = 0;
  for (const WindowRef& w : windows) {
    const Range r = range_of(w);
    length = std::max(length, goal + (r.end - r.begin) * stride);
  }
  Batch batch;
  batch.rows = static_cast<int>(windows.size());
  batch.length = length;
  batch.tokens.assign(static_cast<size_t>(batch.rows) * length, 0);
  batch.weights.assign(batch.tokens.size(), 0.0);
  for (int b = 0; b < batch.rows; ++b) {
    const WindowRef& w = windows[b];
    const TokenizedTrajectory& traj = data[w.trajectory];
    const Range r = range_of(w);
    int* row = batch.tokens.data() + static_cast<size_t>(b) * length;
    double* weight = batch.weights.data() + static_cast<size_t>(b) * length;
    // goal: the final recorded state
    const int last = (traj.steps - 1) * stride;
    for (int i = 0; i < goal; ++i) row[i] = traj.tokens[last + i];
    for (int t = r.begin; t < r.end; ++t) {
      for (int i = 0; i < stride; ++i) {
        const int pos = goal + (t - r.begin) * stride + i;
        row[pos] = traj.tokens[t * stride + i];
        weight[pos] = t >= r.scored ? 1.0 : 0.0;
      }
    }
    weight[0] = 0.0;
  }
  return batch;
}

TrainResult Train(ModelParams params, std::span<const TokenizedTrajectory> data,
                  const TrainConfig& config) {
  config.Validate();
  const ModelConfig& model = params.config;
  model.Validate();
  CheckLayout(model, data);
  const std::vector<WindowRef> windows = EnumerateWindows(data);
  if (windows.empty()) throw std::invalid_argument("empty dataset");

  const int per_epoch =
      (static_cast<int>(windows.size()) + config.batch - 1) / config.batch;
  const int64_t total = config.updates > 0
                            ? config.updates
                            : static_cast<int64_t>(per_epoch) * config.epochs;

  std::ofstream log;
  if (!config.log_csv.empty()) {
    log.open(config.log_csv);
    if (!log) {
      throw std::runtime_error("cannot write " + config.log_csv.string());
    }
    log << "update,lr,nll\n" << std::setprecision(17);
  }

  std::vector<int> order(windows.size());
  uint64_t epoch = 0;
  size_t cursor = order.size();
  Adam adam;
  TrainResult result;
  std::vector<WindowRef> chosen;
  for (int64_t update = 1; update <= total; ++update) {
    if (cursor >= order.size()) {
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      Shuffle(order, config.seed, epoch++);
      cursor = 0;
    }
    chosen.clear();
    for (; chosen.size() < static_cast<size_t>(config.batch) &&
           cursor < order.size();
         ++cursor) {
      chosen.push_back(windows[order[cursor]]);
    }
    const Batch batch = MakeBatch(model, data, chosen);

    Graph graph;
    const std::vector<Var> vars = AddParameters(graph, params);
    const Var loss = Loss(graph, vars, model, batch,
                          {true, config.seed, static_cast<uint64_t>(update)});
    const double nll = loss.value().item();
    GradientMap grads = graph.Backward(loss);

    std::vector<Tensor> g;
    std::vector<Tensor*> p;
    g.reserve(vars.size());
    double norm2 = 0.0;
    for (size_t i = 0; i < vars.size(); ++i) {
      g.push_back(std::move(grads.at(vars[i].id())));
      for (double x : g.back().data()) norm2 += x * x;
      p.push_back(&params.tensors[i].second);
    }
    const double norm = std::sqrt(norm2);
    if (config.grad_clip > 0.0 && norm > config.grad_clip) {
      const double s = config.grad_clip / norm;
      for (Tensor& t : g) {
        for (double& x : t.data()) x *= s;
      }
    }
    const double lr = LearningRate(config, update);
    adam.Step(p, g, lr);
    result.losses.push_back(nll);
    if (log.is_open()) log << update << ',' << lr << ',' << nll << '\n';
    if (config.on_update && !config.on_update(static_cast<int>(update), nll, params)) {
      break;
    }
  }
  if (!params.AllFinite()) {
    throw std::runtime_error("training diverged: non-finite parameters");
  }
  result.params = std::move(params);
  return result;
}

std::vector<double> SlotNll(const ModelParams& params,
                            std::span<const TokenizedTrajectory> data) {
  const ModelConfig& model = params.config;
  CheckLayout(model, data);
  const std::vector<WindowRef> windows = EnumerateWindows(data);
  std::vector<double> sum(model.stride(), 0.0);
  std::vector<int64_t> count(model.stride(), 0);
  constexpr size_t kChunk = 64;
  for (size_t begin = 0; begin < windows.size(); begin += kChunk) {
    const size_t end = std::min(windows.size(), begin + kChunk);
    const Batch batch = MakeBatch(
        model, data,
        std::span<const WindowRef>(windows).subspan(begin, end - begin));
    Graph graph;
    const std::vector<Var> vars = AddParameters(graph, params);
    const Var logits = Forward(graph, vars, model, batch, {});
    const auto values = logits.value().data();
    const int v = model.vocab;
    for (int b = 0; b < batch.rows; ++b) {
      for (int pos = 1; pos < batch.length; ++pos) {
        const size_t k = static_cast<size_t>(b) * batch.length + pos;
        if (batch.weights[k] == 0.0) continue;
        const double* row = values.data() + (k - 1) * v;
        const double mx = *std::max_element(row, row + v);
        double z = 0.0;
        for (int i = 0; i < v; ++i) z += std::exp(row[i] - mx);
        const int slot = model.SlotAt(pos);
        sum[slot] += mx + std::log(z) - row[batch.tokens[k]];
        ++count[slot];
      }
    }
  }
  std::vector<double> out(model.stride());
  for (int s = 0; s < model.stride(); ++s) {
    out[s] = count[s] ? sum[s] / count[s]
                      : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace trajplan
