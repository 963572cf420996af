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

#include "trajplan/seqmodel/model.h"

#include <cmath>
#include <stdexcept>

#include "trajplan/numerics/ops.h"
#include "trajplan/numerics/random.h"

namespace trajplan {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kMaskFill = -1e9;

std::string LayerName(int layer, const std::string& leaf) {
  return "layer" + std::to_string(layer) + "." + leaf;
}

// Parameter names and shapes in canonical order.
std::vector<std::pair<std::string, Shape>> ParameterShapes(
    const ModelConfig& c) {
  const int64_t d = c.embed_dim;
  std::vector<std::pair<std::string, Shape>> out = {
      {"tok_emb", {c.input_vocab(), d}}, {"pos_emb", {c.block_size(), d}}};
  for (int l = 0; l < c.layers; ++l) {
    out.push_back({LayerName(l, "ln1.g"), {d}});
    out.push_back({LayerName(l, "ln1.b"), {d}});
    out.push_back({LayerName(l, "attn.wqkv"), {d, 3 * d}});
    out.push_back({LayerName(l, "attn.bqkv"), {3 * d}});
    out.push_back({LayerName(l, "attn.wo"), {d, d}});
    out.push_back({LayerName(l, "attn.bo"), {d}});
    out.push_back({LayerName(l, "ln2.g"), {d}});
    out.push_back({LayerName(l, "ln2.b"), {d}});
    out.push_back({LayerName(l, "mlp.w1"), {d, 4 * d}});
    out.push_back({LayerName(l, "mlp.b1"), {4 * d}});
    out.push_back({LayerName(l, "mlp.w2"), {4 * d, d}});
    out.push_back({LayerName(l, "mlp.b2"), {d}});
  }
  out.push_back({"ln_f.g", {d}});
  out.push_back({"ln_f.b", {d}});
  out.push_back({"head.w", {d, c.vocab}});
  out.push_back({"head.b", {c.vocab}});
  return out;
}

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Nonzero where attention is blocked.
Tensor AttentionMask(const ModelConfig& config, int length) {
  Tensor mask({length, length});
  for (int i = 0; i < length; ++i) {
    for (int j = 0; j < length; ++j) {
      mask[static_cast<int64_t>(i) * length + j] =
          config.Visible(i, j) ? 0.0 : 1.0;
    }
  }
  return mask;
}

}  // namespace

int ModelConfig::SlotAt(int position) const {
  const int g = goal_length();
  if (position < g) return position;
  return (position - g) % stride();
}

int ModelConfig::TransitionAt(int position) const {
  const int g = goal_length();
  if (position < g) return -1;
  return (position - g) / stride();
}

int ModelConfig::SlotVocab(int slot) const {
  return slot_vocab.empty() ? vocab : slot_vocab.at(slot);
}

bool ModelConfig::Visible(int query, int key) const {
  return key <= query;
}

void ModelConfig::Validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
  if (layers < 1 || heads < 1 || embed_dim < 1) {
    fail("layers, heads and embed_dim must be positive");
  }
  if (embed_dim % heads != 0) {
    fail("embed_dim " + std::to_string(embed_dim) +
         " is not divisible by heads " + std::to_string(heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (vocab < 1) fail("vocab must be positive");
  if (state_dim < 1 || action_dim < 1) fail("state and action dims must be >= 1");
  if (context_transitions < 1) fail("context_transitions must be >= 1");
  if (!slot_vocab.empty()) {
    if (static_cast<int>(slot_vocab.size()) != stride()) {
      fail("slot_vocab needs one entry per layout slot");
    }
    for (int v : slot_vocab) {
      if (v < 1 || v > vocab) fail("slot vocabularies must lie in [1, vocab]");
    }
  }
}

ModelConfig ModelConfig::Preset(const std::string& name) {
  ModelConfig c;
  if (name == "desk") return c;
  if (name == "full") {
    c.layers = 4;
    c.heads = 4;
    c.embed_dim = 128;
    return c;
  }
  throw std::invalid_argument("unknown model preset '" + name +
                              "' (expected desk or full)");
}

nlohmann::json ToJson(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"heads", c.heads},
          {"embed_dim", c.embed_dim},
          {"dropout", c.dropout},
          {"vocab", c.vocab},
          {"slot_vocab", c.slot_vocab},
          {"state_dim", c.state_dim},
          {"action_dim", c.action_dim},
          {"context_transitions", c.context_transitions},
          {"markovian", c.markovian},
          {"goal_conditioned", c.goal_conditioned}};
}

ModelConfig ModelConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.embed_dim = j.at("embed_dim");
  c.dropout = j.at("dropout");
  c.vocab = j.at("vocab");
  c.slot_vocab = j.value("slot_vocab", std::vector<int>{});
  c.state_dim = j.at("state_dim");
  c.action_dim = j.at("action_dim");
  c.context_transitions = j.at("context_transitions");
  c.markovian = j.value("markovian", false);
  c.goal_conditioned = j.value("goal_conditioned", false);
  c.Validate();
  return c;
}

ModelConfig ConfigureForTokenizer(ModelConfig config,
                                  const DiscretizerSpec& spec) {
  config.state_dim = spec.layout.state_dim;
  config.action_dim = spec.layout.action_dim;
  config.vocab = spec.vocab();
  config.slot_vocab.clear();
  for (const DimDiscretizer& d : spec.dims) config.slot_vocab.push_back(d.vocab);
  config.Validate();
  return config;
}

const Tensor& ModelParams::Get(const std::string& name) const {
  return tensors.at(Index(name)).second;
}

int ModelParams::Index(const std::string& name) const {
  for (size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].first == name) return static_cast<int>(i);
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

int64_t ModelParams::NumParameters() const {
  int64_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

bool ModelParams::AllFinite() const {
  for (const auto& [name, t] : tensors) {
    if (!t.AllFinite()) return false;
  }
  return true;
}

ModelParams InitParams(const ModelConfig& config, uint64_t seed) {
  config.Validate();
  ModelParams params;
  params.config = config;
  const double residual_std = kInitStd / std::sqrt(2.0 * config.layers);
  const auto shapes = ParameterShapes(config);
  for (size_t i = 0; i < shapes.size(); ++i) {
    const auto& [name, shape] = shapes[i];
    Tensor t(shape);
    if (name == "head.w" || EndsWith(name, ".b") || name == "head.b" ||
        EndsWith(name, "bqkv") || EndsWith(name, "bo") ||
        EndsWith(name, "b1") || EndsWith(name, "b2")) {
      // zeros
    } else if (EndsWith(name, ".g")) {
      for (double& x : t.data()) x = 1.0;
    } else {
      const double std_dev = (EndsWith(name, "attn.wo") || EndsWith(name, "mlp.w2"))
                                 ? residual_std
                                 : kInitStd;
      Rng rng(HashCounters(seed, i));
      for (double& x : t.data()) x = std_dev * rng.Normal();
    }
    params.tensors.emplace_back(name, std::move(t));
  }
  return params;
}

void SaveModel(const std::filesystem::path& dir, const ModelParams& params,
               uint64_t seed, const nlohmann::json& metadata) {
  Checkpoint ck;
  ck.tensors = params.tensors;
  ck.seed = seed;
  ck.metadata = metadata.is_null() ? nlohmann::json::object() : metadata;
  ck.metadata["model_config"] = ToJson(params.config);
  SaveCheckpoint(dir, ck);
}

ModelParams LoadModel(const std::filesystem::path& dir) {
  Checkpoint ck = LoadCheckpoint(dir);
  ModelParams params;
  if (!ck.metadata.contains("model_config")) {
    throw std::runtime_error("checkpoint at " + dir.string() +
                             " has no model_config");
  }
  params.config = ModelConfigFromJson(ck.metadata.at("model_config"));
  const auto shapes = ParameterShapes(params.config);
  if (shapes.size() != ck.tensors.size()) {
    throw std::runtime_error("checkpoint tensor count does not match config");
  }
  for (size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].first != ck.tensors[i].first ||
        shapes[i].second != ck.tensors[i].second.shape()) {
      throw std::runtime_error("checkpoint tensor " + ck.tensors[i].first +
                               " does not match the model config");
    }
  }
  params.tensors = std::move(ck.tensors);
  return params;
}

std::vector<int> InputIds(const ModelConfig& config, const Batch& batch) {
  if (batch.rows < 1 || batch.length < 1 ||
      batch.tokens.size() != static_cast<size_t>(batch.rows) * batch.length) {
    throw std::invalid_argument("malformed batch");
  }
  if (batch.length > config.block_size()) {
    throw std::invalid_argument("sequence length " +
                                std::to_string(batch.length) +
                                " exceeds the context window of " +
                                std::to_string(config.block_size()));
  }
  std::vector<int> ids(batch.tokens.size());
  for (int b = 0; b < batch.rows; ++b) {
    for (int p = 0; p < batch.length; ++p) {
      const int token = batch.tokens[static_cast<size_t>(b) * batch.length + p];
      const int slot = config.SlotAt(p);
      if (token < 0 || token >= config.SlotVocab(slot)) {
        throw std::out_of_range("token " + std::to_string(token) +
                                " at position " + std::to_string(p) +
                                " is outside sub-vocabulary " +
                                std::to_string(slot) + " of size " +
                                std::to_string(config.SlotVocab(slot)));
      }
      ids[static_cast<size_t>(b) * batch.length + p] =
          slot * config.vocab + token;
    }
  }
  return ids;
}

std::vector<Var> AddParameters(Graph& graph, const ModelParams& params) {
  std::vector<Var> vars;
  vars.reserve(params.tensors.size());
  for (const auto& [name, t] : params.tensors) vars.push_back(graph.Parameter(t));
  return vars;
}

Var Forward(Graph& graph, const std::vector<Var>& vars,
            const ModelConfig& c, const Batch& batch,
            const ForwardOptions& options) {
  (void)graph;
  const std::vector<int> ids = InputIds(c, batch);
  const int64_t rows = batch.rows;
  const int64_t len = batch.length;
  const int64_t d = c.embed_dim;
  const int64_t h = c.heads;
  const int64_t dh = c.head_dim();
  size_t next = 0;
  auto take = [&]() -> const Var& { return vars.at(next++); };
  auto dropout = [&](const Var& x, uint64_t site) {
    return Dropout(x, c.dropout, {options.dropout_seed, site, options.step},
                   options.train);
  };

  const Var& tok_emb = take();
  const Var& pos_emb = take();
  Var x = Reshape(Embedding(tok_emb, ids), {rows, len, d});
  x = Add(x, Slice(pos_emb, 0, 0, len));
  x = dropout(x, 0);
  const Tensor mask = AttentionMask(c, static_cast<int>(len));

  for (int l = 0; l < c.layers; ++l) {
    const Var& ln1_g = take();
    const Var& ln1_b = take();
    const Var& wqkv = take();
    const Var& bqkv = take();
    const Var& wo = take();
    const Var& bo = take();
    const Var& ln2_g = take();
    const Var& ln2_b = take();
    const Var& w1 = take();
    const Var& b1 = take();
    const Var& w2 = take();
    const Var& b2 = take();

    Var qkv = Add(MatMul(LayerNorm(x, ln1_g, ln1_b), wqkv), bqkv);
    qkv = Reshape(Permute(Reshape(qkv, {rows, len, 3, h, dh}), {2, 0, 3, 1, 4}),
                  {3, rows * h, len, dh});
    auto head_part = [&](int k) {
      return Reshape(Slice(qkv, 0, k, k + 1), {rows * h, len, dh});
    };
    const Var q = head_part(0);
    const Var k = head_part(1);
    const Var v = head_part(2);
    Var att = Scale(MatMul(q, Transpose(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
    att = Softmax(MaskedFill(att, mask, kMaskFill));
    att = dropout(att, 1 + 3 * static_cast<uint64_t>(l));
    Var y = MatMul(att, v);
    y = Reshape(Permute(Reshape(y, {rows, h, len, dh}), {0, 2, 1, 3}),
                {rows, len, d});
    y = Add(MatMul(y, wo), bo);
    x = Add(x, dropout(y, 2 + 3 * static_cast<uint64_t>(l)));

    Var m = Gelu(Add(MatMul(LayerNorm(x, ln2_g, ln2_b), w1), b1));
    m = Add(MatMul(m, w2), b2);
    x = Add(x, dropout(m, 3 + 3 * static_cast<uint64_t>(l)));
  }
  const Var& lnf_g = take();
  const Var& lnf_b = take();
  const Var& head_w = take();
  const Var& head_b = take();
  return Add(MatMul(LayerNorm(x, lnf_g, lnf_b), head_w), head_b);
}

Var Loss(Graph& graph, const std::vector<Var>& vars, const ModelConfig& config,
         const Batch& batch, const ForwardOptions& options) {
  if (batch.rows < 1 || batch.length < 2) {
    throw std::invalid_argument("empty batch: need at least one row of two tokens");
  }
  if (batch.weights.size() != batch.tokens.size()) {
    throw std::invalid_argument("batch weights must match tokens");
  }
  const Var logits = Forward(graph, vars, config, batch, options);
  const int64_t n = static_cast<int64_t>(batch.rows) * batch.length;
  std::vector<int> targets(n, 0);
  std::vector<double> weights(n, 0.0);
  for (int b = 0; b < batch.rows; ++b) {
    const size_t row = static_cast<size_t>(b) * batch.length;
    if (batch.weights[row] != 0.0) {
      throw std::invalid_argument("position 0 has no prefix to predict from");
    }
    for (int p = 1; p < batch.length; ++p) {
      targets[row + p - 1] = batch.tokens[row + p];
      weights[row + p - 1] = batch.weights[row + p];
    }
  }
  return SoftmaxCrossEntropy(Reshape(logits, {n, config.vocab}), targets,
                             weights);
}

Eigen::MatrixXd ComputeLogits(const ModelParams& params,
                              std::span<const int> tokens) {
  Batch batch;
  batch.rows = 1;
  batch.length = static_cast<int>(tokens.size());
  batch.tokens.assign(tokens.begin(), tokens.end());
  Graph graph;
  const std::vector<Var> vars = AddParameters(graph, params);
  const Var logits = Forward(graph, vars, params.config, batch, {});
  Eigen::MatrixXd out(batch.length, params.config.vocab);
  const auto data = logits.value().data();
  for (int p = 0; p < batch.length; ++p) {
    for (int v = 0; v < params.config.vocab; ++v) {
      out(p, v) = data[static_cast<size_t>(p) * params.config.vocab + v];
    }
  }
  return out;
}

double SeqLogProb(const ModelParams& params, std::span<const int> tokens,
                  std::span<const int> positions) {
  if (positions.empty()) return 0.0;
  for (int p : positions) {
    if (p < 1 || p >= static_cast<int>(tokens.size())) {
      throw std::out_of_range("position " + std::to_string(p) +
                              " cannot be scored in a sequence of length " +
                              std::to_string(tokens.size()));
    }
  }
  const Eigen::MatrixXd logits = ComputeLogits(params, tokens);
  double total = 0.0;
  for (int p : positions) {
    const auto row = logits.row(p - 1);
    const double mx = row.maxCoeff();
    const double lse = mx + std::log((row.array() - mx).exp().sum());
    total += row(tokens[p]) - lse;
  }
  return total;
}

}  // namespace trajplan
