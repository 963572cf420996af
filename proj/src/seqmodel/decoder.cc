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

#include "trajplan/seqmodel/decoder.h"

#include <cmath>
#include <stdexcept>

namespace trajplan {
namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd AsMatrix(const Tensor& t) {
  return Eigen::Map<const RowMajor>(t.data().data(), t.dim(0), t.dim(1));
}

Eigen::VectorXd AsVector(const Tensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.data().data(), t.size());
}

Eigen::VectorXd LayerNormVec(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& b) {
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  return ((x.array() - mean) * inv * g.array() + b.array()).matrix();
}

double Gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
}

}  // namespace

DecoderWeights::DecoderWeights(const ModelParams& params)
    : config(params.config) {
  config.Validate();
  tok_emb = AsMatrix(params.Get("tok_emb"));
  pos_emb = AsMatrix(params.Get("pos_emb"));
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer layer;
    layer.ln1_g = AsVector(params.Get(p + "ln1.g"));
    layer.ln1_b = AsVector(params.Get(p + "ln1.b"));
    layer.wqkv = AsMatrix(params.Get(p + "attn.wqkv")).transpose();
    layer.bqkv = AsVector(params.Get(p + "attn.bqkv"));
    layer.wo = AsMatrix(params.Get(p + "attn.wo")).transpose();
    layer.bo = AsVector(params.Get(p + "attn.bo"));
    layer.ln2_g = AsVector(params.Get(p + "ln2.g"));
    layer.ln2_b = AsVector(params.Get(p + "ln2.b"));
    layer.w1 = AsMatrix(params.Get(p + "mlp.w1")).transpose();
    layer.b1 = AsVector(params.Get(p + "mlp.b1"));
    layer.w2 = AsMatrix(params.Get(p + "mlp.w2")).transpose();
    layer.b2 = AsVector(params.Get(p + "mlp.b2"));
    layers.push_back(std::move(layer));
  }
  lnf_g = AsVector(params.Get("ln_f.g"));
  lnf_b = AsVector(params.Get("ln_f.b"));
  head_w = AsMatrix(params.Get("head.w")).transpose();
  head_b = AsVector(params.Get("head.b"));
}

DecoderSession::DecoderSession(std::shared_ptr<const DecoderWeights> weights)
    : weights_(std::move(weights)) {
  if (!weights_) throw std::invalid_argument("decoder session needs weights");
  Reset();
}

void DecoderSession::Reset() {
  const ModelConfig& c = config();
  window_.clear();
  pushed_ = 0;
  keys_.assign(c.layers, Eigen::MatrixXd(c.block_size(), c.embed_dim));
  values_.assign(c.layers, Eigen::MatrixXd(c.block_size(), c.embed_dim));
  log_probs_.resize(0);
}

const Eigen::VectorXd& DecoderSession::log_probs() const {
  if (window_.empty()) {
    throw std::logic_error("no token pushed yet: nothing to predict from");
  }
  return log_probs_;
}

void DecoderSession::Push(int token) {
  const int vocab = next_vocab();
  if (token < 0 || token >= vocab) {
    throw std::out_of_range("token " + std::to_string(token) +
                            " outside sub-vocabulary " +
                            std::to_string(next_slot()) + " of size " +
                            std::to_string(vocab));
  }
  Append(token);
  ++pushed_;
  if (static_cast<int>(window_.size()) == config().block_size()) Slide();
}

// Drops the oldest transition and re-encodes what is left.
void DecoderSession::Slide() {
  const ModelConfig& c = config();
  std::vector<int> kept(window_.begin(), window_.begin() + c.goal_length());
  kept.insert(kept.end(), window_.begin() + c.goal_length() + c.stride(),
              window_.end());
  const int64_t pushed = pushed_;
  Reset();
  for (int token : kept) Append(token);
  pushed_ = pushed;
}

void DecoderSession::Append(int token) {
  const DecoderWeights& w = *weights_;
  const ModelConfig& c = w.config;
  const int pos = static_cast<int>(window_.size());
  const int d = c.embed_dim;
  const int dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  window_.push_back(token);

  Eigen::VectorXd x = w.tok_emb.row(c.SlotAt(pos) * c.vocab + token).transpose() +
                      w.pos_emb.row(pos).transpose();
  std::vector<int> visible;
  for (int j = 0; j <= pos; ++j) {
    if (c.Visible(pos, j)) visible.push_back(j);
  }
  Eigen::VectorXd scores(visible.size());
  for (int l = 0; l < c.layers; ++l) {
    const DecoderWeights::Layer& layer = w.layers[l];
    const Eigen::VectorXd qkv =
        layer.wqkv * LayerNormVec(x, layer.ln1_g, layer.ln1_b) + layer.bqkv;
    keys_[l].row(pos) = qkv.segment(d, d).transpose();
    values_[l].row(pos) = qkv.segment(2 * d, d).transpose();
    Eigen::VectorXd attended(d);
    for (int h = 0; h < c.heads; ++h) {
      const auto q = qkv.segment(h * dh, dh);
      for (size_t i = 0; i < visible.size(); ++i) {
        scores(i) = keys_[l].row(visible[i]).segment(h * dh, dh).dot(q) * scale;
      }
      const double mx = scores.maxCoeff();
      Eigen::VectorXd p = (scores.array() - mx).exp();
      p /= p.sum();
      Eigen::VectorXd out = Eigen::VectorXd::Zero(dh);
      for (size_t i = 0; i < visible.size(); ++i) {
        out += p(i) * values_[l].row(visible[i]).segment(h * dh, dh).transpose();
      }
      attended.segment(h * dh, dh) = out;
    }
    x += layer.wo * attended + layer.bo;
    Eigen::VectorXd m =
        layer.w1 * LayerNormVec(x, layer.ln2_g, layer.ln2_b) + layer.b1;
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = Gelu(m(i));
    x += layer.w2 * m + layer.b2;
  }
  const Eigen::VectorXd logits =
      w.head_w * LayerNormVec(x, w.lnf_g, w.lnf_b) + w.head_b;
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  log_probs_ = (logits.array() - lse).matrix();
}

}  // namespace trajplan
