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

#include "trajplan/numerics/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "trajplan/numerics/random.h"

namespace trajplan {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

[[noreturn]] void ShapeError(const std::string& op, const Shape& a,
                             const Shape& b) {
  throw std::invalid_argument(op + ": incompatible shapes " +
                              ShapeToString(a) + " and " + ShapeToString(b));
}

void CheckSameGraph(const std::string& op, const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || a.graph() != b.graph()) {
    throw std::invalid_argument(op + ": operands must live on the same graph");
  }
}

// True if `b` equals the trailing dimensions of `a`.
bool IsTrailing(const Shape& a, const Shape& b) {
  if (b.size() > a.size()) return false;
  return std::equal(b.begin(), b.end(), a.end() - b.size());
}

int NormalizeAxis(int axis, int rank) {
  int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw std::out_of_range("axis " + std::to_string(axis) +
                            " out of range for rank " + std::to_string(rank));
  }
  return a;
}

// Leading-batch broadcast check shared by Add and Mul.
void CheckBroadcast(const std::string& op, const Var& a, const Var& b) {
  CheckSameGraph(op, a, b);
  if (a.shape() != b.shape() && !IsTrailing(a.shape(), b.shape())) {
    ShapeError(op, a.shape(), b.shape());
  }
}

}  // namespace

Var Add(const Var& a, const Var& b) {
  CheckBroadcast("add", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out = x;
  const int64_t inner = y.size();
  auto o = out.data();
  auto yd = y.data();
  for (int64_t i = 0; i < out.size(); ++i) o[i] += yd[i % inner];
  return a.graph()->Record(
      "add", std::move(out), {a, b},
      [inner](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        auto gd = g.data();
        if (gi[0] != nullptr) {
          auto d = gi[0]->data();
          for (int64_t i = 0; i < g.size(); ++i) d[i] += gd[i];
        }
        if (gi[1] != nullptr) {
          auto d = gi[1]->data();
          for (int64_t i = 0; i < g.size(); ++i) d[i % inner] += gd[i];
        }
      });
}

Var Mul(const Var& a, const Var& b) {
  CheckBroadcast("mul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out = x;
  const int64_t inner = y.size();
  auto o = out.data();
  auto yd = y.data();
  for (int64_t i = 0; i < out.size(); ++i) o[i] *= yd[i % inner];
  return a.graph()->Record(
      "mul", std::move(out), {a, b},
      [a, b, inner](const Tensor&, const Tensor& g,
                    std::span<Tensor* const> gi) {
        auto gd = g.data();
        auto xd = a.value().data();
        auto yd = b.value().data();
        if (gi[0] != nullptr) {
          auto d = gi[0]->data();
          for (int64_t i = 0; i < g.size(); ++i) d[i] += gd[i] * yd[i % inner];
        }
        if (gi[1] != nullptr) {
          auto d = gi[1]->data();
          for (int64_t i = 0; i < g.size(); ++i) d[i % inner] += gd[i] * xd[i];
        }
      });
}

Var Scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.graph()->Record(
      "scale", std::move(out), {a},
      [factor](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto gd = g.data();
        for (int64_t i = 0; i < g.size(); ++i) d[i] += factor * gd[i];
      });
}

Var MatMul(const Var& a, const Var& b) {
  CheckSameGraph("matmul", a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) ShapeError("matmul", sa, sb);
  const int64_t n = sa[sa.size() - 2];
  const int64_t k = sa.back();
  const int64_t m = sb.back();
  if (sb[sb.size() - 2] != k) ShapeError("matmul", sa, sb);

  Shape out_shape = sa;
  out_shape.back() = m;

  if (sb.size() == 2) {
    // shared right operand: fold every leading dimension into the rows
    const int64_t rows = a.value().size() / k;
    Tensor out(out_shape);
    MatMap(out.data().data(), rows, m).noalias() =
        ConstMatMap(a.value().data().data(), rows, k) *
        ConstMatMap(b.value().data().data(), k, m);
    return a.graph()->Record(
        "matmul", std::move(out), {a, b},
        [a, b, rows, k, m](const Tensor&, const Tensor& g,
                           std::span<Tensor* const> gi) {
          ConstMatMap gm(g.data().data(), rows, m);
          if (gi[0] != nullptr) {
            MatMap(gi[0]->data().data(), rows, k).noalias() +=
                gm * ConstMatMap(b.value().data().data(), k, m).transpose();
          }
          if (gi[1] != nullptr) {
            MatMap(gi[1]->data().data(), k, m).noalias() +=
                ConstMatMap(a.value().data().data(), rows, k).transpose() * gm;
          }
        });
  }

  if (sa.size() != sb.size() ||
      !std::equal(sa.begin(), sa.end() - 2, sb.begin())) {
    ShapeError("matmul", sa, sb);
  }
  const int64_t batch = a.value().size() / (n * k);
  Tensor out(out_shape);
  for (int64_t i = 0; i < batch; ++i) {
    MatMap(out.data().data() + i * n * m, n, m).noalias() =
        ConstMatMap(a.value().data().data() + i * n * k, n, k) *
        ConstMatMap(b.value().data().data() + i * k * m, k, m);
  }
  return a.graph()->Record(
      "batched_matmul", std::move(out), {a, b},
      [a, b, batch, n, k, m](const Tensor&, const Tensor& g,
                             std::span<Tensor* const> gi) {
        for (int64_t i = 0; i < batch; ++i) {
          ConstMatMap gm(g.data().data() + i * n * m, n, m);
          if (gi[0] != nullptr) {
            MatMap(gi[0]->data().data() + i * n * k, n, k).noalias() +=
                gm *
                ConstMatMap(b.value().data().data() + i * k * m, k, m)
                    .transpose();
          }
          if (gi[1] != nullptr) {
            MatMap(gi[1]->data().data() + i * k * m, k, m).noalias() +=
                ConstMatMap(a.value().data().data() + i * n * k, n, k)
                    .transpose() *
                gm;
          }
        }
      });
}

Var Transpose(const Var& a) {
  const int r = static_cast<int>(a.shape().size());
  if (r < 2) {
    throw std::invalid_argument("transpose needs rank >= 2, got " +
                                ShapeToString(a.shape()));
  }
  std::vector<int> axes(r);
  for (int i = 0; i < r; ++i) axes[i] = i;
  std::swap(axes[r - 1], axes[r - 2]);
  return Permute(a, axes);
}

Var Reshape(const Var& a, Shape shape) {
  if (NumElements(shape) != a.value().size()) {
    throw std::invalid_argument("reshape: cannot view " +
                                ShapeToString(a.shape()) + " as " +
                                ShapeToString(shape));
  }
  return a.graph()->Record(
      "reshape", a.value().Reshaped(std::move(shape)), {a},
      [](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto gd = g.data();
        for (int64_t i = 0; i < g.size(); ++i) d[i] += gd[i];
      });
}

Var Permute(const Var& a, const std::vector<int>& axes) {
  const Shape& in_shape = a.shape();
  const int r = static_cast<int>(in_shape.size());
  if (static_cast<int>(axes.size()) != r) {
    throw std::invalid_argument("permute: axes do not match rank of " +
                                ShapeToString(in_shape));
  }
  std::vector<int> seen(r, 0);
  for (int ax : axes) {
    if (ax < 0 || ax >= r || seen[ax]++) {
      throw std::invalid_argument("permute: axes are not a permutation");
    }
  }
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = in_shape[axes[i]];

  std::vector<int64_t> in_strides(r, 1);
  for (int i = r - 2; i >= 0; --i) {
    in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
  }
  // for each output element, the flat index of its source
  const int64_t total = a.value().size();
  auto source = std::make_shared<std::vector<int64_t>>(total);
  std::vector<int64_t> idx(r, 0);
  for (int64_t o = 0; o < total; ++o) {
    int64_t src = 0;
    for (int i = 0; i < r; ++i) src += idx[i] * in_strides[axes[i]];
    (*source)[o] = src;
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  Tensor out(out_shape);
  auto in = a.value().data();
  auto od = out.data();
  for (int64_t o = 0; o < total; ++o) od[o] = in[(*source)[o]];
  return a.graph()->Record(
      "permute", std::move(out), {a},
      [source](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto gd = g.data();
        for (int64_t o = 0; o < g.size(); ++o) d[(*source)[o]] += gd[o];
      });
}

Var Slice(const Var& a, int axis, int64_t begin, int64_t end) {
  const Shape& s = a.shape();
  const int ax = NormalizeAxis(axis, static_cast<int>(s.size()));
  if (begin < 0 || end > s[ax] || begin >= end) {
    throw std::invalid_argument(
        "slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
        ") invalid for axis " + std::to_string(ax) + " of " +
        ShapeToString(s));
  }
  int64_t outer = 1;
  for (int i = 0; i < ax; ++i) outer *= s[i];
  int64_t inner = 1;
  for (size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
  const int64_t width = end - begin;
  Shape out_shape = s;
  out_shape[ax] = width;
  Tensor out(out_shape);
  auto in = a.value().data();
  auto od = out.data();
  for (int64_t o = 0; o < outer; ++o) {
    std::copy_n(in.begin() + (o * s[ax] + begin) * inner, width * inner,
                od.begin() + o * width * inner);
  }
  const int64_t full = s[ax];
  return a.graph()->Record(
      "slice", std::move(out), {a},
      [outer, inner, width, full, begin](const Tensor&, const Tensor& g,
                                         std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto gd = g.data();
        for (int64_t o = 0; o < outer; ++o) {
          for (int64_t j = 0; j < width * inner; ++j) {
            d[(o * full + begin) * inner + j] += gd[o * width * inner + j];
          }
        }
      });
}

Var Concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  const Shape& s0 = parts[0].shape();
  const int ax = NormalizeAxis(axis, static_cast<int>(s0.size()));
  std::vector<int64_t> widths;
  int64_t total = 0;
  for (const Var& p : parts) {
    CheckSameGraph("concat", parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != s0.size()) ShapeError("concat", s0, s);
    for (size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != ax && s[i] != s0[i]) {
        ShapeError("concat", s0, s);
      }
    }
    widths.push_back(s[ax]);
    total += s[ax];
  }
  int64_t outer = 1;
  for (int i = 0; i < ax; ++i) outer *= s0[i];
  int64_t inner = 1;
  for (size_t i = ax + 1; i < s0.size(); ++i) inner *= s0[i];
  Shape out_shape = s0;
  out_shape[ax] = total;
  Tensor out(out_shape);
  auto od = out.data();
  int64_t offset = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    auto in = parts[p].value().data();
    for (int64_t o = 0; o < outer; ++o) {
      std::copy_n(in.begin() + o * widths[p] * inner, widths[p] * inner,
                  od.begin() + (o * total + offset) * inner);
    }
    offset += widths[p];
  }
  return parts[0].graph()->Record(
      "concat", std::move(out), parts,
      [widths, outer, inner, total](const Tensor&, const Tensor& g,
                                    std::span<Tensor* const> gi) {
        auto gd = g.data();
        int64_t offset = 0;
        for (size_t p = 0; p < widths.size(); ++p) {
          if (gi[p] != nullptr) {
            auto d = gi[p]->data();
            for (int64_t o = 0; o < outer; ++o) {
              for (int64_t j = 0; j < widths[p] * inner; ++j) {
                d[o * widths[p] * inner + j] +=
                    gd[(o * total + offset) * inner + j];
              }
            }
          }
          offset += widths[p];
        }
      });
}

Var Embedding(const Var& table, std::span<const int> ids) {
  const Shape& s = table.shape();
  if (s.size() != 2) {
    throw std::invalid_argument("embedding: table must be [V, D], got " +
                                ShapeToString(s));
  }
  if (ids.empty()) throw std::invalid_argument("embedding: no ids");
  const int64_t vocab = s[0];
  const int64_t dim = s[1];
  Tensor out({static_cast<int64_t>(ids.size()), dim});
  auto td = table.value().data();
  auto od = out.data();
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw std::out_of_range("embedding: id " + std::to_string(ids[i]) +
                              " outside vocabulary of size " +
                              std::to_string(vocab));
    }
    std::copy_n(td.begin() + ids[i] * dim, dim, od.begin() + i * dim);
  }
  auto id_copy = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
  return table.graph()->Record(
      "embedding", std::move(out), {table},
      [id_copy, dim](const Tensor&, const Tensor& g,
                     std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto gd = g.data();
        for (size_t i = 0; i < id_copy->size(); ++i) {
          const int64_t row = (*id_copy)[i];
          for (int64_t j = 0; j < dim; ++j) d[row * dim + j] += gd[i * dim + j];
        }
      });
}

Var Softmax(const Var& a) {
  const int64_t cols = a.shape().back();
  const int64_t rows = a.value().size() / cols;
  Tensor out(a.shape());
  auto in = a.value().data();
  auto od = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = in.data() + r * cols;
    double* y = od.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double total = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      total += y[c];
    }
    for (int64_t c = 0; c < cols; ++c) y[c] /= total;
  }
  return a.graph()->Record(
      "softmax", std::move(out), {a},
      [rows, cols](const Tensor& y, const Tensor& g,
                   std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto yd = y.data();
        auto gd = g.data();
        for (int64_t r = 0; r < rows; ++r) {
          double dot = 0.0;
          for (int64_t c = 0; c < cols; ++c) {
            dot += gd[r * cols + c] * yd[r * cols + c];
          }
          for (int64_t c = 0; c < cols; ++c) {
            d[r * cols + c] += yd[r * cols + c] * (gd[r * cols + c] - dot);
          }
        }
      });
}

Var LayerNorm(const Var& x, const Var& gain, const Var& bias, double eps) {
  CheckSameGraph("layernorm", x, gain);
  CheckSameGraph("layernorm", x, bias);
  const int64_t cols = x.shape().back();
  if (gain.shape() != Shape{cols} || bias.shape() != Shape{cols}) {
    throw std::invalid_argument("layernorm: gain " +
                                ShapeToString(gain.shape()) + " and bias " +
                                ShapeToString(bias.shape()) +
                                " must be [" + std::to_string(cols) + "]");
  }
  const int64_t rows = x.value().size() / cols;
  struct Cache {
    std::vector<double> xhat;
    std::vector<double> inv_std;
  };
  auto cache = std::make_shared<Cache>();
  cache->xhat.resize(x.value().size());
  cache->inv_std.resize(rows);
  Tensor out(x.shape());
  auto in = x.value().data();
  auto gd = gain.value().data();
  auto bd = bias.value().data();
  auto od = out.data();
  for (int64_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * cols;
    double mean = 0.0;
    for (int64_t c = 0; c < cols; ++c) mean += row[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t c = 0; c < cols; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    cache->inv_std[r] = inv;
    for (int64_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mean) * inv;
      cache->xhat[r * cols + c] = h;
      od[r * cols + c] = h * gd[c] + bd[c];
    }
  }
  return x.graph()->Record(
      "layernorm", std::move(out), {x, gain, bias},
      [cache, gain, rows, cols](const Tensor&, const Tensor& g,
                                std::span<Tensor* const> gi) {
        auto gdat = g.data();
        auto gain_d = gain.value().data();
        const auto& xhat = cache->xhat;
        if (gi[1] != nullptr || gi[2] != nullptr) {
          for (int64_t r = 0; r < rows; ++r) {
            for (int64_t c = 0; c < cols; ++c) {
              const int64_t i = r * cols + c;
              if (gi[1] != nullptr) gi[1]->data()[c] += gdat[i] * xhat[i];
              if (gi[2] != nullptr) gi[2]->data()[c] += gdat[i];
            }
          }
        }
        if (gi[0] != nullptr) {
          auto d = gi[0]->data();
          std::vector<double> dxhat(cols);
          for (int64_t r = 0; r < rows; ++r) {
            double mean_d = 0.0;
            double mean_dx = 0.0;
            for (int64_t c = 0; c < cols; ++c) {
              const int64_t i = r * cols + c;
              dxhat[c] = gdat[i] * gain_d[c];
              mean_d += dxhat[c];
              mean_dx += dxhat[c] * xhat[i];
            }
            mean_d /= static_cast<double>(cols);
            mean_dx /= static_cast<double>(cols);
            for (int64_t c = 0; c < cols; ++c) {
              const int64_t i = r * cols + c;
              d[i] += cache->inv_std[r] * (dxhat[c] - mean_d - xhat[i] * mean_dx);
            }
          }
        }
      });
}

Var Gelu(const Var& a) {
  static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  static constexpr double kA = 0.044715;
  Tensor out(a.shape());
  auto in = a.value().data();
  auto od = out.data();
  for (int64_t i = 0; i < out.size(); ++i) {
    const double x = in[i];
    od[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
  }
  return a.graph()->Record(
      "gelu", std::move(out), {a},
      [a](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto in = a.value().data();
        auto gd = g.data();
        for (int64_t i = 0; i < g.size(); ++i) {
          const double x = in[i];
          const double t = std::tanh(kC * (x + kA * x * x * x));
          const double dt = (1.0 - t * t) * kC * (1.0 + 3.0 * kA * x * x);
          d[i] += gd[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
        }
      });
}

Var Dropout(const Var& a, double p, const DropoutKey& key, bool train) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout probability must be in [0, 1)");
  }
  if (!train || p == 0.0) return a;
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(a.value().size());
  Tensor out(a.shape());
  auto in = a.value().data();
  auto od = out.data();
  for (int64_t i = 0; i < out.size(); ++i) {
    const bool keep =
        CounterUniform(key.seed, key.layer, key.step, static_cast<uint64_t>(i)) >=
        p;
    (*mask)[i] = keep ? keep_scale : 0.0;
    od[i] = in[i] * (*mask)[i];
  }
  return a.graph()->Record(
      "dropout", std::move(out), {a},
      [mask](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto gd = g.data();
        for (int64_t i = 0; i < g.size(); ++i) d[i] += gd[i] * (*mask)[i];
      });
}

Var MaskedFill(const Var& a, const Tensor& mask, double fill) {
  if (mask.shape() != a.shape() && !IsTrailing(a.shape(), mask.shape())) {
    ShapeError("masked_fill", a.shape(), mask.shape());
  }
  const int64_t inner = mask.size();
  Tensor out = a.value();
  auto od = out.data();
  auto md = mask.data();
  for (int64_t i = 0; i < out.size(); ++i) {
    if (md[i % inner] != 0.0) od[i] = fill;
  }
  auto mask_copy = std::make_shared<Tensor>(mask);
  return a.graph()->Record(
      "masked_fill", std::move(out), {a},
      [mask_copy, inner](const Tensor&, const Tensor& g,
                         std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        auto gd = g.data();
        auto md = mask_copy->data();
        for (int64_t i = 0; i < g.size(); ++i) {
          if (md[i % inner] == 0.0) d[i] += gd[i];
        }
      });
}

Var SoftmaxCrossEntropy(const Var& logits, std::span<const int> targets,
                        std::span<const double> weights) {
  const Shape& s = logits.shape();
  if (s.size() != 2) {
    throw std::invalid_argument("cross entropy: logits must be [n, V], got " +
                                ShapeToString(s));
  }
  const int64_t rows = s[0];
  const int64_t cols = s[1];
  if (static_cast<int64_t>(targets.size()) != rows ||
      static_cast<int64_t>(weights.size()) != rows) {
    throw std::invalid_argument(
        "cross entropy: " + std::to_string(targets.size()) + " targets and " +
        std::to_string(weights.size()) + " weights for logits " +
        ShapeToString(s));
  }
  auto probs = std::make_shared<std::vector<double>>(rows * cols);
  auto in = logits.value().data();
  // Running weighted mean: identical per-row losses give that loss back
  // without summation rounding.
  double mean = 0.0;
  double total_weight = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || targets[r] >= cols) {
      throw std::out_of_range("cross entropy: target " +
                              std::to_string(targets[r]) + " outside [0, " +
                              std::to_string(cols) + ")");
    }
    const double* x = in.data() + r * cols;
    double* p = probs->data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      p[c] = std::exp(x[c] - mx);
      z += p[c];
    }
    for (int64_t c = 0; c < cols; ++c) p[c] /= z;
    if (weights[r] == 0.0) continue;
    const double nll = mx + std::log(z) - x[targets[r]];
    total_weight += weights[r];
    mean += (weights[r] / total_weight) * (nll - mean);
  }
  if (total_weight <= 0.0) {
    throw std::invalid_argument("cross entropy: no weighted targets");
  }
  auto tgt = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
  auto w = std::make_shared<std::vector<double>>(weights.begin(), weights.end());
  return logits.graph()->Record(
      "cross_entropy", Tensor::Scalar(mean), {logits},
      [probs, tgt, w, rows, cols, total_weight](const Tensor&, const Tensor& g,
                                                std::span<Tensor* const> gi) {
        auto d = gi[0]->data();
        const double scale = g[0] / total_weight;
        for (int64_t r = 0; r < rows; ++r) {
          if ((*w)[r] == 0.0) continue;
          const double f = scale * (*w)[r];
          for (int64_t c = 0; c < cols; ++c) {
            d[r * cols + c] += f * (*probs)[r * cols + c];
          }
          d[r * cols + (*tgt)[r]] -= f;
        }
      });
}

Var Sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.graph()->Record(
      "sum", Tensor::Scalar(total), {a},
      [](const Tensor&, const Tensor& g, std::span<Tensor* const> gi) {
        for (double& d : gi[0]->data()) d += g[0];
      });
}

Var Mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return Scale(Sum(a), 1.0 / n);
}

}  // namespace trajplan
