// Copyright 2026 The TDT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tdt/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace tdt {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat, Eigen::Aligned64>;
using MapM = Eigen::Map<RowMat, Eigen::Aligned64>;

MapC view(const Tensor& t, std::size_t r, std::size_t c) {
  return MapC(t.ptr(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MapM view(Tensor& t, std::size_t r, std::size_t c) {
  return MapM(t.ptr(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + " expects a matrix, got " + shape_str(t.shape()));
}

Shape with_last(const Shape& s, std::size_t last) {
  Shape out = s.empty() ? Shape{1} : s;
  out.back() = last;
  return out;
}

Tensor& grad_of(detail::Node& self, std::size_t i) { return self.parents[i]->grad_buffer(); }
bool needs(detail::Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  Tensor c({a.rows(), b.cols()});
  view(c, c.rows(), c.cols()).noalias() = view(a, a.rows(), a.cols()) * view(b, b.rows(), b.cols());
  return c;
}

Tensor softmax_rows(const Tensor& x) {
  Tensor y(x.shape());
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto out = y.row(r);
    double m = -std::numeric_limits<double>::infinity();
    for (double v : in) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw NumericError("softmax_rows: non-finite input");
      }
      m = std::max(m, v);
    }
    if (!std::isfinite(m)) throw NumericError("softmax_rows: row has no admissible entry");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (out[j] = std::exp(in[j] - m));
    for (std::size_t j = 0; j < n; ++j) out[j] /= z;
  }
  return y;
}

namespace {

// 0.5 x (1 + tanh(u)) == x * sigmoid(2u)
double gelu_gate(double x) noexcept { return 1.0 / (1.0 + std::exp(-2.0 * kGeluC * (x + kGeluA * x * x * x))); }

double gelu_derivative_from_gate(double x, double s) noexcept {
  return s + 2.0 * x * s * (1.0 - s) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

}  // namespace

double gelu(double x) noexcept { return x * gelu_gate(x); }

double gelu_derivative(double x) noexcept { return gelu_derivative_from_gate(x, gelu_gate(x)); }

Var matmul(const Var& a, const Var& b) {
  Tensor out = matmul(a.value(), b.value());
  return make_op(std::move(out), "matmul", {a, b}, [](detail::Node& self) {
    const Tensor& av = self.parents[0]->value();
    const Tensor& bv = self.parents[1]->value();
    const auto g = view(self.grad, self.grad.rows(), self.grad.cols());
    if (needs(self, 0)) {
      view(grad_of(self, 0), av.rows(), av.cols()).noalias() += g * view(bv, bv.rows(), bv.cols()).transpose();
    }
    if (needs(self, 1)) {
      view(grad_of(self, 1), bv.rows(), bv.cols()).noalias() += view(av, av.rows(), av.cols()).transpose() * g;
    }
  });
}

Var matmul_transposed(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul_transposed");
  require_matrix(bv, "matmul_transposed");
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_transposed: " + shape_str(av.shape()) + " x " + shape_str(bv.shape()) + "^T");
  }
  Tensor out({av.rows(), bv.rows()});
  view(out, out.rows(), out.cols()).noalias() =
      view(av, av.rows(), av.cols()) * view(bv, bv.rows(), bv.cols()).transpose();
  return make_op(std::move(out), "matmul_transposed", {a, b}, [](detail::Node& self) {
    const Tensor& av = self.parents[0]->value();
    const Tensor& bv = self.parents[1]->value();
    const auto g = view(self.grad, self.grad.rows(), self.grad.cols());
    if (needs(self, 0)) {
      view(grad_of(self, 0), av.rows(), av.cols()).noalias() += g * view(bv, bv.rows(), bv.cols());
    }
    if (needs(self, 1)) {
      view(grad_of(self, 1), bv.rows(), bv.cols()).noalias() += g.transpose() * view(av, av.rows(), av.cols());
    }
  });
}

Var add(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor out = a.value();
  out += b.value();
  return make_op(std::move(out), "add", {a, b}, [](detail::Node& self) {
    if (needs(self, 0)) grad_of(self, 0) += self.grad;
    if (needs(self, 1)) grad_of(self, 1) += self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op(std::move(out), "mul", {a, b}, [](detail::Node& self) {
    const Tensor& av = self.parents[0]->value();
    const Tensor& bv = self.parents[1]->value();
    if (needs(self, 0)) {
      Tensor& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (needs(self, 1)) {
      Tensor& g = grad_of(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return make_op(std::move(out), "scale", {x}, [factor](detail::Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_op(Tensor::scalar(s), "sum", {x}, [](detail::Node& self) {
    Tensor& g = grad_of(self, 0);
    const double d = self.grad[0];
    for (double& v : g.data()) v += d;
  });
}

namespace {

Var linear_impl(const Var& x, const Var& weight, const Var* bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  if (wv.rank() != 2 || xv.cols() != wv.rows()) {
    throw DimensionError("linear: input " + shape_str(xv.shape()) + " vs weight " + shape_str(wv.shape()));
  }
  const std::size_t n = xv.rows(), din = wv.rows(), dout = wv.cols();
  if (bias && bias->value().size() != dout) {
    throw DimensionError("linear: bias " + shape_str(bias->value().shape()) + " for output width " +
                         std::to_string(dout));
  }
  Tensor out(with_last(xv.shape(), dout));
  auto y = view(out, n, dout);
  y.noalias() = view(xv, n, din) * view(wv, din, dout);
  if (bias) {
    const auto b = view(bias->value(), 1, dout);
    y.rowwise() += b.row(0);
  }
  auto backward = [n, din, dout](detail::Node& self) {
    const auto g = view(self.grad, n, dout);
    if (needs(self, 0)) {
      view(grad_of(self, 0), n, din).noalias() += g * view(self.parents[1]->value(), din, dout).transpose();
    }
    if (needs(self, 1)) {
      view(grad_of(self, 1), din, dout).noalias() += view(self.parents[0]->value(), n, din).transpose() * g;
    }
    if (self.parents.size() > 2 && needs(self, 2)) {
      view(grad_of(self, 2), 1, dout).row(0) += g.colwise().sum();
    }
  };
  if (bias) return make_op(std::move(out), "linear", {x, weight, *bias}, backward);
  return make_op(std::move(out), "linear", {x, weight}, backward);
}

}  // namespace

Var linear(const Var& x, const Var& weight) { return linear_impl(x, weight, nullptr); }
Var linear(const Var& x, const Var& weight, const Var& bias) { return linear_impl(x, weight, &bias); }

Var linear(const Var& x, const LinearParams& p) {
  if (p.bias) return linear(x, Var::of(*p.weight), Var::of(*p.bias));
  return linear(x, Var::of(*p.weight));
}

Var gelu(const Var& x) {
  Tensor out(x.shape());
  const Tensor& xv = x.value();
  if (!(Tape::active() && x.requires_grad())) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu(xv[i]);
    return make_op(std::move(out), "gelu", {x}, nullptr);
  }
  auto deriv = std::make_shared<Tensor>(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = gelu_gate(xv[i]);
    out[i] = xv[i] * s;
    (*deriv)[i] = gelu_derivative_from_gate(xv[i], s);
  }
  return make_op(std::move(out), "gelu", {x}, [deriv](detail::Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*deriv)[i];
  });
}

Var softmax_rows(const Var& x) {
  Tensor out = softmax_rows(x.value());
  return make_op(std::move(out), "softmax_rows", {x}, [](detail::Node& self) {
    const Tensor& y = self.owned;
    Tensor& g = grad_of(self, 0);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row(r);
      auto dy = self.grad.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t j = 0; j < yr.size(); ++j) dot += yr[j] * dy[j];
      for (std::size_t j = 0; j < yr.size(); ++j) gr[j] += yr[j] * (dy[j] - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  if (d < 2) throw ConfigError("layer_norm needs at least 2 features, got " + std::to_string(d));
  if (gain.value().size() != d || bias.value().size() != d) {
    throw DimensionError("layer_norm: affine parameters do not match width " + std::to_string(d));
  }
  const std::size_t n = xv.rows();
  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  Tensor inv_std({n});
  const auto gv = gain.value().data();
  const auto bv = bias.value().data();
  for (std::size_t r = 0; r < n; ++r) {
    auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    auto xh = xhat.row(r);
    auto o = out.row(r);
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (in[j] - mean) * inv;
      o[j] = gv[j] * xh[j] + bv[j];
    }
  }
  return make_op(std::move(out), "layer_norm", {x, gain, bias},
                 [xhat = std::move(xhat), inv_std = std::move(inv_std), n, d](detail::Node& self) {
                   const auto gv = self.parents[1]->value().data();
                   const bool gx = needs(self, 0), gg = needs(self, 1), gb = needs(self, 2);
                   std::vector<double> dxhat(d);
                   for (std::size_t r = 0; r < n; ++r) {
                     auto dy = self.grad.row(r);
                     auto xh = xhat.row(r);
                     if (gg) {
                       auto dg = grad_of(self, 1).data();
                       for (std::size_t j = 0; j < d; ++j) dg[j] += dy[j] * xh[j];
                     }
                     if (gb) {
                       auto db = grad_of(self, 2).data();
                       for (std::size_t j = 0; j < d; ++j) db[j] += dy[j];
                     }
                     if (!gx) continue;
                     double m1 = 0.0, m2 = 0.0;
                     for (std::size_t j = 0; j < d; ++j) {
                       dxhat[j] = dy[j] * gv[j];
                       m1 += dxhat[j];
                       m2 += dxhat[j] * xh[j];
                     }
                     m1 /= static_cast<double>(d);
                     m2 /= static_cast<double>(d);
                     auto dx = grad_of(self, 0).row(r);
                     for (std::size_t j = 0; j < d; ++j) dx[j] += inv_std[r] * (dxhat[j] - m1 - xh[j] * m2);
                   }
                 });
}

Var layer_norm(const Var& x, const LayerNormParams& p, double eps) {
  return layer_norm(x, Var::of(*p.gain), Var::of(*p.bias), eps);
}

Var embedding(const Var& table, std::span<const std::int32_t> ids) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw DimensionError("embedding table must be a matrix");
  const std::size_t d = tv.cols();
  Tensor out({ids.size(), d});
  std::vector<std::size_t> rows(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= tv.rows()) {
      throw InputError("token id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(tv.rows()) + " rows");
    }
    rows[i] = static_cast<std::size_t>(ids[i]);
    std::copy_n(tv.row(rows[i]).begin(), d, out.row(i).begin());
  }
  return make_op(std::move(out), "embedding", {table}, [rows = std::move(rows), d](detail::Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto src = self.grad.row(i);
      auto dst = g.row(rows[i]);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var gather_rows(const Var& x, std::span<const std::size_t> rows) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= xv.rows()) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(xv.row(rows[i]).begin(), d, out.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_op(std::move(out), "gather_rows", {x}, [idx = std::move(idx), d](detail::Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto src = self.grad.row(i);
      auto dst = g.row(idx[i]);
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) throw DimensionError("concat_cols: row counts differ");
  const std::size_t n = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out({n, ca + cb});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(av.row(r).begin(), ca, out.row(r).begin());
    std::copy_n(bv.row(r).begin(), cb, out.row(r).begin() + static_cast<std::ptrdiff_t>(ca));
  }
  return make_op(std::move(out), "concat_cols", {a, b}, [n, ca, cb](detail::Node& self) {
    for (std::size_t r = 0; r < n; ++r) {
      auto src = self.grad.row(r);
      if (needs(self, 0)) {
        auto dst = grad_of(self, 0).row(r);
        for (std::size_t j = 0; j < ca; ++j) dst[j] += src[j];
      }
      if (needs(self, 1)) {
        auto dst = grad_of(self, 1).row(r);
        for (std::size_t j = 0; j < cb; ++j) dst[j] += src[ca + j];
      }
    }
  });
}

Var dropout(const Var& x, double rate, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const Tensor& xv = x.value();
  Tensor mask(xv.shape());
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep;
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return make_op(std::move(out), "dropout", {x}, [mask = std::move(mask)](detail::Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

Var cross_entropy(const Var& logits, std::span<const std::int32_t> targets, std::int32_t pad_id) {
  const Tensor& lv = logits.value();
  const std::size_t t = lv.rows(), v = lv.cols();
  if (targets.size() != t) {
    throw DimensionError("cross_entropy: " + std::to_string(t) + " logit rows for " +
                         std::to_string(targets.size()) + " targets");
  }
  Tensor probs = softmax_rows(lv);
  std::size_t count = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    if (targets[i] == pad_id) continue;
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v) throw InputError("target id out of range");
    auto row = lv.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double x : row) z += std::exp(x - m);
    total += m + std::log(z) - row[static_cast<std::size_t>(targets[i])];
    ++count;
  }
  if (count == 0) throw InputError("cross_entropy: every target is padding");
  std::vector<std::int32_t> tg(targets.begin(), targets.end());
  const double inv = 1.0 / static_cast<double>(count);
  return make_op(Tensor::scalar(total * inv), "cross_entropy", {logits},
                 [probs = std::move(probs), tg = std::move(tg), pad_id, inv](detail::Node& self) {
                   Tensor& g = grad_of(self, 0);
                   const double d = self.grad[0] * inv;
                   for (std::size_t i = 0; i < tg.size(); ++i) {
                     if (tg[i] == pad_id) continue;
                     auto p = probs.row(i);
                     auto gr = g.row(i);
                     for (std::size_t j = 0; j < p.size(); ++j) gr[j] += d * p[j];
                     gr[static_cast<std::size_t>(tg[i])] -= d;
                   }
                 });
}

Var bce_with_logits(const Var& logits, std::span<const std::uint8_t> labels) {
  const Tensor& z = logits.value();
  if (z.size() != labels.size()) throw DimensionError("bce_with_logits: label count mismatch");
  if (labels.empty()) throw InputError("bce_with_logits: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double y = labels[i] ? 1.0 : 0.0;
    total += std::max(z[i], 0.0) - z[i] * y + std::log1p(std::exp(-std::abs(z[i])));
  }
  const double inv = 1.0 / static_cast<double>(z.size());
  std::vector<std::uint8_t> lb(labels.begin(), labels.end());
  return make_op(Tensor::scalar(total * inv), "bce_with_logits", {logits},
                 [lb = std::move(lb), inv](detail::Node& self) {
                   const Tensor& z = self.parents[0]->value();
                   Tensor& g = grad_of(self, 0);
                   const double d = self.grad[0] * inv;
                   for (std::size_t i = 0; i < g.size(); ++i) {
                     const double s = 1.0 / (1.0 + std::exp(-z[i]));
                     g[i] += d * (s - (lb[i] ? 1.0 : 0.0));
                   }
                 });
}

Var ffn_block(const Var& x, const FfnParams& p, double eps, const DropoutCtx* drop) {
  Var h = gelu(linear(x, p.in));
  Var branch = linear(h, p.out);
  if (drop && drop->rate > 0.0) branch = dropout(branch, drop->rate, *drop->rng);
  return layer_norm(add(x, branch), p.norm, eps);
}

}  // namespace tdt
