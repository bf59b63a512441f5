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

#include "tdt/attention.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tdt {

void AttentionConfig::validate() const {
  if (n_heads == 0 || d_model == 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (window != kUnboundedWindow && (window < 2 || window % 2 != 0)) {
    throw ConfigError("window must be an even integer >= 2, got " + std::to_string(window));
  }
}

std::size_t BoolMatrix::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

namespace {

// Inclusive-exclusive admitted column range of a contiguous mask row.
struct Range {
  std::size_t lo;
  std::size_t hi;
};

Range band_range(std::size_t i, std::size_t n, std::size_t window) {
  if (window == kUnboundedWindow) return {0, n};
  const std::size_t half = window / 2;
  return {i > half ? i - half : 0, std::min(n, i + half + 1)};
}

void require_square_band(const MaskSpec& spec, std::size_t n_rows, std::size_t n_cols) {
  if (spec.kind == MaskSpec::Kind::kBand && n_rows != n_cols) {
    throw UsageError("band mask requested for a non-square " + std::to_string(n_rows) + "x" +
                     std::to_string(n_cols) + " score matrix");
  }
}

}  // namespace

BoolMatrix build_mask(const MaskSpec& spec, std::size_t n_rows, std::size_t n_cols) {
  if (n_rows == 0 || n_cols == 0) throw UsageError("mask dimensions must be >= 1");
  require_square_band(spec, n_rows, n_cols);
  if (spec.kind == MaskSpec::Kind::kExplicit) {
    if (spec.matrix.rows() != n_rows || spec.matrix.cols() != n_cols) {
      throw DimensionError("explicit mask shape does not match scores");
    }
    return spec.matrix;
  }
  BoolMatrix m(n_rows, n_cols);
  for (std::size_t i = 0; i < n_rows; ++i) {
    Range r{0, n_cols};
    if (spec.kind == MaskSpec::Kind::kBand) r = band_range(i, n_cols, spec.window);
    if (spec.kind == MaskSpec::Kind::kCausal) r = {0, std::min(i + 1, n_cols)};
    for (std::size_t j = r.lo; j < r.hi; ++j) m.set(i, j, true);
  }
  return m;
}

AttentionPattern AttentionPattern::from_mask(const MaskSpec& spec, std::size_t n_rows, std::size_t n_cols) {
  if (n_rows == 0 || n_cols == 0) throw UsageError("attention over an empty sequence");
  require_square_band(spec, n_rows, n_cols);
  AttentionPattern p;
  p.rows_ = n_rows;
  p.cols_ = n_cols;
  p.row_ptr_.reserve(n_rows + 1);
  if (spec.kind == MaskSpec::Kind::kExplicit) {
    if (spec.matrix.rows() != n_rows || spec.matrix.cols() != n_cols) {
      throw DimensionError("explicit mask shape does not match scores");
    }
    for (std::size_t i = 0; i < n_rows; ++i) {
      const std::size_t before = p.cols_list_.size();
      for (std::size_t j = 0; j < n_cols; ++j) {
        if (spec.matrix(i, j)) p.cols_list_.push_back(static_cast<std::uint32_t>(j));
      }
      if (p.cols_list_.size() == before) {
        throw UsageError("attention row " + std::to_string(i) + " admits no column");
      }
      p.row_ptr_.push_back(p.cols_list_.size());
    }
    return p;
  }
  p.first_.reserve(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    Range r{0, n_cols};
    if (spec.kind == MaskSpec::Kind::kBand) r = band_range(i, n_cols, spec.window);
    if (spec.kind == MaskSpec::Kind::kCausal) r = {0, std::min(i + 1, n_cols)};
    p.first_.push_back(r.lo);
    p.row_ptr_.push_back(p.row_ptr_.back() + (r.hi - r.lo));
  }
  return p;
}

std::uint64_t band_popcount(std::size_t n, std::size_t window) noexcept {
  if (window == kUnboundedWindow || window / 2 + 1 >= n) return static_cast<std::uint64_t>(n) * n;
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Range r = band_range(i, n, window);
    total += r.hi - r.lo;
  }
  return total;
}

namespace {

void check_attend_shapes(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t n_heads,
                         const AttentionPattern& pattern) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) throw DimensionError("attend expects matrices");
  const std::size_t d = q.cols();
  if (k.cols() != d || v.cols() != d) throw DimensionError("attend: q/k/v widths differ");
  if (k.rows() != v.rows()) throw DimensionError("attend: key and value counts differ");
  if (n_heads == 0 || d % n_heads != 0) throw ConfigError("attend: width not divisible by heads");
  if (pattern.rows() != q.rows() || pattern.cols() != k.rows()) {
    throw DimensionError("attend: pattern " + std::to_string(pattern.rows()) + "x" +
                         std::to_string(pattern.cols()) + " does not match " + std::to_string(q.rows()) +
                         " queries and " + std::to_string(k.rows()) + " keys");
  }
}

inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s = 0.0;
  for (std::size_t t = 0; t < n; ++t) s += a[t] * b[t];
  return s;
}

}  // namespace

Tensor attention_weights(const Tensor& q, const Tensor& k, std::size_t n_heads,
                         const AttentionPattern& pattern) {
  check_attend_shapes(q, k, k, n_heads, pattern);
  const std::size_t d = q.cols(), dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor w({n_heads, pattern.nnz()});
  for (std::size_t h = 0; h < n_heads; ++h) {
    double* wh = w.ptr() + h * pattern.nnz();
    for (std::size_t i = 0; i < pattern.rows(); ++i) {
      const std::size_t b = pattern.row_begin(i), e = pattern.row_end(i);
      const double* qi = q.ptr() + i * d + h * dh;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t t = b; t < e; ++t) {
        const double s = scale * dot(qi, k.ptr() + pattern.column(i, t) * d + h * dh, dh);
        wh[t] = s;
        m = std::max(m, s);
      }
      double z = 0.0;
      for (std::size_t t = b; t < e; ++t) z += (wh[t] = std::exp(wh[t] - m));
      const double inv = 1.0 / z;
      for (std::size_t t = b; t < e; ++t) wh[t] *= inv;
    }
  }
  return w;
}

Var attend(const Var& q, const Var& k, const Var& v, std::size_t n_heads, const AttentionPattern& pattern,
           OpCounter* counter) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  check_attend_shapes(qv, kv, vv, n_heads, pattern);
  const std::size_t n = qv.rows(), d = qv.cols(), dh = d / n_heads;
  Tensor weights = attention_weights(qv, kv, n_heads, pattern);
  if (counter) counter->add(static_cast<std::uint64_t>(n_heads) * pattern.nnz());

  Tensor out({n, d});
  for (std::size_t h = 0; h < n_heads; ++h) {
    const double* wh = weights.ptr() + h * pattern.nnz();
    for (std::size_t i = 0; i < n; ++i) {
      double* oi = out.ptr() + i * d + h * dh;
      for (std::size_t t = pattern.row_begin(i); t < pattern.row_end(i); ++t) {
        const double a = wh[t];
        const double* vj = vv.ptr() + pattern.column(i, t) * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += a * vj[c];
      }
    }
  }

  return make_op(
      std::move(out), "attend", {q, k, v},
      [weights = std::move(weights), pattern, n_heads, n, d, dh](detail::Node& self) {
        const Tensor& qv = self.parents[0]->value();
        const Tensor& kv = self.parents[1]->value();
        const Tensor& vv = self.parents[2]->value();
        const bool gq = self.parents[0]->requires_grad;
        const bool gk = self.parents[1]->requires_grad;
        const bool gv = self.parents[2]->requires_grad;
        double* dq = gq ? self.parents[0]->grad_buffer().ptr() : nullptr;
        double* dk = gk ? self.parents[1]->grad_buffer().ptr() : nullptr;
        double* dv = gv ? self.parents[2]->grad_buffer().ptr() : nullptr;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<double> da;
        for (std::size_t h = 0; h < n_heads; ++h) {
          const double* wh = weights.ptr() + h * pattern.nnz();
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t b = pattern.row_begin(i), e = pattern.row_end(i);
            const double* go = self.grad.ptr() + i * d + h * dh;
            da.resize(e - b);
            double row_dot = 0.0;
            for (std::size_t t = b; t < e; ++t) {
              const std::size_t j = pattern.column(i, t);
              da[t - b] = dot(go, vv.ptr() + j * d + h * dh, dh);
              row_dot += wh[t] * da[t - b];
              if (gv) {
                double* dvj = dv + j * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) dvj[c] += wh[t] * go[c];
              }
            }
            if (!gq && !gk) continue;
            const double* qi = qv.ptr() + i * d + h * dh;
            for (std::size_t t = b; t < e; ++t) {
              const std::size_t j = pattern.column(i, t);
              const double ds = wh[t] * (da[t - b] - row_dot) * scale;
              if (gq) {
                const double* kj = kv.ptr() + j * d + h * dh;
                double* dqi = dq + i * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
              }
              if (gk) {
                double* dkj = dk + j * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
              }
            }
          }
        }
      });
}

Var multi_head_attention(const Var& q_in, const Var& k_in, const Var& v_in, const AttentionParams& p,
                         const AttentionConfig& cfg, const MaskSpec& mask, OpCounter* counter) {
  cfg.validate();
  if (q_in.value().cols() != cfg.d_model || k_in.value().cols() != cfg.d_model ||
      v_in.value().cols() != cfg.d_model) {
    throw DimensionError("multi_head_attention: inputs must have width d_model = " + std::to_string(cfg.d_model));
  }
  const AttentionPattern pattern = AttentionPattern::from_mask(mask, q_in.value().rows(), k_in.value().rows());
  Var q = linear(q_in, p.query);
  Var k = linear(k_in, p.key);
  Var v = linear(v_in, p.value);
  return linear(attend(q, k, v, cfg.n_heads, pattern, counter), p.output);
}

Var local_self_attention(const Var& x, const AttentionParams& p, const AttentionConfig& cfg, OpCounter* counter) {
  cfg.validate();
  const MaskSpec mask = cfg.window == kUnboundedWindow ? MaskSpec::full() : MaskSpec::band(cfg.window);
  return multi_head_attention(x, x, x, p, cfg, mask, counter);
}

Var cross_attention_topdown(const Var& tokens, const Var& segments, const CrossAttentionParams& p,
                            const AttentionConfig& cfg, OpCounter* counter) {
  if (segments.value().rows() == 0 || segments.value().size() == 0) {
    throw UsageError("cross_attention_topdown needs at least one segment");
  }
  Var branch = multi_head_attention(tokens, segments, segments, p.attn, cfg, MaskSpec::full(), counter);
  return add(tokens, layer_norm(branch, p.norm, kLayerNormEps));
}

ScoreBudget count_budget(std::size_t n_tokens, std::size_t window, std::size_t n_segments) noexcept {
  return {band_popcount(n_tokens, window), static_cast<std::uint64_t>(n_segments) * n_segments,
          static_cast<std::uint64_t>(n_tokens) * n_segments};
}

}  // namespace tdt
