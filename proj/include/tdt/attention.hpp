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

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "tdt/ops.hpp"

namespace tdt {

/// Window value meaning "no locality restriction".
inline constexpr std::size_t kUnboundedWindow = std::numeric_limits<std::size_t>::max();

struct AttentionConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  /// Total neighborhood width: w/2 tokens on each side plus the token itself.
  std::size_t window = kUnboundedWindow;

  std::size_t head_dim() const noexcept { return d_model / n_heads; }
  /// Throws ConfigError unless heads divide d_model and a finite window is even and >= 2.
  void validate() const;
};

/// Dense boolean admissibility matrix.
class BoolMatrix {
 public:
  BoolMatrix() = default;
  BoolMatrix(std::size_t rows, std::size_t cols, bool fill = false)
      : rows_(rows), cols_(cols), cells_(rows * cols, fill ? 1 : 0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const noexcept { return cells_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) noexcept { cells_[r * cols_ + c] = v ? 1 : 0; }
  std::size_t popcount() const noexcept;
  friend bool operator==(const BoolMatrix&, const BoolMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct MaskSpec {
  enum class Kind { kFull, kBand, kCausal, kExplicit };

  static MaskSpec full() { return {Kind::kFull, 0, {}}; }
  static MaskSpec band(std::size_t window) { return {Kind::kBand, window, {}}; }
  static MaskSpec causal() { return {Kind::kCausal, 0, {}}; }
  static MaskSpec explicit_mask(BoolMatrix m) { return {Kind::kExplicit, 0, std::move(m)}; }

  Kind kind = Kind::kFull;
  std::size_t window = 0;
  BoolMatrix matrix;
};

/// Materializes the mask. Only meant for small sizes and test oracles; the
/// attention kernels never build it.
BoolMatrix build_mask(const MaskSpec& spec, std::size_t n_rows, std::size_t n_cols);

/// Counts query-key dot products. Not thread-safe; use one per thread.
class OpCounter {
 public:
  void add(std::uint64_t n) noexcept { score_evals_ += n; }
  void reset() noexcept { score_evals_ = 0; }
  std::uint64_t score_evals() const noexcept { return score_evals_; }

 private:
  std::uint64_t score_evals_ = 0;
};

/// Admitted (row, column) pairs in compressed-row form. Full, band and
/// causal masks keep one contiguous column range per row; explicit masks
/// keep column lists.
class AttentionPattern {
 public:
  static AttentionPattern from_mask(const MaskSpec& spec, std::size_t n_rows, std::size_t n_cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return row_ptr_.back(); }
  std::size_t row_begin(std::size_t r) const noexcept { return row_ptr_[r]; }
  std::size_t row_end(std::size_t r) const noexcept { return row_ptr_[r + 1]; }
  std::size_t column(std::size_t r, std::size_t e) const noexcept {
    return cols_list_.empty() ? first_[r] + (e - row_ptr_[r]) : cols_list_[e];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> first_;
  std::vector<std::uint32_t> cols_list_;
};

/// Number of admitted pairs of band(w) over n tokens; n*n for an unbounded window.
std::uint64_t band_popcount(std::size_t n, std::size_t window) noexcept;

struct AttentionParams {
  LinearParams query;
  LinearParams key;
  LinearParams value;
  LinearParams output;
};

struct CrossAttentionParams {
  AttentionParams attn;
  LayerNormParams norm;
};

/// Scaled dot-product attention over already-projected q [n x d],
/// k [m x d], v [m x d], split into n_heads heads and concatenated back.
/// Only admitted pairs are scored; the counter grows by heads * nnz.
Var attend(const Var& q, const Var& k, const Var& v, std::size_t n_heads,
           const AttentionPattern& pattern, OpCounter* counter);

/// Softmax weights of the admitted pairs, laid out [head][nnz] as in `attend`.
Tensor attention_weights(const Tensor& q, const Tensor& k, std::size_t n_heads,
                         const AttentionPattern& pattern);

/// Project, attend under `mask`, concatenate heads and project the output.
Var multi_head_attention(const Var& q_in, const Var& k_in, const Var& v_in, const AttentionParams& p,
                         const AttentionConfig& cfg, const MaskSpec& mask, OpCounter* counter);

/// multi_head_attention(x, x, x, band(cfg.window)) without forming the
/// n x n score matrix. An unbounded window gives full self-attention.
Var local_self_attention(const Var& x, const AttentionParams& p, const AttentionConfig& cfg,
                         OpCounter* counter);

/// Token-to-segment correction: e + LayerNorm(W_o concat_h(sum_j a_ij f_v(s_j))).
Var cross_attention_topdown(const Var& tokens, const Var& segments, const CrossAttentionParams& p,
                            const AttentionConfig& cfg, OpCounter* counter);

/// Per-head score evaluations predicted for one layer of each attention kind.
struct ScoreBudget {
  std::uint64_t local = 0;    // band popcount
  std::uint64_t segment = 0;  // M^2
  std::uint64_t cross = 0;    // N * M
  friend bool operator==(const ScoreBudget&, const ScoreBudget&) = default;
};

ScoreBudget count_budget(std::size_t n_tokens, std::size_t window, std::size_t n_segments) noexcept;

}  // namespace tdt
