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

#include <cstdint>
#include <span>

#include "tdt/autodiff.hpp"
#include "tdt/rng.hpp"

namespace tdt {

/// LayerNorm epsilon used by every model sublayer.
inline constexpr double kLayerNormEps = 1e-5;

// Plain tensor kernels (no gradient recording).

/// [m x k] * [k x n]; throws DimensionError when inner extents differ.
Tensor matmul(const Tensor& a, const Tensor& b);
/// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& x);

/// GELU, tanh approximation.
double gelu(double x) noexcept;
double gelu_derivative(double x) noexcept;

// Differentiable operations. Each returns a node recorded on the active
// tape when any input requires a gradient.

Var matmul(const Var& a, const Var& b);
/// a [m x k] times the transpose of b [n x k].
Var matmul_transposed(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
/// Elementwise product of equally shaped operands.
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double factor);
/// Sum of all elements, as a scalar.
Var sum(const Var& x);
/// x W (+ b) along the last axis of x.
Var linear(const Var& x, const Var& weight);
Var linear(const Var& x, const Var& weight, const Var& bias);
Var gelu(const Var& x);
Var softmax_rows(const Var& x);
/// Normalizes each row over the last axis; eps sits inside the square root.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps);
/// Rows of `table` selected by ids; ids must be < table rows.
Var embedding(const Var& table, std::span<const std::int32_t> ids);
Var gather_rows(const Var& x, std::span<const std::size_t> rows);
/// [n x a] ++ [n x b] -> [n x (a+b)]
Var concat_cols(const Var& a, const Var& b);
/// Inverted dropout; the identity when rate == 0.
Var dropout(const Var& x, double rate, RngStream& rng);
/// Mean token negative log-likelihood over targets != pad_id.
Var cross_entropy(const Var& logits, std::span<const std::int32_t> targets, std::int32_t pad_id);
/// Mean binary cross-entropy of per-row logits ([n] or [n x 1]) against 0/1 labels.
Var bce_with_logits(const Var& logits, std::span<const std::uint8_t> labels);

struct LinearParams {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;  // optional
};

Var linear(const Var& x, const LinearParams& p);

struct LayerNormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;
};

Var layer_norm(const Var& x, const LayerNormParams& p, double eps);

struct FfnParams {
  LinearParams in;   // d -> hidden
  LinearParams out;  // hidden -> d
  LayerNormParams norm;
};

struct DropoutCtx {
  double rate = 0.0;
  RngStream* rng = nullptr;
};

/// Post-norm feed-forward sublayer: LayerNorm(x + W2 GELU(W1 x + b1) + b2).
Var ffn_block(const Var& x, const FfnParams& p, double eps = kLayerNormEps,
              const DropoutCtx* drop = nullptr);

}  // namespace tdt
