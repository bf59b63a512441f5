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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tdt {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  friend bool operator==(const RougeScore&, const RougeScore&) = default;
};

/// Lowercased whitespace tokens.
std::vector<std::string> rouge_tokenize(std::string_view text);

/// Clipped n-gram overlap; an empty side scores zero. n must be >= 1.
RougeScore rouge_n(std::span<const std::string> ref, std::span<const std::string> hyp, std::size_t n);
RougeScore rouge_n(std::span<const std::int32_t> ref, std::span<const std::int32_t> hyp, std::size_t n);

/// Sentence-level LCS score.
RougeScore rouge_l(std::span<const std::string> ref, std::span<const std::string> hyp);
RougeScore rouge_l(std::span<const std::int32_t> ref, std::span<const std::int32_t> hyp);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct RougeReport {
  RougeScore r1, r2, rl;
};

RougeReport rouge(std::string_view ref, std::string_view hyp);

}  // namespace tdt
