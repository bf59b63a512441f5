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
#include <unordered_set>
#include <vector>

#include "tdt/ops.hpp"

namespace tdt {

/// Fixed-length overlapping windows over the token axis. Windows that run
/// past the end are right-padded with zero vectors.
struct SegmentationSpec {
  std::size_t kernel = 32;
  std::size_t stride = 24;

  /// Throws ConfigError unless 1 <= stride <= kernel.
  void validate() const;
  /// 1 if n <= kernel, else ceil((n - kernel) / stride) + 1.
  std::size_t num_segments(std::size_t n_tokens) const;
};

struct SegmentSpan {
  std::size_t start = 0;
  std::size_t length = 0;  // always the kernel size
  std::size_t valid = 0;   // slots that hold real tokens; the rest is padding
  friend bool operator==(const SegmentSpan&, const SegmentSpan&) = default;
};

std::vector<SegmentSpan> segment_index_map(std::size_t n_tokens, const SegmentationSpec& spec);

/// Segment j = (1/kernel) * sum of its window's token rows; padding adds zero.
Var pool_average(const Var& tokens, const SegmentationSpec& spec);

/// Segment j = softmax-weighted sum of its window's real tokens, with the
/// softmax over `weights` restricted to that window.
Var pool_weighted(const Var& tokens, std::span<const double> weights, const SegmentationSpec& spec);

using ImportanceLabels = std::vector<std::uint8_t>;
using ImportanceWeights = std::vector<double>;

/// Lowercases, then applies one of sses->ss, ies->i, or trailing-s removal
/// (length > 3), then strips ing/ed when at least three characters remain.
std::string stem(std::string_view word);

/// Built-in list of 50 English function words.
const std::unordered_set<std::string>& default_stopwords();
/// One word per line; blank lines ignored; entries are lowercased.
std::unordered_set<std::string> load_stopwords(const std::string& path);

/// label[i] = 1 iff stem(doc[i]) occurs among the stemmed reference words
/// and lowercase(doc[i]) is not a stopword.
ImportanceLabels build_importance_labels(std::span<const std::string> doc_tokens,
                                         std::span<const std::string> ref_tokens,
                                         const std::unordered_set<std::string>& stopwords);

/// hi for important tokens, lo otherwise. Requires hi > lo.
ImportanceWeights labels_to_weights(std::span<const std::uint8_t> labels, double hi = 1.0, double lo = 0.0);

/// Label files: one document per line, whitespace-separated 0/1 values.
std::vector<ImportanceLabels> read_label_file(const std::string& path);
void write_label_file(const std::string& path, std::span<const ImportanceLabels> docs);

}  // namespace tdt
