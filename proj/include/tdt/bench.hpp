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
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "tdt/model.hpp"
#include "tdt/tasks.hpp"

namespace tdt {

/// full: N1 + N3 full-attention token layers, no segments.
/// local: the bottom-up stack alone (topdown none).
/// cross / concat: the complete encoder with that top-down update.
enum class BenchVariant { kFull, kLocal, kCross, kConcat };

std::string to_string(BenchVariant v);
BenchVariant parse_bench_variant(const std::string& s);

/// Encoder configuration a variant is measured with.
ModelConfig bench_model_config(BenchVariant v, const ModelConfig& base, std::size_t window);

/// Closed-form score evaluations of one encoder forward, summed over heads.
std::uint64_t expected_score_evals(BenchVariant v, const ModelConfig& base, std::size_t n_tokens,
                                   std::size_t window);

struct BenchGrid {
  std::vector<std::size_t> n_tokens = {128, 256, 512, 1024};
  std::vector<std::size_t> windows = {8, 32, 64};
  std::vector<BenchVariant> variants = {BenchVariant::kFull, BenchVariant::kLocal, BenchVariant::kCross,
                                        BenchVariant::kConcat};
  std::size_t trials = 3;
  std::uint64_t seed = 0;
  ModelConfig base = default_base();

  /// Desk widths with the full-size segmentation (k = 32, d_s = 24).
  static ModelConfig default_base();
};

struct BenchRecord {
  std::string variant;
  std::size_t n_tokens = 0;
  std::size_t window = 0;
  std::size_t n_segments = 0;
  std::uint64_t score_evals = 0;
  double wall_ms_median = 0.0;
  std::uint64_t peak_bytes = 0;
  std::uint64_t seed = 0;
  double wall_ms_min = 0.0;
  double wall_ms_max = 0.0;
  bool failed = false;
  std::string error;
  friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

/// One record per (variant, window, N) cell. Throws if a measured counter
/// disagrees with expected_score_evals.
std::vector<BenchRecord> bench_sweep(const BenchGrid& grid);

/// Peak tracked bytes of one inference encode, relative to the bytes live before it.
std::uint64_t measure_encode_peak(Model& model, std::span<const std::int32_t> ids);

std::string bench_to_csv(const std::vector<BenchRecord>& records);
std::vector<BenchRecord> bench_from_csv(const std::string& text);
nlohmann::json bench_to_json(const std::vector<BenchRecord>& records);
std::vector<BenchRecord> bench_from_json(const nlohmann::json& j);

struct AblationConfig {
  KeyValueRecipe recipe;
  std::vector<TopDownMode> variants = {TopDownMode::kCross, TopDownMode::kConcat, TopDownMode::kNone};
  std::vector<std::size_t> windows = {4, 8, 16};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct AblationCell {
  TopDownMode variant = TopDownMode::kCross;
  std::size_t window = 0;
  std::vector<double> accuracies;  // one per seed
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  friend bool operator==(const AblationCell&, const AblationCell&) = default;
};

struct AblationTable {
  std::vector<AblationCell> cells;  // variant-major, windows ascending
  double chance = 0.0;
  /// Per variant: mean accuracy never decreases as the window grows.
  std::map<std::string, bool> window_monotone;
  bool window_monotone_all = false;
  /// cross >= concat >= none on the mean at every window.
  bool ordering_cross_concat_none = false;

  const AblationCell& cell(TopDownMode variant, std::size_t window) const;
  nlohmann::json to_json() const;
  friend bool operator==(const AblationTable&, const AblationTable&) = default;
};

/// Trains every (variant, window, seed) combination under the recipe.
AblationTable ablate(const AblationConfig& cfg);
/// Fills means, deviations and the trend flags from per-seed accuracies.
void summarize(AblationTable& table);

}  // namespace tdt
