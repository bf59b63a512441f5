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
#include "tdt/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <new>
#include <sstream>

#include "tdt/common.hpp"

namespace tdt {
namespace {

constexpr const char* kCsvHeader = "variant,N,w,M,score_evals,wall_ms_median,peak_bytes,seed";

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& field, const std::string& what) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw InputError("bench csv: bad " + what + " '" + field + "'");
  }
  return value;
}

std::string window_field(std::size_t w) { return w == kUnboundedWindow ? "inf" : std::to_string(w); }

std::size_t parse_window_field(const std::string& s) {
  return s == "inf" ? kUnboundedWindow : parse_number<std::size_t>(s, "window");
}

std::vector<std::int32_t> bench_tokens(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  RngStream rng = RngStream(seed).split(n);
  std::vector<std::int32_t> ids(n);
  for (auto& id : ids) id = kFirstTaskToken + static_cast<std::int32_t>(rng.below(vocab - kFirstTaskToken));
  return ids;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::string to_string(BenchVariant v) {
  switch (v) {
    case BenchVariant::kFull: return "full";
    case BenchVariant::kLocal: return "local";
    case BenchVariant::kCross: return "cross";
    case BenchVariant::kConcat: return "concat";
  }
  return "?";
}

BenchVariant parse_bench_variant(const std::string& s) {
  if (s == "full") return BenchVariant::kFull;
  if (s == "local") return BenchVariant::kLocal;
  if (s == "cross") return BenchVariant::kCross;
  if (s == "concat") return BenchVariant::kConcat;
  throw ConfigError("unknown bench variant '" + s + "' (expected full, local, cross or concat)");
}

ModelConfig BenchGrid::default_base() {
  ModelConfig cfg = ModelConfig::desk_preset();
  cfg.kernel = 32;
  cfg.stride = 24;
  return cfg;
}

ModelConfig bench_model_config(BenchVariant v, const ModelConfig& base, std::size_t window) {
  ModelConfig cfg = base;
  cfg.window = window;
  switch (v) {
    case BenchVariant::kFull:
      cfg.window = kUnboundedWindow;
      cfg.n_bottom_up = base.n_bottom_up + base.n_top_down;
      cfg.topdown = TopDownMode::kNone;
      break;
    case BenchVariant::kLocal:
      cfg.topdown = TopDownMode::kNone;
      break;
    case BenchVariant::kCross:
      cfg.topdown = TopDownMode::kCross;
      break;
    case BenchVariant::kConcat:
      cfg.topdown = TopDownMode::kConcat;
      break;
  }
  cfg.pooling = PoolingMode::kAvg;
  return cfg;
}

std::uint64_t expected_score_evals(BenchVariant v, const ModelConfig& base, std::size_t n_tokens,
                                   std::size_t window) {
  const std::uint64_t n = n_tokens;
  const std::uint64_t m = base.segmentation().num_segments(n_tokens);
  const std::uint64_t band = band_popcount(n_tokens, window);
  std::uint64_t per_head = 0;
  switch (v) {
    case BenchVariant::kFull:
      per_head = (base.n_bottom_up + base.n_top_down) * n * n;
      break;
    case BenchVariant::kLocal:
      per_head = base.n_bottom_up * band;
      break;
    case BenchVariant::kCross:
      per_head = base.n_bottom_up * band + base.n_segment * m * m + base.n_top_down * (band + n * m);
      break;
    case BenchVariant::kConcat:
      per_head = base.n_bottom_up * band + base.n_segment * m * m + base.n_top_down * band;
      break;
  }
  return per_head * base.n_heads;
}

std::uint64_t measure_encode_peak(Model& model, std::span<const std::int32_t> ids) {
  const std::size_t before = MemoryStats::current();
  MemoryStats::reset_peak();
  { const Var out = model.encode(ids, nullptr, nullptr); }
  return MemoryStats::peak() - before;
}

std::vector<BenchRecord> bench_sweep(const BenchGrid& grid) {
  if (grid.n_tokens.empty() || grid.windows.empty() || grid.variants.empty()) {
    throw ConfigError("bench grid needs at least one N, window and variant");
  }
  if (grid.trials < 3) throw ConfigError("bench needs at least 3 trials per cell");
  const std::size_t max_n = *std::max_element(grid.n_tokens.begin(), grid.n_tokens.end());
  std::vector<BenchRecord> out;
  for (BenchVariant variant : grid.variants) {
    // The full variant ignores the window, so it is measured once.
    const std::vector<std::size_t> windows =
        variant == BenchVariant::kFull ? std::vector<std::size_t>{kUnboundedWindow} : grid.windows;
    for (std::size_t w : windows) {
      ModelConfig cfg = bench_model_config(variant, grid.base, w);
      cfg.max_positions = std::max(cfg.max_positions, max_n);
      Model model(cfg, grid.seed);
      for (std::size_t n : grid.n_tokens) {
        BenchRecord rec;
        rec.variant = to_string(variant);
        rec.n_tokens = n;
        rec.window = w;
        rec.n_segments = variant == BenchVariant::kCross || variant == BenchVariant::kConcat
                             ? cfg.segmentation().num_segments(n)
                             : 0;
        rec.seed = grid.seed;
        try {
          const auto ids = bench_tokens(n, cfg.vocab_size, grid.seed);
          OpCounter counter;
          { const Var warm = model.encode(ids, nullptr, &counter); }
          rec.score_evals = counter.score_evals();
          const std::uint64_t expected = expected_score_evals(variant, grid.base, n, w);
          if (rec.score_evals != expected) {
            throw Error("bench: " + rec.variant + " N=" + std::to_string(n) + " counted " +
                        std::to_string(rec.score_evals) + " score evaluations, expected " + std::to_string(expected));
          }
          std::vector<double> times;
          for (std::size_t t = 0; t < grid.trials; ++t) {
            const auto t0 = std::chrono::steady_clock::now();
            { const Var y = model.encode(ids, nullptr, nullptr); }
            times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
          }
          rec.wall_ms_median = median(times);
          rec.wall_ms_min = *std::min_element(times.begin(), times.end());
          rec.wall_ms_max = *std::max_element(times.begin(), times.end());
          rec.peak_bytes = measure_encode_peak(model, ids);
        } catch (const std::bad_alloc&) {
          rec.failed = true;
          rec.error = "out of memory";
        }
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

std::string bench_to_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : records) {
    os << r.variant << ',' << r.n_tokens << ',' << window_field(r.window) << ',' << r.n_segments << ','
       << r.score_evals << ',' << (r.failed ? std::string("failed") : format_double(r.wall_ms_median)) << ','
       << r.peak_bytes << ',' << r.seed << '\n';
  }
  return os.str();
}

std::vector<BenchRecord> bench_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InputError("bench csv: missing or unexpected header");
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string field; std::getline(ls, field, ',');) f.push_back(field);
    if (f.size() != 8) throw InputError("bench csv: expected 8 fields, got " + std::to_string(f.size()));
    BenchRecord r;
    r.variant = f[0];
    r.n_tokens = parse_number<std::size_t>(f[1], "N");
    r.window = parse_window_field(f[2]);
    r.n_segments = parse_number<std::size_t>(f[3], "M");
    r.score_evals = parse_number<std::uint64_t>(f[4], "score_evals");
    if (f[5] == "failed") {
      r.failed = true;
    } else {
      r.wall_ms_median = parse_number<double>(f[5], "wall_ms_median");
    }
    r.peak_bytes = parse_number<std::uint64_t>(f[6], "peak_bytes");
    r.seed = parse_number<std::uint64_t>(f[7], "seed");
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json bench_to_json(const std::vector<BenchRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json j = {{"variant", r.variant},
                        {"N", r.n_tokens},
                        {"M", r.n_segments},
                        {"score_evals", r.score_evals},
                        {"wall_ms_median", r.wall_ms_median},
                        {"wall_ms_min", r.wall_ms_min},
                        {"wall_ms_max", r.wall_ms_max},
                        {"peak_bytes", r.peak_bytes},
                        {"seed", r.seed},
                        {"failed", r.failed}};
    if (r.window == kUnboundedWindow) {
      j["w"] = "inf";
    } else {
      j["w"] = r.window;
    }
    if (!r.error.empty()) j["error"] = r.error;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<BenchRecord> bench_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw InputError("bench json: expected an array of records");
  std::vector<BenchRecord> out;
  try {
    for (const auto& e : j) {
      BenchRecord r;
      r.variant = e.at("variant").get<std::string>();
      r.n_tokens = e.at("N").get<std::size_t>();
      const auto& w = e.at("w");
      r.window = w.is_string() ? parse_window_field(w.get<std::string>()) : w.get<std::size_t>();
      r.n_segments = e.at("M").get<std::size_t>();
      r.score_evals = e.at("score_evals").get<std::uint64_t>();
      r.wall_ms_median = e.at("wall_ms_median").get<double>();
      r.wall_ms_min = e.at("wall_ms_min").get<double>();
      r.wall_ms_max = e.at("wall_ms_max").get<double>();
      r.peak_bytes = e.at("peak_bytes").get<std::uint64_t>();
      r.seed = e.at("seed").get<std::uint64_t>();
      r.failed = e.at("failed").get<bool>();
      r.error = e.value("error", std::string());
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("bench json: ") + ex.what());
  }
  return out;
}

const AblationCell& AblationTable::cell(TopDownMode variant, std::size_t window) const {
  for (const auto& c : cells)
    if (c.variant == variant && c.window == window) return c;
  throw UsageError("ablation table has no cell " + to_string(variant) + " w=" + std::to_string(window));
}

void summarize(AblationTable& table) {
  std::map<std::string, std::vector<double>> means_by_variant;
  for (auto& c : table.cells) {
    const double n = static_cast<double>(c.accuracies.size());
    c.mean = 0.0;
    for (double a : c.accuracies) c.mean += a;
    c.mean = n > 0 ? c.mean / n : 0.0;
    double ss = 0.0;
    for (double a : c.accuracies) ss += (a - c.mean) * (a - c.mean);
    c.sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  std::map<std::string, std::map<std::size_t, double>> by_window;
  for (const auto& c : table.cells) by_window[to_string(c.variant)][c.window] = c.mean;
  table.window_monotone.clear();
  for (const auto& [name, row] : by_window)
    for (const auto& [w, mean] : row) means_by_variant[name].push_back(mean);
  table.window_monotone_all = !means_by_variant.empty();
  for (const auto& [name, means] : means_by_variant) {
    bool mono = true;
    for (std::size_t i = 1; i < means.size(); ++i) mono = mono && means[i] >= means[i - 1];
    table.window_monotone[name] = mono;
    table.window_monotone_all = table.window_monotone_all && mono;
  }
  bool ordering = false;
  bool any = false;
  for (const auto& c : table.cells) {
    if (c.variant != TopDownMode::kCross) continue;
    try {
      const double cross = c.mean;
      const double concat = table.cell(TopDownMode::kConcat, c.window).mean;
      const double none = table.cell(TopDownMode::kNone, c.window).mean;
      const bool ok = cross >= concat && concat >= none;
      ordering = any ? ordering && ok : ok;
      any = true;
    } catch (const UsageError&) {
      ordering = false;
      any = true;
    }
  }
  table.ordering_cross_concat_none = any && ordering;
}

AblationTable ablate(const AblationConfig& cfg) {
  if (cfg.seeds.size() < 3) throw ConfigError("ablation needs at least 3 seeds");
  if (cfg.variants.empty() || cfg.windows.empty()) throw ConfigError("ablation needs variants and windows");
  AblationTable table;
  table.chance = cfg.recipe.chance();
  std::vector<std::size_t> windows = cfg.windows;
  std::sort(windows.begin(), windows.end());
  for (TopDownMode variant : cfg.variants) {
    for (std::size_t w : windows) {
      KeyValueRecipe recipe = cfg.recipe;
      recipe.task.window = w;
      AblationCell cell;
      cell.variant = variant;
      cell.window = w;
      for (std::uint64_t seed : cfg.seeds) {
        cell.accuracies.push_back(run_keyvalue(recipe, variant, PoolingMode::kAvg, seed).report.final_metrics.token_acc);
      }
      table.cells.push_back(std::move(cell));
    }
  }
  summarize(table);
  return table;
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : cells) {
    rows.push_back({{"variant", to_string(c.variant)},
                    {"window", c.window},
                    {"accuracies", c.accuracies},
                    {"mean", c.mean},
                    {"sd", c.sd}});
  }
  return {{"task", "keyvalue"},
          {"chance", chance},
          {"rows", rows},
          {"window_monotone", window_monotone},
          {"window_monotone_all", window_monotone_all},
          {"ordering_cross_concat_none", ordering_cross_concat_none}};
}

}  // namespace tdt
