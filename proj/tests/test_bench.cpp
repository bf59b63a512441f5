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
#include <gtest/gtest.h>

#include "tdt/bench.hpp"
#include "tdt/common.hpp"

namespace tdt {
namespace {

ModelConfig tiny_base() {
  ModelConfig c;
  c.vocab_size = 20;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_bottom_up = 2;
  c.n_segment = 1;
  c.n_top_down = 1;
  c.n_decoder = 0;
  c.kernel = 8;
  c.stride = 6;
  c.ffn_mult = 2;
  return c;
}

TEST(BenchBudget, ClosedFormsPerVariant) {
  const ModelConfig base = tiny_base();
  const std::uint64_t n = 40, w = 4, m = base.segmentation().num_segments(40), band = band_popcount(40, 4);
  EXPECT_EQ(expected_score_evals(BenchVariant::kLocal, base, n, w), 2 * (2 * band));
  EXPECT_EQ(expected_score_evals(BenchVariant::kCross, base, n, w), 2 * (2 * band + m * m + band + n * m));
  EXPECT_EQ(expected_score_evals(BenchVariant::kConcat, base, n, w), 2 * (2 * band + m * m + band));
  EXPECT_EQ(expected_score_evals(BenchVariant::kFull, base, n, w), 2 * (3 * n * n));
}

TEST(BenchBudget, ScalingAtTheReferenceGrid) {
  const ModelConfig base = BenchGrid::default_base();
  for (std::size_t n : {128, 256, 512, 1024}) {
    const double full = static_cast<double>(expected_score_evals(BenchVariant::kFull, base, 2 * n, 64)) /
                        static_cast<double>(expected_score_evals(BenchVariant::kFull, base, n, 64));
    EXPECT_EQ(full, 4.0);
    const double cross = static_cast<double>(expected_score_evals(BenchVariant::kCross, base, 2 * n, 64)) /
                         static_cast<double>(expected_score_evals(BenchVariant::kCross, base, n, 64));
    EXPECT_LT(cross, 2.6) << n;
    EXPECT_GT(cross, 2.0) << n;
  }
}

TEST(BenchConfig, VariantsMapToEncoderSettings) {
  const ModelConfig base = tiny_base();
  const auto full = bench_model_config(BenchVariant::kFull, base, 4);
  EXPECT_EQ(full.window, kUnboundedWindow);
  EXPECT_EQ(full.n_bottom_up, 3u);
  EXPECT_EQ(full.topdown, TopDownMode::kNone);
  EXPECT_EQ(bench_model_config(BenchVariant::kLocal, base, 4).topdown, TopDownMode::kNone);
  EXPECT_EQ(bench_model_config(BenchVariant::kConcat, base, 4).topdown, TopDownMode::kConcat);
  EXPECT_EQ(bench_model_config(BenchVariant::kCross, base, 4).window, 4u);
  for (const char* name : {"full", "local", "cross", "concat"}) EXPECT_EQ(to_string(parse_bench_variant(name)), name);
  EXPECT_THROW(parse_bench_variant("sparse"), ConfigError);
}

TEST(BenchSweep, CountersMatchAndFullQuadruples) {
  BenchGrid grid;
  grid.base = tiny_base();
  grid.n_tokens = {16, 32};
  grid.windows = {4, 8};
  const auto records = bench_sweep(grid);
  ASSERT_EQ(records.size(), 2u /* full */ + 3u * 2u * 2u);
  for (const auto& r : records) {
    EXPECT_EQ(r.score_evals, expected_score_evals(parse_bench_variant(r.variant), grid.base, r.n_tokens, r.window));
    EXPECT_GT(r.wall_ms_median, 0.0);
    EXPECT_LE(r.wall_ms_min, r.wall_ms_median);
    EXPECT_GE(r.wall_ms_max, r.wall_ms_median);
    EXPECT_GT(r.peak_bytes, 0u);
    EXPECT_FALSE(r.failed);
  }
  EXPECT_EQ(records[0].variant, "full");
  EXPECT_EQ(records[1].score_evals, 4 * records[0].score_evals);
  EXPECT_EQ(records[0].window, kUnboundedWindow);
}

TEST(BenchSweep, RejectsDegenerateGrids) {
  BenchGrid grid;
  grid.base = tiny_base();
  grid.trials = 2;
  EXPECT_THROW(bench_sweep(grid), ConfigError);
  grid.trials = 3;
  grid.n_tokens.clear();
  EXPECT_THROW(bench_sweep(grid), ConfigError);
}

std::vector<BenchRecord> sample_records() {
  BenchRecord a{"cross", 1024, 64, 43, 1234567, 12.5, 987654, 7, 11.0, 14.25, false, ""};
  BenchRecord b{"full", 128, kUnboundedWindow, 0, 196608, 0.1 + 0.2, 4096, 7, 0.25, 0.5, false, ""};
  BenchRecord c{"local", 2048, 8, 0, 0, 0.0, 0, 7, 0.0, 0.0, true, "out of memory"};
  return {a, b, c};
}

TEST(BenchIo, CsvRoundTripKeepsEveryColumn) {
  const auto records = sample_records();
  const std::string csv = bench_to_csv(records);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,N,w,M,score_evals,wall_ms_median,peak_bytes,seed");
  const auto back = bench_from_csv(csv);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].variant, records[i].variant);
    EXPECT_EQ(back[i].n_tokens, records[i].n_tokens);
    EXPECT_EQ(back[i].window, records[i].window);
    EXPECT_EQ(back[i].n_segments, records[i].n_segments);
    EXPECT_EQ(back[i].score_evals, records[i].score_evals);
    EXPECT_EQ(back[i].wall_ms_median, records[i].wall_ms_median);
    EXPECT_EQ(back[i].peak_bytes, records[i].peak_bytes);
    EXPECT_EQ(back[i].seed, records[i].seed);
    EXPECT_EQ(back[i].failed, records[i].failed);
  }
  EXPECT_EQ(bench_to_csv(back), csv);
  EXPECT_THROW(bench_from_csv("variant,N\n"), InputError);
  EXPECT_THROW(bench_from_csv(csv + "cross,12,x,1,1,1,1,1\n"), InputError);
  EXPECT_THROW(bench_from_csv(csv + "cross,12\n"), InputError);
}

TEST(BenchIo, JsonRoundTripIsExact) {
  const auto records = sample_records();
  EXPECT_EQ(bench_from_json(bench_to_json(records)), records);
  EXPECT_EQ(bench_from_json(nlohmann::json::parse(bench_to_json(records).dump())), records);
  EXPECT_THROW(bench_from_json(nlohmann::json::object()), InputError);
  EXPECT_THROW(bench_from_json(nlohmann::json::parse("[{\"variant\": \"full\"}]")), InputError);
}

AblationCell cell(TopDownMode v, std::size_t w, std::vector<double> acc) {
  AblationCell c;
  c.variant = v;
  c.window = w;
  c.accuracies = std::move(acc);
  return c;
}

TEST(Ablation, SummaryStatisticsAndFlags) {
  AblationTable t;
  t.cells = {cell(TopDownMode::kCross, 4, {0.9, 1.0, 0.8}), cell(TopDownMode::kCross, 8, {1.0, 1.0, 1.0}),
             cell(TopDownMode::kConcat, 4, {0.5, 0.7, 0.6}), cell(TopDownMode::kConcat, 8, {0.4, 0.4, 0.4}),
             cell(TopDownMode::kNone, 4, {0.06, 0.07, 0.05}), cell(TopDownMode::kNone, 8, {0.06, 0.06, 0.06})};
  summarize(t);
  EXPECT_NEAR(t.cell(TopDownMode::kCross, 4).mean, 0.9, 1e-15);
  EXPECT_NEAR(t.cell(TopDownMode::kCross, 4).sd, 0.1, 1e-15);
  EXPECT_EQ(t.cell(TopDownMode::kCross, 8).sd, 0.0);
  EXPECT_TRUE(t.window_monotone.at("cross"));
  EXPECT_FALSE(t.window_monotone.at("concat"));
  EXPECT_FALSE(t.window_monotone_all);
  EXPECT_TRUE(t.ordering_cross_concat_none);
  t.cells[5].accuracies = {0.5, 0.5, 0.5};
  summarize(t);
  EXPECT_FALSE(t.ordering_cross_concat_none);
  EXPECT_THROW(t.cell(TopDownMode::kCross, 16), UsageError);

  const auto j = t.to_json();
  EXPECT_EQ(j.at("rows").size(), 6u);
  EXPECT_EQ(j.at("rows")[0].at("variant"), "cross");
  EXPECT_TRUE(j.contains("window_monotone_all"));
  EXPECT_TRUE(j.contains("ordering_cross_concat_none"));
}

TEST(Ablation, RowStructureAndRepeatability) {
  AblationConfig cfg;
  cfg.recipe.task.n_tokens = 12;
  cfg.recipe.task.n_bottom_up = 1;
  cfg.recipe.steps = 3;
  cfg.recipe.eval_every = 0;
  cfg.recipe.n_validation = 8;
  cfg.windows = {4, 2};
  const AblationTable a = ablate(cfg);
  ASSERT_EQ(a.cells.size(), 6u);
  EXPECT_EQ(a.cells[0].variant, TopDownMode::kCross);
  EXPECT_EQ(a.cells[0].window, 2u);
  EXPECT_EQ(a.cells[1].window, 4u);
  EXPECT_EQ(a.cells[5].variant, TopDownMode::kNone);
  for (const auto& c : a.cells) EXPECT_EQ(c.accuracies.size(), 3u);
  EXPECT_DOUBLE_EQ(a.chance, 1.0 / 16.0);
  EXPECT_EQ(ablate(cfg), a);
  cfg.seeds = {1, 2};
  EXPECT_THROW(ablate(cfg), ConfigError);
}

}  // namespace
}  // namespace tdt
