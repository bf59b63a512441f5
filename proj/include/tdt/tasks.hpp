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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tdt/model.hpp"
#include "tdt/optim.hpp"

namespace tdt {

struct TaskInstance {
  std::vector<std::int32_t> source;
  std::vector<std::int32_t> target;
  std::optional<ImportanceLabels> labels;
  friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

/// Ids 0..2 are pad/bos/eos; task tokens start at 3.
inline constexpr std::int32_t kFirstTaskToken = 3;

/// Uniform length in [min_len, max_len], tokens uniform over [3, vocab).
TaskInstance gen_copy_task(RngStream& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab);

/// Token layout of the key-value retrieval task.
struct KeyValueSpec {
  std::size_t n_tokens = 64;
  std::size_t window = 8;
  std::size_t n_bottom_up = 2;
  std::size_t n_values = 16;
  std::size_t vocab = 64;

  static constexpr std::int32_t kKey = 3;
  static constexpr std::int32_t kQuery = 4;
  std::int32_t first_value() const noexcept { return 5; }
  std::int32_t first_filler() const noexcept { return 5 + static_cast<std::int32_t>(n_values); }
  /// Receptive field of the bottom-up stack, N1 * floor(w / 2).
  std::size_t receptive_field() const noexcept { return n_bottom_up * (window / 2); }
  void validate() const;
};

/// source = [KEY, v, filler.., QUERY], so the value sits n_tokens - 2 >
/// receptive_field() positions before QUERY; target = [v]; labels mark KEY and v.
TaskInstance gen_keyvalue_task(RngStream& rng, const KeyValueSpec& spec);

/// Sequence-tagging data: tokens uniform over [3, vocab), label = (token == marked).
TaskInstance gen_marker_task(RngStream& rng, std::size_t n_tokens, std::size_t vocab, std::int32_t marked);

using TaskStream = std::function<TaskInstance(RngStream&)>;

/// Binary per-token importance classifier: a top-down encoder plus a linear
/// head producing one logit per token.
class Tagger {
 public:
  Tagger(ModelConfig encoder_cfg, std::uint64_t seed);

  Model& encoder() noexcept { return encoder_; }
  ParameterStore& head_params() noexcept { return head_; }
  std::vector<Parameter*> parameters();

  Var logits(std::span<const std::int32_t> ids);
  /// Raw logits as plain weights.
  ImportanceWeights weights(std::span<const std::int32_t> ids);
  Var loss(std::span<const std::int32_t> ids, std::span<const std::uint8_t> labels);

 private:
  Model encoder_;
  ParameterStore head_;
  LinearParams proj_;
};

/// Pooling inputs for one instance under the model's current pooling mode:
/// oracle labels for oracle_ada, tagger logits for ada, nothing for avg.
std::optional<PoolingInputs> pooling_inputs_for(const Model& model, const TaskInstance& task, Tagger* tagger);

struct EvalMetrics {
  double token_acc = 0.0;
  double seq_acc = 0.0;
  std::size_t n = 0;
  friend bool operator==(const EvalMetrics&, const EvalMetrics&) = default;
};

/// Exact-match accounting of generated outputs (trailing EOS stripped)
/// against targets.
EvalMetrics eval_accuracy(Model& model, std::span<const TaskInstance> tasks, const GenerateOptions& strategy,
                          Tagger* tagger = nullptr);

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch = 8;
  AdamConfig adam{};
  std::uint64_t seed = 0;
  /// Validate every this many steps (0 = only at the end).
  std::size_t eval_every = 0;
  /// Restore the parameters with the best validation token accuracy.
  bool keep_best = true;
};

struct TrainReport {
  std::vector<double> losses;  // mean batch loss per step
  EvalMetrics final_metrics;
  double best_metric = -1.0;
  std::size_t best_step = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Deterministic given (model init, stream, cfg). On a non-finite loss the
/// last validated parameters are restored and NumericError is rethrown.
TrainReport train(Model& model, const TaskStream& stream, const TrainConfig& cfg,
                  std::span<const TaskInstance> validation = {}, Tagger* tagger = nullptr);

struct TaggerReport {
  std::vector<double> losses;
  double f1 = 0.0;
};

/// Trains a tagger on labeled instances; the held-out set measures token F1.
TaggerReport train_tagger(Tagger& tagger, const TaskStream& stream, const TrainConfig& cfg,
                          std::span<const TaskInstance> held_out = {});

/// Positive-class token F1 at logit threshold 0.
double tagger_f1(Tagger& tagger, std::span<const TaskInstance> tasks);

/// FNV-1a over the serialized model config and training settings.
std::string config_hash(const ModelConfig& model, const TrainConfig& cfg);

/// JSON-lines task dump: {"source": [...], "target": [...], "labels": [...]}.
/// Scripted desk training budget for the key-value retrieval task. The
/// decoder reads only the QUERY row, so everything it learns about the value
/// has to travel through the encoder.
struct KeyValueRecipe {
  KeyValueSpec task;
  std::size_t steps = 1500;
  std::size_t batch = 8;
  double lr = 1e-4;
  std::size_t eval_every = 250;
  std::size_t n_validation = 200;
  std::uint64_t validation_seed = 0xC0FFEE;
  std::size_t tagger_steps = 200;
  double tagger_lr = 1e-3;

  ModelConfig model_config(TopDownMode topdown, PoolingMode pooling) const;
  std::vector<TaskInstance> validation_set() const;
  double chance() const { return 1.0 / static_cast<double>(task.n_values); }
};

struct KeyValueRun {
  TopDownMode topdown = TopDownMode::kCross;
  PoolingMode pooling = PoolingMode::kAvg;
  std::uint64_t seed = 0;
  TrainReport report;
  double tagger_f1 = -1.0;  // ada pooling only
};

/// Trains one model under the recipe (and, for ada pooling, its tagger first).
KeyValueRun run_keyvalue(const KeyValueRecipe& recipe, TopDownMode topdown, PoolingMode pooling,
                         std::uint64_t seed);

std::string task_to_jsonl(const TaskInstance& t);
TaskInstance task_from_jsonl(const std::string& line);
void write_tasks(const std::string& path, std::span<const TaskInstance> tasks);
std::vector<TaskInstance> read_tasks(const std::string& path);

}  // namespace tdt
