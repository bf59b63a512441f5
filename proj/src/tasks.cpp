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

#include "tdt/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace tdt {

TaskInstance gen_copy_task(RngStream& rng, std::size_t min_len, std::size_t max_len, std::size_t vocab) {
  if (vocab < 4) throw ConfigError("copy task needs vocab >= 4");
  if (min_len == 0 || min_len > max_len) throw ConfigError("copy task needs 1 <= min_len <= max_len");
  const std::size_t n = min_len + rng.below(max_len - min_len + 1);
  TaskInstance t;
  t.source.resize(n);
  for (auto& id : t.source) id = kFirstTaskToken + static_cast<std::int32_t>(rng.below(vocab - kFirstTaskToken));
  t.target = t.source;
  return t;
}

void KeyValueSpec::validate() const {
  if (n_values == 0) throw ConfigError("key-value task needs at least one value token");
  if (static_cast<std::size_t>(first_filler()) >= vocab) {
    throw ConfigError("vocab " + std::to_string(vocab) + " leaves no filler tokens after " +
                      std::to_string(n_values) + " values");
  }
  if (n_tokens < receptive_field() + 3) {
    throw ConfigError("key-value task: " + std::to_string(n_tokens) +
                      " tokens cannot place the value outside a receptive field of " +
                      std::to_string(receptive_field()));
  }
}

TaskInstance gen_keyvalue_task(RngStream& rng, const KeyValueSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_tokens;
  const std::size_t n_filler = spec.vocab - static_cast<std::size_t>(spec.first_filler());
  TaskInstance t;
  t.source.resize(n);
  for (auto& id : t.source) id = spec.first_filler() + static_cast<std::int32_t>(rng.below(n_filler));
  const std::int32_t value = spec.first_value() + static_cast<std::int32_t>(rng.below(spec.n_values));
  t.source[0] = KeyValueSpec::kKey;
  t.source[1] = value;
  t.source[n - 1] = KeyValueSpec::kQuery;
  t.target = {value};
  t.labels = ImportanceLabels(n, 0);
  (*t.labels)[0] = 1;
  (*t.labels)[1] = 1;
  return t;
}

TaskInstance gen_marker_task(RngStream& rng, std::size_t n_tokens, std::size_t vocab, std::int32_t marked) {
  if (vocab <= static_cast<std::size_t>(kFirstTaskToken)) throw ConfigError("marker task needs vocab > 3");
  TaskInstance t;
  t.source.resize(n_tokens);
  t.labels = ImportanceLabels(n_tokens, 0);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    t.source[i] = kFirstTaskToken + static_cast<std::int32_t>(rng.below(vocab - kFirstTaskToken));
    (*t.labels)[i] = t.source[i] == marked ? 1 : 0;
  }
  t.target = {t.source.front()};
  return t;
}

namespace {

ModelConfig tagger_encoder_config(ModelConfig cfg) {
  cfg.n_decoder = 0;
  cfg.pooling = PoolingMode::kAvg;
  return cfg;
}

}  // namespace

Tagger::Tagger(ModelConfig encoder_cfg, std::uint64_t seed)
    : encoder_(tagger_encoder_config(std::move(encoder_cfg)), seed) {
  const std::size_t d = encoder_.config().d_model;
  RngStream rng = RngStream(seed).split(0x7A66);
  Tensor w({d, 1});
  const double stddev = std::sqrt(2.0 / static_cast<double>(d + 1));
  for (double& v : w.data()) v = stddev * rng.normal();
  proj_.weight = &head_.add("tagger.head.weight", std::move(w));
  proj_.bias = &head_.add("tagger.head.bias", Tensor({1}));
}

std::vector<Parameter*> Tagger::parameters() {
  auto out = encoder_.params().all();
  for (Parameter* p : head_.all()) out.push_back(p);
  return out;
}

Var Tagger::logits(std::span<const std::int32_t> ids) {
  return linear(encoder_.encode(ids, nullptr, nullptr), proj_);
}

ImportanceWeights Tagger::weights(std::span<const std::int32_t> ids) {
  const Var z_var = logits(ids);
  const Tensor& z = z_var.value();
  return ImportanceWeights(z.data().begin(), z.data().end());
}

Var Tagger::loss(std::span<const std::int32_t> ids, std::span<const std::uint8_t> labels) {
  return bce_with_logits(logits(ids), labels);
}

std::optional<PoolingInputs> pooling_inputs_for(const Model& model, const TaskInstance& task, Tagger* tagger) {
  const ModelConfig& cfg = model.config();
  if (cfg.topdown == TopDownMode::kNone) return std::nullopt;
  switch (cfg.pooling) {
    case PoolingMode::kAvg:
      return std::nullopt;
    case PoolingMode::kOracleAda:
      if (!task.labels) throw ConfigError("oracle_ada pooling needs labeled instances");
      return PoolingInputs{std::nullopt, task.labels};
    case PoolingMode::kAda:
      if (!tagger) throw ConfigError("ada pooling needs a trained tagger");
      return PoolingInputs{tagger->weights(task.source), std::nullopt};
  }
  return std::nullopt;
}

EvalMetrics eval_accuracy(Model& model, std::span<const TaskInstance> tasks, const GenerateOptions& strategy,
                          Tagger* tagger) {
  if (tasks.empty()) throw UsageError("eval_accuracy needs a non-empty task set");
  std::size_t tok_hits = 0, tok_total = 0, seq_hits = 0;
  for (const TaskInstance& t : tasks) {
    GenerateOptions opts = strategy;
    opts.max_len = t.target.size() + 1;
    const auto pool = pooling_inputs_for(model, t, tagger);
    auto out = model.generate(t.source, pool ? &*pool : nullptr, opts);
    if (!out.empty() && out.back() == Model::kEos) out.pop_back();
    for (std::size_t i = 0; i < t.target.size(); ++i) tok_hits += (i < out.size() && out[i] == t.target[i]);
    tok_total += t.target.size();
    seq_hits += out == t.target;
  }
  return {static_cast<double>(tok_hits) / static_cast<double>(tok_total),
          static_cast<double>(seq_hits) / static_cast<double>(tasks.size()), tasks.size()};
}

std::string config_hash(const ModelConfig& model, const TrainConfig& cfg) {
  nlohmann::json j = model.to_json();
  j["train.steps"] = cfg.steps;
  j["train.batch"] = cfg.batch;
  j["train.lr"] = cfg.adam.lr;
  j["train.beta1"] = cfg.adam.beta1;
  j["train.beta2"] = cfg.adam.beta2;
  j["train.eps"] = cfg.adam.eps;
  j["train.seed"] = cfg.seed;
  j["train.eval_every"] = cfg.eval_every;
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct Snapshot {
  std::vector<Tensor> values;
};

Snapshot take_snapshot(const std::vector<Parameter*>& params) {
  Snapshot s;
  s.values.reserve(params.size());
  for (const Parameter* p : params) s.values.push_back(p->value);
  return s;
}

void restore(const std::vector<Parameter*>& params, const Snapshot& s) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s.values[i];
}

}  // namespace

TrainReport train(Model& model, const TaskStream& stream, const TrainConfig& cfg,
                  std::span<const TaskInstance> validation, Tagger* tagger) {
  if (cfg.batch == 0) throw ConfigError("batch size must be positive");
  TrainReport report;
  report.seed = cfg.seed;
  report.config_hash = config_hash(model.config(), cfg);
  report.losses.reserve(cfg.steps);

  auto params = model.params().all();
  Adam adam(params, cfg.adam);
  RngStream data_rng = RngStream(cfg.seed).split(1);
  Snapshot last_good = take_snapshot(params);
  const GenerateOptions greedy{};

  auto validate = [&](std::size_t step) {
    if (validation.empty()) return;
    model.set_training(false);
    const EvalMetrics m = eval_accuracy(model, validation, greedy, tagger);
    if (m.token_acc > report.best_metric) {
      report.best_metric = m.token_acc;
      report.best_step = step;
      last_good = take_snapshot(params);
    }
  };

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    model.set_training(true);
    adam.zero_grads();
    double batch_loss = 0.0;
    try {
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        const TaskInstance task = stream(data_rng);
        const auto pool = pooling_inputs_for(model, task, tagger);
        Tape tape;
        Tape::Recording rec(tape);
        Var loss = scale(model.loss(task.source, task.target, pool ? &*pool : nullptr),
                         1.0 / static_cast<double>(cfg.batch));
        batch_loss += loss.value().item();
        tape.backward(loss);
      }
      adam.step();
    } catch (const NumericError&) {
      restore(params, last_good);
      model.set_training(false);
      throw;
    }
    report.losses.push_back(batch_loss);
    if (cfg.eval_every && step % cfg.eval_every == 0) validate(step);
  }
  model.set_training(false);
  if (!validation.empty()) {
    if (cfg.eval_every == 0 || cfg.steps % cfg.eval_every != 0 || cfg.steps == 0) validate(cfg.steps);
    if (cfg.keep_best) restore(params, last_good);
    report.final_metrics = eval_accuracy(model, validation, greedy, tagger);
  }
  return report;
}

double tagger_f1(Tagger& tagger, std::span<const TaskInstance> tasks) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const TaskInstance& t : tasks) {
    if (!t.labels) throw ConfigError("tagger evaluation needs labeled instances");
    const auto w = tagger.weights(t.source);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const bool pred = w[i] > 0.0;
      const bool gold = (*t.labels)[i] != 0;
      tp += pred && gold;
      fp += pred && !gold;
      fn += !pred && gold;
    }
  }
  if (tp == 0) return (fp == 0 && fn == 0) ? 1.0 : 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * p * r / (p + r);
}

TaggerReport train_tagger(Tagger& tagger, const TaskStream& stream, const TrainConfig& cfg,
                          std::span<const TaskInstance> held_out) {
  if (cfg.batch == 0) throw ConfigError("batch size must be positive");
  TaggerReport report;
  auto params = tagger.parameters();
  Adam adam(params, cfg.adam);
  RngStream data_rng = RngStream(cfg.seed).split(2);
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    adam.zero_grads();
    double batch_loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const TaskInstance task = stream(data_rng);
      if (!task.labels) throw ConfigError("tagger training needs labeled instances");
      Tape tape;
      Tape::Recording rec(tape);
      Var loss = scale(tagger.loss(task.source, *task.labels), 1.0 / static_cast<double>(cfg.batch));
      batch_loss += loss.value().item();
      tape.backward(loss);
    }
    adam.step();
    report.losses.push_back(batch_loss);
  }
  if (!held_out.empty()) report.f1 = tagger_f1(tagger, held_out);
  return report;
}

ModelConfig KeyValueRecipe::model_config(TopDownMode topdown, PoolingMode pooling) const {
  ModelConfig cfg = ModelConfig::desk_preset();
  cfg.vocab_size = task.vocab;
  cfg.window = task.window;
  cfg.n_bottom_up = task.n_bottom_up;
  cfg.max_positions = std::max(cfg.max_positions, task.n_tokens);
  cfg.topdown = topdown;
  cfg.pooling = pooling;
  cfg.readout = Readout::kLast;
  return cfg;
}

std::vector<TaskInstance> KeyValueRecipe::validation_set() const {
  RngStream rng(validation_seed);
  std::vector<TaskInstance> out;
  out.reserve(n_validation);
  for (std::size_t i = 0; i < n_validation; ++i) out.push_back(gen_keyvalue_task(rng, task));
  return out;
}

KeyValueRun run_keyvalue(const KeyValueRecipe& recipe, TopDownMode topdown, PoolingMode pooling,
                         std::uint64_t seed) {
  recipe.task.validate();
  const auto validation = recipe.validation_set();
  const TaskStream stream = [&](RngStream& rng) { return gen_keyvalue_task(rng, recipe.task); };
  KeyValueRun run;
  run.topdown = topdown;
  run.pooling = pooling;
  run.seed = seed;

  std::optional<Tagger> tagger;
  if (pooling == PoolingMode::kAda && topdown != TopDownMode::kNone) {
    tagger.emplace(recipe.model_config(TopDownMode::kCross, PoolingMode::kAvg), RngStream(seed).split(3).next_u64());
    TrainConfig tc;
    tc.steps = recipe.tagger_steps;
    tc.batch = recipe.batch;
    tc.adam.lr = recipe.tagger_lr;
    tc.seed = seed;
    run.tagger_f1 = train_tagger(*tagger, stream, tc, validation).f1;
  }

  Model model(recipe.model_config(topdown, pooling), seed);
  TrainConfig tc;
  tc.steps = recipe.steps;
  tc.batch = recipe.batch;
  tc.adam.lr = recipe.lr;
  tc.seed = seed;
  tc.eval_every = recipe.eval_every;
  run.report = train(model, stream, tc, validation, tagger ? &*tagger : nullptr);
  return run;
}

std::string task_to_jsonl(const TaskInstance& t) {
  nlohmann::json j;
  j["source"] = t.source;
  j["target"] = t.target;
  if (t.labels) {
    std::vector<int> l(t.labels->begin(), t.labels->end());
    j["labels"] = l;
  }
  return j.dump();
}

TaskInstance task_from_jsonl(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TaskInstance t;
    t.source = j.at("source").get<std::vector<std::int32_t>>();
    t.target = j.at("target").get<std::vector<std::int32_t>>();
    if (j.contains("labels")) {
      ImportanceLabels labels;
      for (int v : j.at("labels").get<std::vector<int>>()) {
        if (v != 0 && v != 1) throw LoadError("labels must be 0 or 1");
        labels.push_back(static_cast<std::uint8_t>(v));
      }
      t.labels = std::move(labels);
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("malformed task line: ") + e.what());
  }
}

void write_tasks(const std::string& path, std::span<const TaskInstance> tasks) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write task file '" + path + "'");
  for (const auto& t : tasks) out << task_to_jsonl(t) << '\n';
}

std::vector<TaskInstance> read_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open task file '" + path + "'");
  std::vector<TaskInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(task_from_jsonl(line));
  }
  return out;
}

}  // namespace tdt
