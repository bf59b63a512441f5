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
#include "tdt/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tdt/bench.hpp"
#include "tdt/common.hpp"
#include "tdt/rouge.hpp"
#include "tdt/tasks.hpp"

namespace tdt {
namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string preset = "desk";
  std::string out;
  std::string format;  // empty: csv for bench, text for budget, json otherwise
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "model config JSON (ModelConfig field names)");
  cmd->add_option("--seed", c.seed, "random seed (TDT_SEED overrides)");
  cmd->add_option("--preset", c.preset, "base preset when no --config is given")
      ->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--out", c.out, "output path (default stdout)");
  cmd->add_option("--format", c.format, "output format")->check(CLI::IsMember({"csv", "json"}));
}

std::uint64_t resolve_seed(const Common& c) {
  const char* env = std::getenv("TDT_SEED");
  if (env == nullptr || *env == '\0') return c.seed;
  const std::string s(env);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ConfigError("TDT_SEED is not an unsigned 64-bit integer: '" + s + "'");
  }
  return v;
}

ModelConfig resolve_model_config(const Common& c) {
  ModelConfig cfg;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) throw ConfigError("cannot open config file '" + c.config + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file '" + c.config + "' is not valid JSON: " + e.what());
    }
    cfg = ModelConfig::from_json(j);
  } else {
    cfg = c.preset == "paper" ? ModelConfig::paper_preset() : ModelConfig::desk_preset();
  }
  cfg.validate();
  return cfg;
}

void emit(const Common& c, const std::string& text, std::ostream& out) {
  if (c.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw InputError("cannot write '" + c.out + "'");
  f << text;
}

KeyValueSpec keyvalue_for(const ModelConfig& cfg, std::size_t n_tokens) {
  KeyValueSpec spec;
  spec.n_tokens = n_tokens;
  spec.window = cfg.window;
  spec.n_bottom_up = cfg.n_bottom_up;
  spec.vocab = cfg.vocab_size;
  spec.validate();
  if (cfg.max_positions < n_tokens) {
    throw ConfigError("max_positions " + std::to_string(cfg.max_positions) + " < N " + std::to_string(n_tokens));
  }
  return spec;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

GenerateOptions decode_options(std::size_t beam, std::size_t max_len) {
  GenerateOptions g;
  g.strategy = beam > 1 ? DecodeStrategy::kBeam : DecodeStrategy::kGreedy;
  g.beam_size = beam > 1 ? beam : 1;
  g.max_len = max_len;
  return g;
}

std::vector<std::int32_t> strip_eos(std::vector<std::int32_t> ids) {
  if (!ids.empty() && ids.back() == Model::kEos) ids.pop_back();
  return ids;
}

struct TrainArgs {
  std::string task = "keyvalue";
  std::string data;
  std::size_t steps = 200;
  std::size_t batch = 8;
  double lr = 1e-4;
  std::size_t n_tokens = 64;
  std::size_t eval_every = 0;
  std::size_t n_validation = 64;
  std::string report;
};

int cmd_train(const Common& c, const TrainArgs& a, std::ostream& out) {
  const ModelConfig cfg = resolve_model_config(c);
  const std::uint64_t seed = resolve_seed(c);
  TaskStream stream;
  std::vector<TaskInstance> data;
  if (!a.data.empty()) {
    data = read_tasks(a.data);
    if (data.empty()) throw InputError("no tasks in '" + a.data + "'");
    stream = [&data](RngStream& rng) { return data[rng.below(data.size())]; };
  } else if (a.task == "keyvalue") {
    const KeyValueSpec spec = keyvalue_for(cfg, a.n_tokens);
    stream = [spec](RngStream& rng) { return gen_keyvalue_task(rng, spec); };
  } else {
    const std::size_t n = a.n_tokens;
    const std::size_t vocab = cfg.vocab_size;
    stream = [n, vocab](RngStream& rng) { return gen_copy_task(rng, 1, n, vocab); };
  }
  std::vector<TaskInstance> validation;
  if (a.eval_every > 0) {
    RngStream vrng = RngStream(seed).split(99);
    for (std::size_t i = 0; i < a.n_validation; ++i) validation.push_back(stream(vrng));
  }
  Model model(cfg, seed);
  TrainConfig tc;
  tc.steps = a.steps;
  tc.batch = a.batch;
  tc.adam.lr = a.lr;
  tc.seed = seed;
  tc.eval_every = a.eval_every;
  const TrainReport report = train(model, stream, tc, validation);
  const std::string ckpt = c.out.empty() ? "tdt_model.ckpt" : c.out;
  save_checkpoint(model, ckpt);
  nlohmann::json summary = {{"checkpoint", ckpt},
                            {"steps", report.losses.size()},
                            {"final_loss", report.losses.empty() ? 0.0 : report.losses.back()},
                            {"seed", report.seed},
                            {"config_hash", report.config_hash}};
  if (!validation.empty()) {
    summary["token_acc"] = report.final_metrics.token_acc;
    summary["seq_acc"] = report.final_metrics.seq_acc;
    summary["best_step"] = report.best_step;
  }
  if (!a.report.empty()) {
    nlohmann::json full = summary;
    full["losses"] = report.losses;
    full["config"] = cfg.to_json();
    std::ofstream f(a.report);
    if (!f) throw InputError("cannot write '" + a.report + "'");
    f << full.dump(2) << '\n';
  }
  out << summary.dump() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::size_t n_tokens = 64;
  std::size_t n = 200;
  std::size_t beam = 1;
  std::size_t max_len = 32;
};

int cmd_eval(const Common& c, const EvalArgs& a, std::ostream& out) {
  Model model = load_checkpoint(a.checkpoint);
  std::vector<TaskInstance> tasks;
  if (!a.data.empty()) {
    tasks = read_tasks(a.data);
  } else {
    const KeyValueSpec spec = keyvalue_for(model.config(), a.n_tokens);
    RngStream rng(resolve_seed(c));
    for (std::size_t i = 0; i < a.n; ++i) tasks.push_back(gen_keyvalue_task(rng, spec));
  }
  if (tasks.empty()) throw InputError("nothing to evaluate");
  const GenerateOptions g = decode_options(a.beam, a.max_len);
  const EvalMetrics m = eval_accuracy(model, tasks, g);
  double r1 = 0.0, r2 = 0.0, rl = 0.0;
  for (const auto& t : tasks) {
    const auto pooling = pooling_inputs_for(model, t, nullptr);
    const auto hyp = strip_eos(model.generate(t.source, pooling ? &*pooling : nullptr, g));
    const std::span<const std::int32_t> ref(t.target), h(hyp);
    r1 += rouge_n(ref, h, 1).f1;
    r2 += rouge_n(ref, h, 2).f1;
    rl += rouge_l(ref, h).f1;
  }
  const double n = static_cast<double>(tasks.size());
  const nlohmann::json j = {{"n", m.n},
                            {"token_acc", m.token_acc},
                            {"seq_acc", m.seq_acc},
                            {"rouge1_f1", r1 / n},
                            {"rouge2_f1", r2 / n},
                            {"rougeL_f1", rl / n}};
  emit(c, j.dump() + "\n", out);
  return kExitOk;
}

struct GenerateArgs {
  std::string checkpoint;
  std::string ids;
  std::string data;
  std::size_t beam = 1;
  std::size_t max_len = 32;
};

std::vector<std::int32_t> parse_ids(const std::string& s) {
  std::vector<std::int32_t> ids;
  for (const auto& tok : split_ws(s)) {
    std::int32_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || v < 0) {
      throw ConfigError("--ids: bad token id '" + tok + "'");
    }
    ids.push_back(v);
  }
  return ids;
}

int cmd_generate(const Common& c, const GenerateArgs& a, std::ostream& out) {
  Model model = load_checkpoint(a.checkpoint);
  std::vector<std::vector<std::int32_t>> sources;
  if (!a.ids.empty()) sources.push_back(parse_ids(a.ids));
  if (!a.data.empty())
    for (auto& t : read_tasks(a.data)) sources.push_back(std::move(t.source));
  if (sources.empty()) throw ConfigError("generate needs --ids or --data");
  const GenerateOptions g = decode_options(a.beam, a.max_len);
  std::ostringstream os;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& src : sources) {
    const auto hyp = model.generate(src, nullptr, g);
    if (c.format != "csv") {
      arr.push_back(hyp);
    } else {
      for (std::size_t i = 0; i < hyp.size(); ++i) os << (i ? " " : "") << hyp[i];
      os << '\n';
    }
  }
  emit(c, c.format != "csv" ? arr.dump() + "\n" : os.str(), out);
  return kExitOk;
}

struct TagArgs {
  std::string doc;
  std::string ref;
  std::string stopwords;
  bool synthetic = false;
  std::size_t steps = 200;
  std::size_t n_tokens = 32;
  double lr = 1e-3;
};

int cmd_tag(const Common& c, const TagArgs& a, std::ostream& out) {
  if (a.synthetic) {
    ModelConfig cfg = resolve_model_config(c);
    cfg.n_decoder = 0;
    cfg.pooling = PoolingMode::kAvg;
    const std::uint64_t seed = resolve_seed(c);
    const std::int32_t marked = kFirstTaskToken;
    const std::size_t n = a.n_tokens;
    const std::size_t vocab = cfg.vocab_size;
    const TaskStream stream = [=](RngStream& rng) { return gen_marker_task(rng, n, vocab, marked); };
    std::vector<TaskInstance> held_out;
    RngStream hrng = RngStream(seed).split(99);
    for (int i = 0; i < 100; ++i) held_out.push_back(stream(hrng));
    Tagger tagger(cfg, seed);
    TrainConfig tc;
    tc.steps = a.steps;
    tc.adam.lr = a.lr;
    tc.seed = seed;
    const TaggerReport r = train_tagger(tagger, stream, tc, held_out);
    const nlohmann::json j = {{"f1", r.f1}, {"steps", r.losses.size()}, {"final_loss", r.losses.empty() ? 0.0 : r.losses.back()}};
    emit(c, j.dump() + "\n", out);
    return kExitOk;
  }
  if (a.doc.empty() || a.ref.empty()) throw ConfigError("tag needs --doc and --ref (or --synthetic)");
  const auto docs = read_lines(a.doc);
  const auto refs = read_lines(a.ref);
  if (docs.size() != refs.size()) {
    throw InputError("--doc has " + std::to_string(docs.size()) + " lines but --ref has " + std::to_string(refs.size()));
  }
  const auto stop = a.stopwords.empty() ? default_stopwords() : load_stopwords(a.stopwords);
  std::vector<ImportanceLabels> labels;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto d = split_ws(docs[i]);
    const auto r = split_ws(refs[i]);
    labels.push_back(build_importance_labels(d, r, stop));
  }
  if (!c.out.empty()) {
    write_label_file(c.out, labels);
    return kExitOk;
  }
  for (const auto& l : labels) {
    for (std::size_t i = 0; i < l.size(); ++i) out << (i ? " " : "") << int(l[i]);
    out << '\n';
  }
  return kExitOk;
}

struct BenchArgs {
  std::vector<std::size_t> n_tokens;
  std::vector<std::size_t> windows;
  std::vector<std::string> variants;
  std::size_t trials = 3;
};

int cmd_bench(const Common& c, const BenchArgs& a, std::ostream& out) {
  BenchGrid grid;
  if (!c.config.empty() || c.preset == "paper") grid.base = resolve_model_config(c);
  if (!a.n_tokens.empty()) grid.n_tokens = a.n_tokens;
  if (!a.windows.empty()) grid.windows = a.windows;
  if (!a.variants.empty()) {
    grid.variants.clear();
    for (const auto& v : a.variants) grid.variants.push_back(parse_bench_variant(v));
  }
  grid.trials = a.trials;
  grid.seed = resolve_seed(c);
  const auto records = bench_sweep(grid);
  emit(c, c.format != "json" ? bench_to_csv(records) : bench_to_json(records).dump(2) + "\n", out);
  return kExitOk;
}

struct AblateArgs {
  std::vector<std::size_t> windows{4, 8, 16};
  std::vector<std::string> variants{"cross", "concat", "none"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t steps = 1500;
  std::size_t n_tokens = 64;
};

int cmd_ablate(const Common& c, const AblateArgs& a, std::ostream& out) {
  AblationConfig cfg;
  cfg.recipe.steps = a.steps;
  cfg.recipe.task.n_tokens = a.n_tokens;
  cfg.windows = a.windows;
  cfg.seeds = a.seeds;
  cfg.variants.clear();
  for (const auto& v : a.variants) cfg.variants.push_back(parse_topdown_mode(v));
  for (std::size_t w : cfg.windows) {
    KeyValueSpec s = cfg.recipe.task;
    s.window = w;
    s.validate();
  }
  const AblationTable table = ablate(cfg);
  emit(c, table.to_json().dump(2) + "\n", out);
  return kExitOk;
}

struct BudgetArgs {
  std::size_t n_tokens = 0;
  std::size_t window = 0;
  std::size_t n_segments = 0;
};

int cmd_budget(const Common& c, const BudgetArgs& a, std::ostream& out) {
  const ScoreBudget b = count_budget(a.n_tokens, a.window, a.n_segments);
  if (c.format == "json") {
    const nlohmann::json j = {{"N", a.n_tokens}, {"w", a.window}, {"M", a.n_segments},
                              {"local", b.local}, {"segment", b.segment}, {"cross", b.cross}};
    emit(c, j.dump() + "\n", out);
  } else {
    emit(c, "local=" + std::to_string(b.local) + " segment=" + std::to_string(b.segment) +
                " cross=" + std::to_string(b.cross) + "\n",
         out);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Top-down transformer toolkit", "tdt");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  Common c;
  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint to --out");
  add_common(train_cmd, c);
  train_cmd->add_option("--task", ta.task, "generated task")->check(CLI::IsMember({"keyvalue", "copy"}));
  train_cmd->add_option("--data", ta.data, "JSON-lines task dump to train on instead");
  train_cmd->add_option("--steps", ta.steps, "optimizer steps");
  train_cmd->add_option("--batch", ta.batch, "examples per step");
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
  train_cmd->add_option("--N", ta.n_tokens, "source length of generated tasks");
  train_cmd->add_option("--eval-every", ta.eval_every, "validate every this many steps (0 = never)");
  train_cmd->add_option("--report", ta.report, "write the full training report JSON here");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "token/sequence accuracy and ROUGE of a checkpoint");
  add_common(eval_cmd, c);
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", ea.data, "JSON-lines task dump (default: generated keyvalue tasks)");
  eval_cmd->add_option("--N", ea.n_tokens, "source length of generated tasks");
  eval_cmd->add_option("--n", ea.n, "number of generated tasks");
  eval_cmd->add_option("--beam", ea.beam, "beam size (1 = greedy)");
  eval_cmd->add_option("--max-len", ea.max_len, "maximum output length");

  GenerateArgs ga;
  auto* gen_cmd = app.add_subcommand("generate", "decode outputs for token id sequences");
  add_common(gen_cmd, c);
  gen_cmd->add_option("--checkpoint", ga.checkpoint, "checkpoint file")->required();
  gen_cmd->add_option("--ids", ga.ids, "whitespace-separated source token ids");
  gen_cmd->add_option("--data", ga.data, "JSON-lines task dump; sources are decoded");
  gen_cmd->add_option("--beam", ga.beam, "beam size (1 = greedy)");
  gen_cmd->add_option("--max-len", ga.max_len, "maximum output length");

  TagArgs tg;
  auto* tag_cmd = app.add_subcommand("tag", "build importance labels, or train a tagger on a synthetic rule");
  add_common(tag_cmd, c);
  tag_cmd->add_option("--doc", tg.doc, "documents, one per line");
  tag_cmd->add_option("--ref", tg.ref, "references, one per line");
  tag_cmd->add_option("--stopwords", tg.stopwords, "stopword file, one word per line");
  tag_cmd->add_flag("--synthetic", tg.synthetic, "train a tagger on the marker rule and report F1");
  tag_cmd->add_option("--steps", tg.steps, "tagger optimizer steps");
  tag_cmd->add_option("--N", tg.n_tokens, "synthetic sequence length");
  tag_cmd->add_option("--lr", tg.lr, "tagger learning rate");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "score-evaluation, time and memory sweep");
  add_common(bench_cmd, c);
  bench_cmd->add_option("--N", ba.n_tokens, "sequence lengths")->delimiter(',');
  bench_cmd->add_option("--w", ba.windows, "window sizes")->delimiter(',');
  bench_cmd->add_option("--variants", ba.variants, "full, local, cross, concat")->delimiter(',');
  bench_cmd->add_option("--trials", ba.trials, "timed trials per cell (>= 3)");

  AblateArgs aa;
  auto* ablate_cmd = app.add_subcommand("ablate", "{cross, concat, none} x window table on the keyvalue task");
  add_common(ablate_cmd, c);
  ablate_cmd->add_option("--w", aa.windows, "window sizes")->delimiter(',');
  ablate_cmd->add_option("--variants", aa.variants, "topdown modes")->delimiter(',');
  ablate_cmd->add_option("--seeds", aa.seeds, "training seeds (>= 3)")->delimiter(',');
  ablate_cmd->add_option("--steps", aa.steps, "training steps per run");
  ablate_cmd->add_option("--N", aa.n_tokens, "keyvalue sequence length");

  BudgetArgs bu;
  auto* budget_cmd = app.add_subcommand("budget", "print the per-head attention score budget");
  add_common(budget_cmd, c);
  budget_cmd->add_option("--N", bu.n_tokens, "tokens")->required();
  budget_cmd->add_option("--w", bu.window, "window")->required();
  budget_cmd->add_option("--M", bu.n_segments, "segments")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "tdt: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitConfig;
  }

  try {
    if (app.got_subcommand(train_cmd)) return cmd_train(c, ta, out);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(c, ea, out);
    if (app.got_subcommand(gen_cmd)) return cmd_generate(c, ga, out);
    if (app.got_subcommand(tag_cmd)) return cmd_tag(c, tg, out);
    if (app.got_subcommand(bench_cmd)) return cmd_bench(c, ba, out);
    if (app.got_subcommand(ablate_cmd)) return cmd_ablate(c, aa, out);
    return cmd_budget(c, bu, out);
  } catch (const ConfigError& e) {
    err << "tdt: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UsageError& e) {
    err << "tdt: usage error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "tdt: error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace tdt
