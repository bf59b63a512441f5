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

#include "tdt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace tdt {

namespace {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<PoolingMode> kPoolingNames[] = {
    {PoolingMode::kAvg, "avg"}, {PoolingMode::kAda, "ada"}, {PoolingMode::kOracleAda, "oracle_ada"}};
constexpr EnumName<TopDownMode> kTopDownNames[] = {
    {TopDownMode::kCross, "cross"}, {TopDownMode::kConcat, "concat"}, {TopDownMode::kNone, "none"}};
constexpr EnumName<Readout> kReadoutNames[] = {{Readout::kAll, "all"}, {Readout::kLast, "last"}};

template <typename E, std::size_t N>
std::string name_of(const EnumName<E> (&table)[N], E v) {
  for (const auto& e : table) {
    if (e.value == v) return e.name;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_enum(const EnumName<E> (&table)[N], const std::string& s, const char* what) {
  for (const auto& e : table) {
    if (s == e.name) return e.value;
  }
  std::string options;
  for (const auto& e : table) options += std::string(options.empty() ? "" : ", ") + e.name;
  throw ConfigError(std::string("unknown ") + what + " '" + s + "' (expected one of: " + options + ")");
}

}  // namespace

std::string to_string(PoolingMode m) { return name_of(kPoolingNames, m); }
std::string to_string(TopDownMode m) { return name_of(kTopDownNames, m); }
std::string to_string(Readout r) { return name_of(kReadoutNames, r); }
PoolingMode parse_pooling_mode(const std::string& s) { return parse_enum(kPoolingNames, s, "pooling_mode"); }
TopDownMode parse_topdown_mode(const std::string& s) { return parse_enum(kTopDownNames, s, "topdown_mode"); }
Readout parse_readout(const std::string& s) { return parse_enum(kReadoutNames, s, "readout"); }

ModelConfig ModelConfig::paper_preset() {
  ModelConfig c;
  c.vocab_size = 50265;
  c.d_model = 1024;
  c.n_heads = 16;
  c.n_bottom_up = 8;
  c.n_segment = 2;
  c.n_top_down = 4;
  c.n_decoder = 12;
  c.window = 1024;
  c.kernel = 32;
  c.stride = 24;
  c.max_positions = 8192;
  return c;
}

ModelConfig ModelConfig::desk_preset() { return ModelConfig{}; }

void ModelConfig::validate() const {
  attention().validate();
  segmentation().validate();
  if (vocab_size < 4) throw ConfigError("vocab_size must be >= 4 (pad, bos, eos and one token)");
  if (max_positions == 0) throw ConfigError("max_positions must be positive");
  if (ffn_mult == 0) throw ConfigError("ffn_mult must be positive");
  if (d_model < 2) throw ConfigError("d_model must be >= 2");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["vocab_size"] = vocab_size;
  j["d_model"] = d_model;
  j["n_heads"] = n_heads;
  j["N1"] = n_bottom_up;
  j["N2"] = n_segment;
  j["N3"] = n_top_down;
  j["n_dec"] = n_decoder;
  if (window == kUnboundedWindow) {
    j["w"] = "inf";
  } else {
    j["w"] = window;
  }
  j["k"] = kernel;
  j["d_s"] = stride;
  j["max_positions"] = max_positions;
  j["ffn_mult"] = ffn_mult;
  j["pooling_mode"] = to_string(pooling);
  j["topdown_mode"] = to_string(topdown);
  j["readout"] = to_string(readout);
  j["tie_embeddings"] = tie_embeddings;
  j["dropout"] = dropout;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  auto size_field = [&](const char* key, std::size_t& dst) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned()) throw ConfigError(std::string("config field '") + key + "' must be a non-negative integer");
    dst = v.get<std::size_t>();
  };
  static const char* kKnown[] = {"vocab_size", "d_model", "n_heads", "N1", "N2", "N3", "n_dec", "w", "k", "d_s",
                                 "max_positions", "ffn_mult", "pooling_mode", "topdown_mode", "readout",
                                 "tie_embeddings", "dropout"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) { return key == k; }) ==
        std::end(kKnown)) {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  size_field("vocab_size", c.vocab_size);
  size_field("d_model", c.d_model);
  size_field("n_heads", c.n_heads);
  size_field("N1", c.n_bottom_up);
  size_field("N2", c.n_segment);
  size_field("N3", c.n_top_down);
  size_field("n_dec", c.n_decoder);
  if (j.contains("w") && j.at("w").is_string()) {
    if (j.at("w").get<std::string>() != "inf") throw ConfigError("config field 'w' must be an integer or \"inf\"");
    c.window = kUnboundedWindow;
  } else {
    size_field("w", c.window);
  }
  size_field("k", c.kernel);
  size_field("d_s", c.stride);
  size_field("max_positions", c.max_positions);
  size_field("ffn_mult", c.ffn_mult);
  try {
    if (j.contains("pooling_mode")) c.pooling = parse_pooling_mode(j.at("pooling_mode").get<std::string>());
    if (j.contains("topdown_mode")) c.topdown = parse_topdown_mode(j.at("topdown_mode").get<std::string>());
    if (j.contains("readout")) c.readout = parse_readout(j.at("readout").get<std::string>());
    if (j.contains("tie_embeddings")) c.tie_embeddings = j.at("tie_embeddings").get<bool>();
    if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

Parameter& ParameterStore::add(std::string name, Tensor value) {
  return params_.emplace_back(std::move(name), std::move(value));
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<std::size_t> corresponding_segments(std::size_t n_tokens, const SegmentationSpec& spec) {
  const auto spans = segment_index_map(n_tokens, spec);
  std::vector<std::size_t> out(n_tokens, 0);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    // Twice the distance to the window center keeps the comparison integral.
    std::size_t best = spans.size();
    std::size_t best_dist = 0;
    for (std::size_t j = 0; j < spans.size(); ++j) {
      if (i < spans[j].start || i >= spans[j].start + spans[j].length) continue;
      const std::size_t twice_center = 2 * spans[j].start + spans[j].length - 1;
      const std::size_t dist = 2 * i > twice_center ? 2 * i - twice_center : twice_center - 2 * i;
      if (best == spans.size() || dist < best_dist) {
        best = j;
        best_dist = dist;
      }
    }
    out[i] = best;
  }
  return out;
}

Var topdown_concat_update(const Var& tokens, const Var& segments, const ConcatParams& p,
                          const SegmentationSpec& spec) {
  const auto sigma = corresponding_segments(tokens.value().rows(), spec);
  if (segments.value().rows() != spec.num_segments(tokens.value().rows())) {
    throw DimensionError("concat update: segment count does not match the segmentation");
  }
  Var paired = concat_cols(tokens, gather_rows(segments, sigma));
  return add(tokens, layer_norm(linear(paired, p.proj), p.norm, kLayerNormEps));
}

namespace {

Tensor random_normal(Shape shape, double stddev, RngStream rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = stddev * rng.normal();
  return t;
}

class Initializer {
 public:
  Initializer(ParameterStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Parameter* tensor(const std::string& name, Shape shape, double stddev) {
    return &store_.add(name, random_normal(std::move(shape), stddev, rng_.split(counter_++)));
  }
  Parameter* constant(const std::string& name, Shape shape, double v) {
    ++counter_;
    return &store_.add(name, Tensor(std::move(shape), v));
  }
  LinearParams linear(const std::string& name, std::size_t din, std::size_t dout, bool bias = true) {
    LinearParams p;
    p.weight = tensor(name + ".weight", {din, dout}, std::sqrt(2.0 / static_cast<double>(din + dout)));
    if (bias) p.bias = constant(name + ".bias", {dout}, 0.0);
    return p;
  }
  LayerNormParams norm(const std::string& name, std::size_t d) {
    return {constant(name + ".gain", {d}, 1.0), constant(name + ".bias", {d}, 0.0)};
  }
  AttentionParams attention(const std::string& name, std::size_t d) {
    return {linear(name + ".query", d, d), linear(name + ".key", d, d), linear(name + ".value", d, d),
            linear(name + ".output", d, d)};
  }
  FfnParams ffn(const std::string& name, std::size_t d, std::size_t hidden) {
    return {linear(name + ".in", d, hidden), linear(name + ".out", hidden, d), norm(name + ".norm", d)};
  }

 private:
  ParameterStore& store_;
  RngStream rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build(seed);
  dropout_rng_ = RngStream(seed).split(0xD50);
}

void Model::build(std::uint64_t seed) {
  Initializer init(store_, seed);
  const std::size_t d = cfg_.d_model;
  const std::size_t hidden = cfg_.ffn_mult * d;
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(d));
  const std::size_t max_segments = cfg_.segmentation().num_segments(cfg_.max_positions);

  tok_emb_ = init.tensor("embed.tokens", {cfg_.vocab_size, d}, emb_std);
  pos_emb_ = init.tensor("embed.positions", {cfg_.max_positions, d}, emb_std);
  seg_pos_emb_ = init.tensor("segments.positions", {max_segments, d}, emb_std);
  dec_pos_emb_ = init.tensor("decoder.positions", {cfg_.max_positions, d}, emb_std);
  if (!cfg_.tie_embeddings) out_proj_ = init.tensor("decoder.out_proj", {d, cfg_.vocab_size}, emb_std);

  for (std::size_t l = 0; l < cfg_.n_bottom_up; ++l) {
    const std::string n = "bottom_up." + std::to_string(l);
    bottom_up_.push_back({init.attention(n + ".self_attn", d), init.norm(n + ".attn_norm", d),
                          init.ffn(n + ".ffn", d, hidden)});
  }
  for (std::size_t l = 0; l < cfg_.n_segment; ++l) {
    const std::string n = "segment." + std::to_string(l);
    segment_.push_back({init.attention(n + ".self_attn", d), init.norm(n + ".attn_norm", d),
                        init.ffn(n + ".ffn", d, hidden)});
  }
  for (std::size_t l = 0; l < cfg_.n_top_down; ++l) {
    const std::string n = "top_down." + std::to_string(l);
    TopDownLayerParams p;
    p.self_attn = init.attention(n + ".self_attn", d);
    p.attn_norm = init.norm(n + ".attn_norm", d);
    if (cfg_.topdown == TopDownMode::kCross) {
      p.cross = {init.attention(n + ".cross_attn", d), init.norm(n + ".cross_norm", d)};
    } else if (cfg_.topdown == TopDownMode::kConcat) {
      p.concat_proj = init.linear(n + ".concat_proj", 2 * d, d);
      p.concat_norm = init.norm(n + ".concat_norm", d);
    }
    p.ffn = init.ffn(n + ".ffn", d, hidden);
    top_down_.push_back(p);
  }
  for (std::size_t l = 0; l < cfg_.n_decoder; ++l) {
    const std::string n = "decoder." + std::to_string(l);
    decoder_.push_back({init.attention(n + ".self_attn", d), init.norm(n + ".self_norm", d),
                        init.attention(n + ".cross_attn", d), init.norm(n + ".cross_norm", d),
                        init.ffn(n + ".ffn", d, hidden)});
  }
}

Var Model::maybe_dropout(const Var& x) {
  if (!training_ || cfg_.dropout == 0.0) return x;
  return dropout(x, cfg_.dropout, dropout_rng_);
}

Var Model::embed(std::span<const std::int32_t> ids) {
  if (ids.empty()) throw InputError("empty token sequence");
  if (ids.size() > cfg_.max_positions) {
    throw InputError("sequence of " + std::to_string(ids.size()) + " tokens exceeds max_positions " +
                     std::to_string(cfg_.max_positions));
  }
  std::vector<std::int32_t> positions(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<std::int32_t>(i);
  return add(embedding(Var::of(*tok_emb_), ids), embedding(Var::of(*pos_emb_), positions));
}

Var Model::encoder_block(const Var& x, const EncoderLayerParams& p, const AttentionConfig& acfg,
                         OpCounter* counter) {
  Var attn = maybe_dropout(local_self_attention(x, p.self_attn, acfg, counter));
  Var h = layer_norm(add(x, attn), p.attn_norm, kLayerNormEps);
  DropoutCtx drop{training_ ? cfg_.dropout : 0.0, &dropout_rng_};
  return ffn_block(h, p.ffn, kLayerNormEps, &drop);
}

Var Model::encode_bottom_up(const Var& tokens, OpCounter* counter) {
  Var x = tokens;
  const AttentionConfig acfg = cfg_.attention();
  for (const auto& layer : bottom_up_) x = encoder_block(x, layer, acfg, counter);
  return x;
}

Var Model::encode_segments(const Var& tokens, const PoolingInputs* pooling, OpCounter* counter) {
  const SegmentationSpec spec = cfg_.segmentation();
  Var pooled;
  switch (cfg_.pooling) {
    case PoolingMode::kAvg:
      pooled = pool_average(tokens, spec);
      break;
    case PoolingMode::kAda:
      if (!pooling || !pooling->tagger_logits) throw ConfigError("pooling_mode 'ada' requires tagger weights");
      pooled = pool_weighted(tokens, *pooling->tagger_logits, spec);
      break;
    case PoolingMode::kOracleAda:
      if (!pooling || !pooling->oracle_labels) throw ConfigError("pooling_mode 'oracle_ada' requires oracle labels");
      pooled = pool_weighted(tokens, labels_to_weights(*pooling->oracle_labels, 1.0, 0.0), spec);
      break;
  }
  const std::size_t m = pooled.value().rows();
  std::vector<std::int32_t> positions(m);
  for (std::size_t j = 0; j < m; ++j) positions[j] = static_cast<std::int32_t>(j);
  Var s = add(pooled, embedding(Var::of(*seg_pos_emb_), positions));
  AttentionConfig acfg = cfg_.attention();
  acfg.window = kUnboundedWindow;
  for (const auto& layer : segment_) s = encoder_block(s, layer, acfg, counter);
  return s;
}

Var Model::encode_top_down(const Var& tokens, const Var& segments, OpCounter* counter) {
  Var x = tokens;
  const AttentionConfig acfg = cfg_.attention();
  DropoutCtx drop{training_ ? cfg_.dropout : 0.0, &dropout_rng_};
  for (const auto& layer : top_down_) {
    Var attn = maybe_dropout(local_self_attention(x, layer.self_attn, acfg, counter));
    x = layer_norm(add(x, attn), layer.attn_norm, kLayerNormEps);
    x = cross_attention_topdown(x, segments, layer.cross, acfg, counter);
    x = ffn_block(x, layer.ffn, kLayerNormEps, &drop);
  }
  return x;
}

Var Model::encode_top_down_concat(const Var& tokens, const Var& segments, OpCounter* counter) {
  Var x = tokens;
  const AttentionConfig acfg = cfg_.attention();
  const SegmentationSpec spec = cfg_.segmentation();
  DropoutCtx drop{training_ ? cfg_.dropout : 0.0, &dropout_rng_};
  for (const auto& layer : top_down_) {
    Var attn = maybe_dropout(local_self_attention(x, layer.self_attn, acfg, counter));
    x = layer_norm(add(x, attn), layer.attn_norm, kLayerNormEps);
    x = topdown_concat_update(x, segments, {layer.concat_proj, layer.concat_norm}, spec);
    x = ffn_block(x, layer.ffn, kLayerNormEps, &drop);
  }
  return x;
}

Var Model::encode(std::span<const std::int32_t> ids, const PoolingInputs* pooling, OpCounter* counter) {
  Var x = encode_bottom_up(embed(ids), counter);
  if (cfg_.topdown == TopDownMode::kNone) return x;
  Var s = encode_segments(x, pooling, counter);
  if (cfg_.topdown == TopDownMode::kConcat) return encode_top_down_concat(x, s, counter);
  return encode_top_down(x, s, counter);
}

Var Model::decode(std::span<const std::int32_t> prefix, const Var& memory, OpCounter* counter) {
  if (prefix.empty()) throw InputError("decoder prefix is empty");
  if (prefix.size() > cfg_.max_positions) throw InputError("decoder prefix exceeds max_positions");
  std::vector<std::int32_t> positions(prefix.size());
  for (std::size_t i = 0; i < prefix.size(); ++i) positions[i] = static_cast<std::int32_t>(i);
  Var x = add(embedding(Var::of(*tok_emb_), prefix), embedding(Var::of(*dec_pos_emb_), positions));
  Var mem = memory;
  if (cfg_.readout == Readout::kLast) {
    const std::size_t last = memory.value().rows() - 1;
    mem = gather_rows(memory, std::span<const std::size_t>(&last, 1));
  }
  AttentionConfig acfg = cfg_.attention();
  acfg.window = kUnboundedWindow;
  DropoutCtx drop{training_ ? cfg_.dropout : 0.0, &dropout_rng_};
  for (const auto& layer : decoder_) {
    Var self = maybe_dropout(
        multi_head_attention(x, x, x, layer.self_attn, acfg, MaskSpec::causal(), counter));
    x = layer_norm(add(x, self), layer.self_norm, kLayerNormEps);
    Var cross = maybe_dropout(multi_head_attention(x, mem, mem, layer.cross_attn, acfg, MaskSpec::full(), counter));
    x = layer_norm(add(x, cross), layer.cross_norm, kLayerNormEps);
    x = ffn_block(x, layer.ffn, kLayerNormEps, &drop);
  }
  if (out_proj_) return matmul(x, Var::of(*out_proj_));
  return matmul_transposed(x, Var::of(*tok_emb_));
}

Var sequence_cross_entropy(const Var& logits, std::span<const std::int32_t> targets, std::int32_t pad_id) {
  return cross_entropy(logits, targets, pad_id);
}

Var Model::loss(std::span<const std::int32_t> source, std::span<const std::int32_t> target,
                const PoolingInputs* pooling) {
  std::vector<std::int32_t> prefix;
  prefix.reserve(target.size() + 1);
  prefix.push_back(kBos);
  prefix.insert(prefix.end(), target.begin(), target.end());
  std::vector<std::int32_t> labels(target.begin(), target.end());
  labels.push_back(kEos);
  Var memory = encode(source, pooling, nullptr);
  return sequence_cross_entropy(decode(prefix, memory, nullptr), labels);
}

namespace {

std::int32_t argmax_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return static_cast<std::int32_t>(best);
}

std::vector<double> log_softmax(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (double v : row) z += std::exp(v - m);
  const double lz = m + std::log(z);
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] - lz;
  return out;
}

struct Hypothesis {
  std::vector<std::int32_t> tokens;  // without BOS
  double logprob = 0.0;
  double score() const { return logprob / static_cast<double>(std::max<std::size_t>(tokens.size(), 1)); }
};

bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score() != b.score()) return a.score() > b.score();
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<std::int32_t> Model::generate(std::span<const std::int32_t> source, const PoolingInputs* pooling,
                                          const GenerateOptions& opts) {
  if (opts.max_len == 0) throw ConfigError("max_len must be >= 1");
  const std::size_t max_len = std::min(opts.max_len, cfg_.max_positions - 1);
  Var memory = encode(source, pooling, nullptr);
  if (opts.strategy == DecodeStrategy::kGreedy) {
    std::vector<std::int32_t> prefix{kBos};
    std::vector<std::int32_t> out;
    while (out.size() < max_len) {
      Var logits = decode(prefix, memory, nullptr);
      const std::int32_t next = argmax_lowest(logits.value().row(logits.value().rows() - 1));
      out.push_back(next);
      prefix.push_back(next);
      if (next == kEos) break;
    }
    return out;
  }

  if (opts.beam_size == 0) throw ConfigError("beam size must be >= 1");
  const std::size_t beam = opts.beam_size;
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : live) {
      std::vector<std::int32_t> prefix{kBos};
      prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
      Var logits = decode(prefix, memory, nullptr);
      const auto lp = log_softmax(logits.value().row(logits.value().rows() - 1));
      std::vector<std::int32_t> order(lp.size());
      for (std::size_t j = 0; j < lp.size(); ++j) order[j] = static_cast<std::int32_t>(j);
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(beam, order.size())),
                        order.end(), [&](std::int32_t a, std::int32_t b) {
                          return lp[a] != lp[b] ? lp[a] > lp[b] : a < b;
                        });
      for (std::size_t r = 0; r < std::min(beam, order.size()); ++r) {
        Hypothesis c = h;
        c.tokens.push_back(order[r]);
        c.logprob += lp[static_cast<std::size_t>(order[r])];
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Hypothesis& a, const Hypothesis& b) {
      return a.logprob != b.logprob ? a.logprob > b.logprob : a.tokens < b.tokens;
    });
    live.clear();
    for (auto& c : candidates) {
      if (c.tokens.back() == kEos) {
        finished.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
      if (live.size() == beam) break;
    }
    if (finished.size() >= beam) break;
  }
  const std::vector<Hypothesis>& pool = finished.empty() ? live : finished;
  return std::min_element(pool.begin(), pool.end(), better)->tokens;
}

std::uint64_t Model::encoder_score_budget(std::size_t n_tokens) const {
  const std::size_t m = cfg_.segmentation().num_segments(n_tokens);
  const ScoreBudget b = count_budget(n_tokens, cfg_.window, m);
  std::uint64_t total = cfg_.n_bottom_up * b.local;
  if (cfg_.topdown == TopDownMode::kNone) return total;
  total += cfg_.n_segment * b.segment;
  total += cfg_.n_top_down * b.local;
  if (cfg_.topdown == TopDownMode::kCross) total += cfg_.n_top_down * b.cross;
  return total;
}

}  // namespace tdt
