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
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tdt/attention.hpp"
#include "tdt/pooling.hpp"

namespace tdt {

enum class PoolingMode { kAvg, kAda, kOracleAda };
enum class TopDownMode { kCross, kConcat, kNone };
/// Which encoder rows the decoder cross-attends to: every token, or only
/// the final source position (query-readout tasks).
enum class Readout { kAll, kLast };

std::string to_string(PoolingMode m);
std::string to_string(TopDownMode m);
std::string to_string(Readout r);
PoolingMode parse_pooling_mode(const std::string& s);
TopDownMode parse_topdown_mode(const std::string& s);
Readout parse_readout(const std::string& s);

struct ModelConfig {
  std::size_t vocab_size = 64;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_bottom_up = 2;  // N1
  std::size_t n_segment = 1;    // N2
  std::size_t n_top_down = 1;   // N3
  std::size_t n_decoder = 2;
  std::size_t window = 8;
  std::size_t kernel = 8;
  std::size_t stride = 6;
  std::size_t max_positions = 128;
  std::size_t ffn_mult = 4;
  PoolingMode pooling = PoolingMode::kAvg;
  TopDownMode topdown = TopDownMode::kCross;
  Readout readout = Readout::kAll;
  bool tie_embeddings = true;
  double dropout = 0.0;

  /// 8 bottom-up, 2 segment, 4 top-down and 12 decoder layers at BART-large width.
  static ModelConfig paper_preset();
  static ModelConfig desk_preset();

  void validate() const;
  AttentionConfig attention() const { return {d_model, n_heads, window}; }
  SegmentationSpec segmentation() const { return {kernel, stride}; }

  /// Keys: vocab_size, d_model, n_heads, N1, N2, N3, n_dec, w, k, d_s,
  /// max_positions, ffn_mult, pooling_mode, topdown_mode, readout,
  /// tie_embeddings, dropout. An unbounded window is written as "inf".
  nlohmann::json to_json() const;
  /// Missing keys keep their desk defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-forward inputs for the adaptive pooling modes.
struct PoolingInputs {
  /// Raw tagger logits, used directly as the pooling weights (ada mode).
  std::optional<ImportanceWeights> tagger_logits;
  /// Reference-derived labels, mapped through labels_to_weights(1, 0) (oracle_ada mode).
  std::optional<ImportanceLabels> oracle_labels;
};

struct EncoderLayerParams {
  AttentionParams self_attn;
  LayerNormParams attn_norm;
  FfnParams ffn;
};

struct TopDownLayerParams {
  AttentionParams self_attn;
  LayerNormParams attn_norm;
  CrossAttentionParams cross;  // topdown = cross
  LinearParams concat_proj;    // topdown = concat, 2d -> d
  LayerNormParams concat_norm;
  FfnParams ffn;
};

struct DecoderLayerParams {
  AttentionParams self_attn;
  LayerNormParams self_norm;
  AttentionParams cross_attn;
  LayerNormParams cross_norm;
  FfnParams ffn;
};

struct ConcatParams {
  LinearParams proj;
  LayerNormParams norm;
};

/// Owns parameters with stable addresses, in creation order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value);
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  Parameter* find(const std::string& name);
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const noexcept;
  void zero_grads();

 private:
  std::deque<Parameter> params_;
};

enum class DecodeStrategy { kGreedy, kBeam };

struct GenerateOptions {
  DecodeStrategy strategy = DecodeStrategy::kGreedy;
  std::size_t beam_size = 4;
  std::size_t max_len = 32;
};

/// Segment index whose window holds each token, choosing the nearest window
/// center and the lower index on ties.
std::vector<std::size_t> corresponding_segments(std::size_t n_tokens, const SegmentationSpec& spec);

/// Concat ablation sublayer: e + LayerNorm(W [e_i ; s_sigma(i)] + b).
Var topdown_concat_update(const Var& tokens, const Var& segments, const ConcatParams& p,
                          const SegmentationSpec& spec);

/// Top-down transformer encoder-decoder. Not copyable; a frozen instance may
/// serve concurrent read-only forwards.
class Model {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kBos = 1;
  static constexpr std::int32_t kEos = 2;

  Model(ModelConfig cfg, std::uint64_t seed);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const noexcept { return cfg_; }
  /// Only the pooling mode may change after construction (train with oracle
  /// weights, evaluate with tagger weights).
  void set_pooling_mode(PoolingMode m) noexcept { cfg_.pooling = m; }
  void set_training(bool on) noexcept { training_ = on; }

  ParameterStore& params() noexcept { return store_; }
  const ParameterStore& params() const noexcept { return store_; }

  /// Token plus learned absolute position embeddings, [N x d].
  Var embed(std::span<const std::int32_t> ids);
  /// N1 post-norm blocks of local self-attention and feed-forward.
  Var encode_bottom_up(const Var& tokens, OpCounter* counter);
  /// Pools per the configured mode, adds segment positions, then N2 blocks
  /// of full self-attention over the segments.
  Var encode_segments(const Var& tokens, const PoolingInputs* pooling, OpCounter* counter);
  /// N3 layers of local self-attention, token-segment cross-attention, feed-forward.
  Var encode_top_down(const Var& tokens, const Var& segments, OpCounter* counter);
  /// N3 layers with the concat update in place of cross-attention.
  Var encode_top_down_concat(const Var& tokens, const Var& segments, OpCounter* counter);
  /// embed -> bottom-up -> (segments -> top-down) per topdown mode.
  Var encode(std::span<const std::int32_t> ids, const PoolingInputs* pooling, OpCounter* counter);
  /// Next-token logits [T x vocab] for a decoder prefix that starts with BOS.
  Var decode(std::span<const std::int32_t> prefix, const Var& memory, OpCounter* counter);

  /// Teacher-forced loss: decoder reads [BOS] + target and predicts target + [EOS].
  Var loss(std::span<const std::int32_t> source, std::span<const std::int32_t> target,
           const PoolingInputs* pooling);

  /// Output includes the terminating EOS when one is produced.
  std::vector<std::int32_t> generate(std::span<const std::int32_t> source, const PoolingInputs* pooling,
                                     const GenerateOptions& opts);

  /// Per-head score evaluations of one encode over n tokens.
  std::uint64_t encoder_score_budget(std::size_t n_tokens) const;

  const std::vector<EncoderLayerParams>& bottom_up_layers() const noexcept { return bottom_up_; }
  const std::vector<EncoderLayerParams>& segment_layers() const noexcept { return segment_; }
  const std::vector<TopDownLayerParams>& top_down_layers() const noexcept { return top_down_; }
  const std::vector<DecoderLayerParams>& decoder_layers() const noexcept { return decoder_; }

 private:
  void build(std::uint64_t seed);
  Var encoder_block(const Var& x, const EncoderLayerParams& p, const AttentionConfig& acfg, OpCounter* counter);
  Var maybe_dropout(const Var& x);

  ModelConfig cfg_;
  ParameterStore store_;
  Parameter* tok_emb_ = nullptr;
  Parameter* pos_emb_ = nullptr;
  Parameter* seg_pos_emb_ = nullptr;
  Parameter* dec_pos_emb_ = nullptr;
  Parameter* out_proj_ = nullptr;  // only when embeddings are untied
  std::vector<EncoderLayerParams> bottom_up_;
  std::vector<EncoderLayerParams> segment_;
  std::vector<TopDownLayerParams> top_down_;
  std::vector<DecoderLayerParams> decoder_;
  bool training_ = false;
  RngStream dropout_rng_{0};
};

/// Mean token NLL over non-pad targets.
Var sequence_cross_entropy(const Var& logits, std::span<const std::int32_t> targets,
                           std::int32_t pad_id = Model::kPad);

enum class StorageType : std::uint8_t { kF64 = 0, kF32 = 1 };

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "TDTX", u32 version, u32 length + JSON config, u32 parameter count, then
/// per parameter: u32 length + name, u8 dtype, u32 rank, u64 extents, data.
/// Everything little-endian.
void save_checkpoint(const Model& model, const std::string& path, StorageType dtype = StorageType::kF64);
Model load_checkpoint(const std::string& path);
std::vector<std::uint8_t> serialize_checkpoint(const Model& model, StorageType dtype = StorageType::kF64);
Model deserialize_checkpoint(std::span<const std::uint8_t> bytes);

/// Vocabulary file: one token per line, id = zero-based line number.
std::vector<std::string> load_vocabulary(const std::string& path);

}  // namespace tdt
