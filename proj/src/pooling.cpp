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

#include "tdt/pooling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tdt {

void SegmentationSpec::validate() const {
  if (kernel == 0 || stride == 0) throw ConfigError("segment kernel and stride must be positive");
  if (stride > kernel) {
    throw ConfigError("segment stride " + std::to_string(stride) + " exceeds kernel " + std::to_string(kernel) +
                      "; tokens between windows would be dropped");
  }
}

std::size_t SegmentationSpec::num_segments(std::size_t n_tokens) const {
  validate();
  if (n_tokens <= kernel) return 1;
  return (n_tokens - kernel + stride - 1) / stride + 1;
}

std::vector<SegmentSpan> segment_index_map(std::size_t n_tokens, const SegmentationSpec& spec) {
  if (n_tokens == 0) throw UsageError("segment_index_map needs at least one token");
  const std::size_t m = spec.num_segments(n_tokens);
  std::vector<SegmentSpan> out;
  out.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t start = j * spec.stride;
    out.push_back({start, spec.kernel, std::min(spec.kernel, n_tokens - start)});
  }
  return out;
}

Var pool_average(const Var& tokens, const SegmentationSpec& spec) {
  const Tensor& e = tokens.value();
  const std::size_t d = e.cols();
  auto spans = segment_index_map(e.rows(), spec);
  const double inv_k = 1.0 / static_cast<double>(spec.kernel);
  Tensor out({spans.size(), d});
  for (std::size_t j = 0; j < spans.size(); ++j) {
    auto s = out.row(j);
    for (std::size_t n = 0; n < spans[j].valid; ++n) {
      auto row = e.row(spans[j].start + n);
      for (std::size_t c = 0; c < d; ++c) s[c] += row[c];
    }
    for (double& v : s) v *= inv_k;
  }
  return make_op(std::move(out), "pool_average", {tokens},
                 [spans = std::move(spans), inv_k, d](detail::Node& self) {
                   Tensor& g = self.parents[0]->grad_buffer();
                   for (std::size_t j = 0; j < spans.size(); ++j) {
                     auto gs = self.grad.row(j);
                     for (std::size_t n = 0; n < spans[j].valid; ++n) {
                       auto gr = g.row(spans[j].start + n);
                       for (std::size_t c = 0; c < d; ++c) gr[c] += inv_k * gs[c];
                     }
                   }
                 });
}

Var pool_weighted(const Var& tokens, std::span<const double> weights, const SegmentationSpec& spec) {
  const Tensor& e = tokens.value();
  const std::size_t d = e.cols();
  if (weights.size() != e.rows()) {
    throw DimensionError("pool_weighted: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(e.rows()) + " tokens");
  }
  for (double p : weights) {
    if (!std::isfinite(p)) throw NumericError("pool_weighted: non-finite importance weight");
  }
  auto spans = segment_index_map(e.rows(), spec);
  // Normalized per-window weights, laid out [segment][slot].
  std::vector<double> alpha(spans.size() * spec.kernel, 0.0);
  Tensor out({spans.size(), d});
  for (std::size_t j = 0; j < spans.size(); ++j) {
    const SegmentSpan& sp = spans[j];
    double* a = alpha.data() + j * spec.kernel;
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < sp.valid; ++n) m = std::max(m, weights[sp.start + n]);
    double z = 0.0;
    for (std::size_t n = 0; n < sp.valid; ++n) z += (a[n] = std::exp(weights[sp.start + n] - m));
    auto s = out.row(j);
    for (std::size_t n = 0; n < sp.valid; ++n) {
      a[n] /= z;
      auto row = e.row(sp.start + n);
      for (std::size_t c = 0; c < d; ++c) s[c] += a[n] * row[c];
    }
  }
  const std::size_t k = spec.kernel;
  return make_op(std::move(out), "pool_weighted", {tokens},
                 [spans = std::move(spans), alpha = std::move(alpha), k, d](detail::Node& self) {
                   Tensor& g = self.parents[0]->grad_buffer();
                   for (std::size_t j = 0; j < spans.size(); ++j) {
                     auto gs = self.grad.row(j);
                     for (std::size_t n = 0; n < spans[j].valid; ++n) {
                       const double a = alpha[j * k + n];
                       auto gr = g.row(spans[j].start + n);
                       for (std::size_t c = 0; c < d; ++c) gr[c] += a * gs[c];
                     }
                   }
                 });
}

namespace {

std::string lowercase(std::string_view w) {
  std::string out(w);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::string stem(std::string_view word) {
  std::string w = lowercase(word);
  if (ends_with(w, "sses")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "s") && w.size() > 3) {
    w.pop_back();
  }
  if (ends_with(w, "ing") && w.size() - 3 >= 3) {
    w.resize(w.size() - 3);
  } else if (ends_with(w, "ed") && w.size() - 2 >= 3) {
    w.resize(w.size() - 2);
  }
  return w;
}

const std::unordered_set<std::string>& default_stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",    "the",   "and",  "or",    "but",   "if",    "of",    "to",   "in",
      "on",   "at",    "by",    "for",  "with",  "from",  "as",    "is",    "are",  "was",
      "were", "be",    "been",  "it",   "its",   "this",  "that",  "these", "those", "he",
      "she",  "they",  "we",    "you",  "i",     "his",   "her",   "their", "our",  "your",
      "not",  "no",    "so",    "than", "then",  "there", "which", "who",   "what", "will"};
  return words;
}

std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open stopword file '" + path + "'");
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    if (b < line.size()) words.insert(lowercase(std::string_view(line).substr(b)));
  }
  return words;
}

ImportanceLabels build_importance_labels(std::span<const std::string> doc_tokens,
                                         std::span<const std::string> ref_tokens,
                                         const std::unordered_set<std::string>& stopwords) {
  std::unordered_set<std::string> ref;
  for (const auto& r : ref_tokens) ref.insert(stem(r));
  ImportanceLabels labels(doc_tokens.size(), 0);
  for (std::size_t i = 0; i < doc_tokens.size(); ++i) {
    if (stopwords.contains(lowercase(doc_tokens[i]))) continue;
    labels[i] = ref.contains(stem(doc_tokens[i])) ? 1 : 0;
  }
  return labels;
}

ImportanceWeights labels_to_weights(std::span<const std::uint8_t> labels, double hi, double lo) {
  if (!(hi > lo)) throw ConfigError("labels_to_weights requires hi > lo");
  ImportanceWeights w(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = labels[i] ? hi : lo;
  return w;
}

std::vector<ImportanceLabels> read_label_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open label file '" + path + "'");
  std::vector<ImportanceLabels> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    ImportanceLabels doc;
    std::string tok;
    while (ls >> tok) {
      if (tok != "0" && tok != "1") {
        throw LoadError(path + ":" + std::to_string(lineno) + ": expected 0 or 1, got '" + tok + "'");
      }
      doc.push_back(tok == "1" ? 1 : 0);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_label_file(const std::string& path, std::span<const ImportanceLabels> docs) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write label file '" + path + "'");
  for (const auto& doc : docs) {
    for (std::size_t i = 0; i < doc.size(); ++i) out << (i ? " " : "") << (doc[i] ? '1' : '0');
    out << '\n';
  }
}

}  // namespace tdt
