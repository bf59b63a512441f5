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
#include "tdt/rouge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include "tdt/common.hpp"

namespace tdt {
namespace {

RougeScore make_score(double overlap, std::size_t hyp_count, std::size_t ref_count) {
  RougeScore s;
  if (hyp_count == 0 || ref_count == 0) return s;
  s.precision = overlap / static_cast<double>(hyp_count);
  s.recall = overlap / static_cast<double>(ref_count);
  if (s.precision + s.recall > 0.0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

template <typename T>
std::map<std::vector<T>, std::size_t> ngram_counts(std::span<const T> toks, std::size_t n) {
  std::map<std::vector<T>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[std::vector<T>(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

template <typename T>
RougeScore rouge_n_impl(std::span<const T> ref, std::span<const T> hyp, std::size_t n) {
  if (n == 0) throw UsageError("rouge_n needs n >= 1");
  const auto rc = ngram_counts(ref, n);
  const auto hc = ngram_counts(hyp, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : hc) {
    const auto it = rc.find(gram);
    if (it != rc.end()) overlap += std::min(count, it->second);
  }
  const std::size_t ref_total = ref.size() >= n ? ref.size() - n + 1 : 0;
  const std::size_t hyp_total = hyp.size() >= n ? hyp.size() - n + 1 : 0;
  return make_score(static_cast<double>(overlap), hyp_total, ref_total);
}

template <typename T>
std::size_t lcs_impl(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename T>
RougeScore rouge_l_impl(std::span<const T> ref, std::span<const T> hyp) {
  return make_score(static_cast<double>(lcs_impl(ref, hyp)), hyp.size(), ref.size());
}

}  // namespace

std::vector<std::string> rouge_tokenize(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::istringstream in(lowered);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

RougeScore rouge_n(std::span<const std::string> ref, std::span<const std::string> hyp, std::size_t n) {
  return rouge_n_impl(ref, hyp, n);
}
RougeScore rouge_n(std::span<const std::int32_t> ref, std::span<const std::int32_t> hyp, std::size_t n) {
  return rouge_n_impl(ref, hyp, n);
}
RougeScore rouge_l(std::span<const std::string> ref, std::span<const std::string> hyp) { return rouge_l_impl(ref, hyp); }
RougeScore rouge_l(std::span<const std::int32_t> ref, std::span<const std::int32_t> hyp) {
  return rouge_l_impl(ref, hyp);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) { return lcs_impl(a, b); }

RougeReport rouge(std::string_view ref, std::string_view hyp) {
  const auto r = rouge_tokenize(ref);
  const auto h = rouge_tokenize(hyp);
  return {rouge_n(r, h, 1), rouge_n(r, h, 2), rouge_l(r, h)};
}

}  // namespace tdt
