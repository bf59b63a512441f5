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

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tdt/model.hpp"

namespace tdt {

namespace {

constexpr char kMagic[4] = {'T', 'D', 'T', 'X'};

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T v) {
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void str(const std::string& s) {
    le<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T le(const char* what) {
    need(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<std::make_unsigned_t<T>>(in_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  std::string str(const char* what) {
    const auto n = le<std::uint32_t>(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (in_.size() - pos_ < n) throw LoadError(std::string("checkpoint truncated while reading ") + what);
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model, StorageType dtype) {
  ByteWriter w;
  w.raw(kMagic, sizeof(kMagic));
  w.le<std::uint32_t>(kCheckpointVersion);
  w.str(model.config().to_json().dump());
  const auto params = model.params().all();
  w.le<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.str(p->name);
    w.le<std::uint8_t>(static_cast<std::uint8_t>(dtype));
    w.le<std::uint32_t>(static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t e : p->value.shape()) w.le<std::uint64_t>(e);
    for (double v : p->value.data()) {
      if (dtype == StorageType::kF64) {
        w.le<std::uint64_t>(std::bit_cast<std::uint64_t>(v));
      } else {
        w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }
  return w.take();
}

Model deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw LoadError("not a checkpoint: bad magic bytes");
  const auto version = r.le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_json(nlohmann::json::parse(r.str("config")));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint config is not valid JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint config rejected: ") + e.what());
  }
  Model model(cfg, 0);
  auto params = model.params().all();
  const auto count = r.le<std::uint32_t>("parameter count");
  if (count != params.size()) {
    throw LoadError("checkpoint holds " + std::to_string(count) + " parameters, config expects " +
                    std::to_string(params.size()));
  }
  for (Parameter* p : params) {
    const std::string name = r.str("parameter name");
    if (name != p->name) throw LoadError("expected parameter '" + p->name + "', found '" + name + "'");
    const auto tag = r.le<std::uint8_t>("dtype");
    if (tag > 1) throw LoadError("parameter '" + name + "' has unknown dtype tag " + std::to_string(tag));
    const auto rank = r.le<std::uint32_t>("rank");
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.le<std::uint64_t>("extent"));
    if (shape != p->value.shape()) {
      throw LoadError("parameter '" + name + "' has shape " + shape_str(shape) + ", expected " +
                      shape_str(p->value.shape()));
    }
    for (double& v : p->value.data()) {
      if (tag == 0) {
        v = std::bit_cast<double>(r.le<std::uint64_t>("data"));
      } else {
        v = static_cast<double>(std::bit_cast<float>(r.le<std::uint32_t>("data")));
      }
    }
    p->zero_grad();
  }
  if (!r.done()) throw LoadError("trailing bytes after the last parameter");
  return model;
}

void save_checkpoint(const Model& model, const std::string& path, StorageType dtype) {
  const auto bytes = serialize_checkpoint(model, dtype);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

std::vector<std::string> load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary file '" + path + "'");
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return vocab;
}

}  // namespace tdt
