// Copyright 2026 The HybridMT Authors
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

#include "hmt/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "hmt/errors.hpp"

namespace hmt {

namespace {

constexpr std::array<char, 8> kMagic = {'H', 'M', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kHeaderBytes = kMagic.size() + 4 + 8;

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<unsigned char>& buffer() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::vector<unsigned char> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError("checkpoint: malformed record extends past body");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const unsigned char> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params) {
  Writer body;
  const std::string config = cfg.to_text();
  body.u32(static_cast<std::uint32_t>(config.size()));
  body.bytes(config);
  const auto entries = params.store.entries();
  body.u32(static_cast<std::uint32_t>(entries.size()));
  for (const NamedTensor& e : entries) {
    body.u32(static_cast<std::uint32_t>(e.name.size()));
    body.bytes(e.name);
    body.u32(static_cast<std::uint32_t>(e.tensor.rank()));
    for (std::size_t d : e.tensor.shape()) body.u64(d);
    for (double v : e.tensor.data()) body.f64(v);
  }

  Writer file;
  file.bytes(std::string_view(kMagic.data(), kMagic.size()));
  file.u32(kCheckpointVersion);
  file.u64(body.buffer().size());
  auto& out = file.buffer();
  out.insert(out.end(), body.buffer().begin(), body.buffer().end());
  file.u64(fnv1a(body.buffer()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint '" + path.string() + "'");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("error writing checkpoint '" + path.string() + "'");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read checkpoint '" + path.string() + "'");
  const std::vector<unsigned char> file((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  const std::string where = " ('" + path.string() + "')";
  if (file.size() < kMagic.size() || std::memcmp(file.data(), kMagic.data(), kMagic.size()) != 0) {
    if (file.size() < kMagic.size()) throw CheckpointTruncatedError("checkpoint: truncated header" + where);
    throw CheckpointError("checkpoint: bad magic" + where);
  }
  if (file.size() < kHeaderBytes) throw CheckpointTruncatedError("checkpoint: truncated header" + where);
  Reader header(std::span<const unsigned char>(file).subspan(kMagic.size(), 12));
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint: version " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion) + where);
  }
  const std::uint64_t body_bytes = header.u64();
  if (file.size() - kHeaderBytes < body_bytes || file.size() - kHeaderBytes - body_bytes < 8) {
    throw CheckpointTruncatedError("checkpoint: " + std::to_string(file.size()) +
                                   " bytes, header promises " +
                                   std::to_string(kHeaderBytes + body_bytes + 8) + where);
  }
  const auto body = std::span<const unsigned char>(file).subspan(kHeaderBytes, body_bytes);
  Reader trailer(std::span<const unsigned char>(file).subspan(kHeaderBytes + body_bytes));
  if (trailer.u64() != fnv1a(body)) throw CheckpointChecksumError("checkpoint: checksum mismatch" + where);
  if (!trailer.done()) throw CheckpointError("checkpoint: trailing bytes" + where);

  Reader in(body);
  LoadedCheckpoint out;
  out.config = ModelConfig::parse(in.bytes(in.u32()));
  out.params = std::make_shared<ModelParams>(init_params(out.config, 0));
  ParamStore& store = out.params->store;
  const std::uint32_t count = in.u32();
  if (count != store.entries().size()) {
    throw CheckpointError("checkpoint: " + std::to_string(count) + " tensors, config needs " +
                          std::to_string(store.entries().size()) + where);
  }
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = in.bytes(in.u32());
    if (!store.contains(name) || !seen.insert(name).second) {
      throw CheckpointError("checkpoint: unexpected tensor '" + name + "'" + where);
    }
    Tensor target = store.get(name);
    Shape shape(in.u32());
    for (std::size_t& d : shape) d = in.u64();
    if (shape != target.shape()) {
      throw CheckpointError("checkpoint: tensor '" + name + "' has shape " + to_string(shape) +
                            ", config needs " + to_string(target.shape()) + where);
    }
    for (double& v : target.mutable_data()) v = in.f64();
  }
  if (!in.done()) throw CheckpointError("checkpoint: trailing body bytes" + where);
  store.bump_version();
  return out;
}

Model load_model(const std::filesystem::path& path) {
  LoadedCheckpoint ck = load_checkpoint(path);
  return Model(ck.config, ck.params);
}

}  // namespace hmt
