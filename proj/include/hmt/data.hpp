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

#pragma once

// Vocabularies, parallel corpora, synthetic tasks.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmt/tokens.hpp"

namespace hmt {

// Token <-> id bijection. Ids 0..3 are PAD, BOS, EOS, UNK.
class Vocabulary {
 public:
  Vocabulary();
  // Reserved entries are added first; `tokens` must not repeat.
  explicit Vocabulary(std::span<const std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  // UNK for unknown tokens.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  // Throws IndexError for ids >= size().
  const std::string& token(TokenId id) const;
  std::span<const std::string> tokens() const { return tokens_; }

  // One token per line, reserved entries excluded.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void insert(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Keeps the `cap` most frequent tokens (ties in lexicographic order).
Vocabulary build_vocab(std::span<const std::string> lines, std::size_t cap);
// Throws DataError if the file is unreadable or has no tokens.
Vocabulary build_vocab(const std::filesystem::path& corpus_path, std::size_t cap);

std::vector<std::string> split_tokens(std::string_view line);

enum class Role { kSource, kTarget };

// Sources get bare ids; targets get BOS ... EOS.
TokenSeq encode_line(const Vocabulary& vocab, std::string_view line, Role role);
// Drops BOS and PAD and stops at EOS.
std::string decode_ids(const Vocabulary& vocab, std::span<const TokenId> ids);

struct SentencePair {
  TokenSeq src;  // no BOS/EOS
  TokenSeq tgt;  // no BOS/EOS
  // Teacher output for the same source, when a distilled corpus is attached.
  std::optional<TokenSeq> distilled;
};

using ParallelCorpus = std::vector<SentencePair>;

// Throws DataError if unreadable.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

ParallelCorpus load_parallel(const std::filesystem::path& src_path,
                             const std::filesystem::path& tgt_path, const Vocabulary& src_vocab,
                             const Vocabulary& tgt_vocab);

enum class TaskKind { kCopy, kReverse, kRotate };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

// Lengths uniform in [1, max_len], ids uniform over the non-reserved range.
// rotate: tgt_i = 4 + (src_i - 4 + 1) mod (vocab_size - 4).
ParallelCorpus make_synthetic_task(TaskKind kind, std::size_t vocab_size, std::size_t max_len,
                                   std::size_t count, std::uint64_t seed);

// Tokens "w4" .. "w{size-1}" so synthetic ids have printable spellings.
Vocabulary synthetic_vocabulary(std::size_t size);

}  // namespace hmt
