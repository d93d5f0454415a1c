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

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "hmt/data.hpp"
#include "hmt/errors.hpp"

namespace hmt {

Vocabulary::Vocabulary() {
  for (std::string_view t : {kPadToken, kBosToken, kEosToken, kUnkToken}) insert(std::string(t));
}

Vocabulary::Vocabulary(std::span<const std::string> tokens) : Vocabulary() {
  for (const std::string& t : tokens) {
    if (index_.contains(t)) throw DataError("vocabulary: duplicate token '" + t + "'");
    insert(t);
  }
}

void Vocabulary::insert(std::string token) {
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw IndexError("vocabulary: id " + std::to_string(id) + " outside size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  write_lines(path, std::span(tokens_).subspan(kNumReserved));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  const std::vector<std::string> lines = read_lines(path);
  std::vector<std::string> tokens;
  for (const std::string& line : lines) {
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocabulary(tokens);
}

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

Vocabulary build_vocab(std::span<const std::string> lines, std::size_t cap) {
  std::map<std::string, std::size_t> counts;
  for (const std::string& line : lines) {
    for (std::string& t : split_tokens(line)) ++counts[std::move(t)];
  }
  const Vocabulary reserved;
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, n] : counts) {
    if (!reserved.contains(token)) ranked.emplace_back(token, n);
  }
  if (ranked.empty()) throw DataError("build_vocab: corpus has no tokens");
  // std::map iteration is already lexicographic, so a stable sort on count
  // leaves ties in that order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > cap) ranked.resize(cap);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [token, n] : ranked) tokens.push_back(std::move(token));
  return Vocabulary(tokens);
}

Vocabulary build_vocab(const std::filesystem::path& corpus_path, std::size_t cap) {
  return build_vocab(read_lines(corpus_path), cap);
}

TokenSeq encode_line(const Vocabulary& vocab, std::string_view line, Role role) {
  TokenSeq ids;
  if (role == Role::kTarget) ids.push_back(kBos);
  for (const std::string& t : split_tokens(line)) ids.push_back(vocab.id(t));
  if (role == Role::kTarget) ids.push_back(kEos);
  return ids;
}

std::string decode_ids(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) {
    if (id == kEos) break;
    if (id == kBos || id == kPad) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  if (in.bad()) throw DataError("error reading '" + path.string() + "'");
  return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const std::string& line : lines) out << line << '\n';
  if (!out) throw DataError("error writing '" + path.string() + "'");
}

}  // namespace hmt
