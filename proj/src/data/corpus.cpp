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

#include "hmt/data.hpp"
#include "hmt/errors.hpp"
#include "hmt/rng.hpp"

namespace hmt {

ParallelCorpus load_parallel(const std::filesystem::path& src_path,
                             const std::filesystem::path& tgt_path, const Vocabulary& src_vocab,
                             const Vocabulary& tgt_vocab) {
  const std::vector<std::string> src = read_lines(src_path);
  const std::vector<std::string> tgt = read_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw DataError("parallel corpus: " + std::to_string(src.size()) + " source lines vs " +
                    std::to_string(tgt.size()) + " target lines");
  }
  ParallelCorpus corpus;
  for (std::size_t i = 0; i < src.size(); ++i) {
    SentencePair p;
    p.src = encode_line(src_vocab, src[i], Role::kSource);
    const TokenSeq t = encode_line(tgt_vocab, tgt[i], Role::kTarget);
    p.tgt.assign(t.begin() + 1, t.end() - 1);
    if (p.src.empty()) continue;
    corpus.push_back(std::move(p));
  }
  if (corpus.empty()) throw DataError("parallel corpus '" + src_path.string() + "' is empty");
  return corpus;
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy: return "copy";
    case TaskKind::kReverse: return "reverse";
    case TaskKind::kRotate: return "rotate";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view name) {
  if (name == "copy") return TaskKind::kCopy;
  if (name == "reverse") return TaskKind::kReverse;
  if (name == "rotate" || name == "vocab-rotate") return TaskKind::kRotate;
  throw ConfigError("unknown task '" + std::string(name) + "' (copy, reverse, rotate)");
}

ParallelCorpus make_synthetic_task(TaskKind kind, std::size_t vocab_size, std::size_t max_len,
                                   std::size_t count, std::uint64_t seed) {
  if (vocab_size <= kNumReserved) {
    throw ConfigError("synthetic task: vocab size must exceed " + std::to_string(kNumReserved));
  }
  if (max_len == 0) throw ConfigError("synthetic task: max_len must be positive");
  const std::size_t range = vocab_size - kNumReserved;
  Rng rng(seed);
  ParallelCorpus corpus(count);
  for (SentencePair& p : corpus) {
    const std::size_t len = 1 + rng.below(max_len);
    p.src.resize(len);
    for (TokenId& t : p.src) t = static_cast<TokenId>(kNumReserved + rng.below(range));
    p.tgt = p.src;
    switch (kind) {
      case TaskKind::kCopy:
        break;
      case TaskKind::kReverse:
        std::reverse(p.tgt.begin(), p.tgt.end());
        break;
      case TaskKind::kRotate:
        for (TokenId& t : p.tgt) t = static_cast<TokenId>(kNumReserved + (t - kNumReserved + 1) % range);
        break;
    }
  }
  return corpus;
}

Vocabulary synthetic_vocabulary(std::size_t size) {
  std::vector<std::string> tokens;
  for (std::size_t i = kNumReserved; i < size; ++i) tokens.push_back("w" + std::to_string(i));
  return Vocabulary(tokens);
}

}  // namespace hmt
