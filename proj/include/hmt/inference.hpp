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

// Beam search and greedy decoding for both decoder kinds.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hmt/model.hpp"
#include "hmt/tokens.hpp"

namespace hmt {

struct BeamConfig {
  std::size_t beam_size = 12;
  double alpha = 1.0;
  double max_len_factor = 2.0;
  std::size_t max_len_offset = 10;
  // Decode exactly this many steps with EOS disabled (profiling workloads).
  std::optional<std::size_t> forced_length;

  void validate() const;
};

struct DecodeOptions {
  bool precompute_kv = true;
  bool kv_cache = true;
  // When set, receives the wall time of each step divided by the number of
  // hypotheses expanded in it.
  std::vector<double>* step_seconds = nullptr;
};

struct Hypothesis {
  TokenSeq tokens;  // emitted ids, including the final EOS when finished by one
  double log_prob = 0.0;
  double score = 0.0;  // length-penalized, set once finished
  bool finished = false;
  DecoderState state;
};

struct BeamResult {
  TokenSeq best;
  double best_score = 0.0;
  double best_log_prob = 0.0;
  std::vector<Hypothesis> finished;  // best first
  std::size_t steps = 0;
};

struct GreedyResult {
  TokenSeq tokens;
  double log_prob = 0.0;
};

// sum_logprob / ((5 + length) / 6)^alpha. Throws ContractError for length 0.
double length_penalized_score(double sum_logprob, std::size_t length, double alpha);

// ceil(factor * src_len) + offset, at least 1; or the forced length.
std::size_t max_decode_length(std::size_t src_len, const BeamConfig& bc);

EncoderOutput prepare_decoding(const Model& model, std::span<const TokenId> src,
                               bool use_precompute);

BeamResult beam_search(const Model& model, std::span<const TokenId> src, const BeamConfig& bc,
                       const DecodeOptions& opts = {});

// Argmax each step until EOS or max_len; ties go to the lowest id.
GreedyResult greedy_decode(const Model& model, std::span<const TokenId> src, std::size_t max_len,
                           const DecodeOptions& opts = {});

// Tokens that may be emitted: everything except PAD and BOS (and EOS when
// `allow_eos` is false).
bool emittable(TokenId id, bool allow_eos);

// Strips a trailing EOS.
TokenSeq strip_eos(TokenSeq tokens);

}  // namespace hmt
