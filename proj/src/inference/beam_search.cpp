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

#include "hmt/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "hmt/errors.hpp"
#include "hmt/ops.hpp"
#include "hmt/timing.hpp"

namespace hmt {

void BeamConfig::validate() const {
  if (beam_size == 0) throw ConfigError("beam size must be at least 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("length penalty alpha must be >= 0");
  if (!(max_len_factor >= 0.0) || !std::isfinite(max_len_factor)) {
    throw ConfigError("max length factor must be >= 0");
  }
  if (forced_length && *forced_length == 0) throw ConfigError("forced length must be positive");
}

double length_penalized_score(double sum_logprob, std::size_t length, double alpha) {
  if (length == 0) throw ContractError("length_penalized_score: length must be >= 1");
  return sum_logprob / std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

std::size_t max_decode_length(std::size_t src_len, const BeamConfig& bc) {
  if (bc.forced_length) return *bc.forced_length;
  const auto scaled = static_cast<std::size_t>(std::ceil(bc.max_len_factor * static_cast<double>(src_len)));
  return std::max<std::size_t>(1, scaled + bc.max_len_offset);
}

EncoderOutput prepare_decoding(const Model& model, std::span<const TokenId> src,
                               bool use_precompute) {
  EncoderOutput enc = encode(model, src);
  if (use_precompute) {
    precompute_attention(model, enc);
  } else if (model.config().decoder_kind == DecoderKind::kGru &&
             model.config().attention_kind == AttentionKind::kAdditive) {
    // Additive attention always reuses the per-sentence key projection.
    precompute_attention(model, enc);
  }
  return enc;
}

bool emittable(TokenId id, bool allow_eos) {
  if (id == kPad || id == kBos) return false;
  return allow_eos || id != kEos;
}

TokenSeq strip_eos(TokenSeq tokens) {
  if (!tokens.empty() && tokens.back() == kEos) tokens.pop_back();
  return tokens;
}

namespace {

std::vector<double> step_log_probs(const Model& model, const EncoderOutput& enc,
                                   const DecoderState& state, TokenId prev, DecoderState& next) {
  StepOutput out = decode_step(model, enc, state, prev);
  next = std::move(out.state);
  ScopedTiming timing(Category::kSoftmax);
  const Tensor lp = log_softmax(out.logits, 1);
  return {lp.data().begin(), lp.data().end()};
}

struct Candidate {
  double log_prob;
  TokenId token;
  std::size_t parent;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.token != b.token) return a.token < b.token;
  return a.parent < b.parent;
}

class StepClock {
 public:
  explicit StepClock(std::vector<double>* sink) : sink_(sink) {
    if (sink_) start_ = std::chrono::steady_clock::now();
  }
  void finish(std::size_t expanded) {
    if (!sink_) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    sink_->push_back(s / static_cast<double>(std::max<std::size_t>(1, expanded)));
  }

 private:
  std::vector<double>* sink_;
  std::chrono::steady_clock::time_point start_{};
};

// Keeps at most `cap` finished hypotheses, best first; earlier entries win ties.
void add_finished(std::vector<Hypothesis>& pool, Hypothesis h, std::size_t cap) {
  auto pos = std::upper_bound(pool.begin(), pool.end(), h.score,
                              [](double s, const Hypothesis& x) { return s > x.score; });
  if (static_cast<std::size_t>(pos - pool.begin()) >= cap) return;
  pool.insert(pos, std::move(h));
  if (pool.size() > cap) pool.pop_back();
}

}  // namespace

BeamResult beam_search(const Model& model, std::span<const TokenId> src, const BeamConfig& bc,
                       const DecodeOptions& opts) {
  bc.validate();
  const EncoderOutput enc = prepare_decoding(model, src, opts.precompute_kv);
  ScopedTiming decoding(Category::kDecoding);

  const std::size_t max_len = max_decode_length(src.size(), bc);
  const bool allow_eos = !bc.forced_length;
  const std::size_t vocab = model.config().tgt_vocab;
  const double best_lp_divisor = std::pow((5.0 + static_cast<double>(max_len)) / 6.0, bc.alpha);

  std::vector<Hypothesis> live(1);
  live[0].state = initial_state(model, enc, opts.kv_cache);
  BeamResult result;
  std::vector<Candidate> candidates;
  std::vector<DecoderState> next_states;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    StepClock clock(opts.step_seconds);
    candidates.clear();
    next_states.assign(live.size(), DecoderState{});
    for (std::size_t i = 0; i < live.size(); ++i) {
      const TokenId prev = live[i].tokens.empty() ? kBos : live[i].tokens.back();
      const std::vector<double> lp = step_log_probs(model, enc, live[i].state, prev, next_states[i]);
      // Only the best beam_size tokens of one parent can survive selection.
      std::vector<Candidate> local;
      local.reserve(vocab);
      for (TokenId t = 0; t < vocab; ++t) {
        if (emittable(t, allow_eos)) local.push_back({live[i].log_prob + lp[t], t, i});
      }
      const std::size_t keep = std::min(bc.beam_size, local.size());
      std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end(), better);
      candidates.insert(candidates.end(), local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep));
    }
    const std::size_t keep = std::min(bc.beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);

    std::vector<Hypothesis> next_live;
    const bool last_step = step + 1 == max_len;
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = candidates[c];
      Hypothesis h;
      h.tokens = live[cand.parent].tokens;
      h.tokens.push_back(cand.token);
      h.log_prob = cand.log_prob;
      if (cand.token == kEos || last_step) {
        h.finished = true;
        h.score = length_penalized_score(h.log_prob, h.tokens.size(), bc.alpha);
        add_finished(result.finished, std::move(h), bc.beam_size);
      } else {
        h.state = next_states[cand.parent];
        next_live.push_back(std::move(h));
      }
    }
    clock.finish(live.size());
    live = std::move(next_live);
    result.steps = step + 1;

    // Log-probs only fall and the penalty divisor only grows with length, so
    // no live hypothesis can score above log_prob / lp(max_len).
    if (allow_eos && result.finished.size() == bc.beam_size && !live.empty()) {
      double best_live = -std::numeric_limits<double>::infinity();
      for (const Hypothesis& h : live) best_live = std::max(best_live, h.log_prob / best_lp_divisor);
      if (best_live < result.finished.back().score) break;
    }
  }

  if (result.finished.empty()) throw ContractError("beam_search: no hypothesis finished");
  const Hypothesis& best = result.finished.front();
  result.best = best.tokens;
  result.best_score = best.score;
  result.best_log_prob = best.log_prob;
  return result;
}

GreedyResult greedy_decode(const Model& model, std::span<const TokenId> src, std::size_t max_len,
                           const DecodeOptions& opts) {
  if (max_len == 0) throw ConfigError("greedy_decode: max_len must be positive");
  const EncoderOutput enc = prepare_decoding(model, src, opts.precompute_kv);
  ScopedTiming decoding(Category::kDecoding);
  DecoderState state = initial_state(model, enc, opts.kv_cache);
  GreedyResult result;
  TokenId prev = kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    StepClock clock(opts.step_seconds);
    DecoderState next;
    const std::vector<double> lp = step_log_probs(model, enc, state, prev, next);
    TokenId best = kEos;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (TokenId t = 0; t < lp.size(); ++t) {
      if (emittable(t, true) && lp[t] > best_lp) {
        best = t;
        best_lp = lp[t];
      }
    }
    result.tokens.push_back(best);
    result.log_prob += best_lp;
    clock.finish(1);
    if (best == kEos) break;
    state = std::move(next);
    prev = best;
  }
  return result;
}

}  // namespace hmt
