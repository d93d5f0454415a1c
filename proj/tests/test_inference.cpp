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

#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "hmt/errors.hpp"
#include "hmt/inference.hpp"
#include "oracles.hpp"

using namespace hmt;

namespace {

// Random toy model with sharpened output distributions so that searches of
// different widths actually disagree.
Model toy_model(const ModelConfig& c, std::uint64_t seed, double sharpen = 4.0) {
  Model m(c, seed);
  for (double& v : m.params().out_w.mutable_data()) v *= sharpen;
  m.params().store.bump_version();
  return m;
}

ModelConfig toy_config(bool transformer, std::size_t vocab) {
  return transformer ? testutil::tiny_transformer(8, vocab, 1) : testutil::tiny_hybrid(8, vocab);
}

BeamConfig fixed_length(std::size_t beam, std::size_t max_len, double alpha) {
  BeamConfig bc;
  bc.beam_size = beam;
  bc.alpha = alpha;
  bc.max_len_factor = 0.0;
  bc.max_len_offset = max_len;
  return bc;
}

}  // namespace

TEST(LengthPenalty, Examples) {
  EXPECT_EQ(length_penalized_score(-3.5, 9, 0.0), -3.5);
  EXPECT_EQ(length_penalized_score(-3.5, 1, 0.6), -3.5);
  EXPECT_EQ(length_penalized_score(-3.0, 7, 1.0), -1.5);
  EXPECT_THROW(length_penalized_score(-1.0, 0, 1.0), ContractError);
}

TEST(BeamConfigTest, DefaultsAndValidation) {
  const BeamConfig bc;
  EXPECT_EQ(bc.beam_size, 12u);
  EXPECT_EQ(bc.alpha, 1.0);
  EXPECT_EQ(max_decode_length(5, bc), 20u);
  BeamConfig bad;
  bad.beam_size = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = BeamConfig{};
  bad.alpha = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_EQ(max_decode_length(3, fixed_length(1, 0, 1.0)), 1u);
  BeamConfig forced;
  forced.forced_length = 7;
  EXPECT_EQ(max_decode_length(100, forced), 7u);
}

TEST(Emittable, ReservedTokens) {
  EXPECT_FALSE(emittable(kPad, true));
  EXPECT_FALSE(emittable(kBos, true));
  EXPECT_TRUE(emittable(kEos, true));
  EXPECT_FALSE(emittable(kEos, false));
  EXPECT_TRUE(emittable(kUnk, false));
  EXPECT_EQ(strip_eos({4, 5, kEos}), (TokenSeq{4, 5}));
  EXPECT_EQ(strip_eos({4, 5}), (TokenSeq{4, 5}));
}

TEST(BeamSearch, WidthOneEqualsGreedy) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const ModelConfig c = toy_config(trial % 2 == 1, 7 + trial % 5);
    const Model m = toy_model(c, 100 + trial, 1.0 + trial % 4);
    const TokenSeq src = testutil::random_ids(rng, 1 + rng.below(6), c.src_vocab);
    const BeamConfig bc = fixed_length(1, 2 + trial % 7, 1.0);
    const BeamResult beam = beam_search(m, src, bc);
    const GreedyResult greedy = greedy_decode(m, src, max_decode_length(src.size(), bc));
    EXPECT_EQ(beam.best, greedy.tokens) << "trial " << trial;
    EXPECT_EQ(beam.best_log_prob, greedy.log_prob);
  }
}

TEST(BeamSearch, WideBeamMatchesExhaustiveEnumeration) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelConfig c = toy_config(trial % 2 == 0, 5);
    const Model m = toy_model(c, 200 + trial, 1.0 + trial % 5);
    const TokenSeq src = testutil::random_ids(rng, 1 + rng.below(4), c.src_vocab);
    for (double alpha : {0.0, 0.6, 1.0}) {
      const oracle::Best ref = oracle::exhaustive_beam(m, src, 3, alpha);
      const BeamResult got = beam_search(m, src, fixed_length(125, 3, alpha));
      EXPECT_EQ(got.best, TokenSeq(ref.tokens.begin(), ref.tokens.end()));
      EXPECT_NEAR(got.best_score, ref.score, 1e-12);
    }
  }
}

TEST(BeamSearch, NoWidthBeatsExhaustiveSearch) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelConfig c = toy_config(trial % 2 == 0, 6);
    const Model m = toy_model(c, 300 + trial);
    const TokenSeq src = testutil::random_ids(rng, 3, c.src_vocab);
    const double best = beam_search(m, src, fixed_length(500, 3, 1.0)).best_score;
    for (std::size_t k = 1; k <= 6; ++k) {
      EXPECT_LE(beam_search(m, src, fixed_length(k, 3, 1.0)).best_score, best + 1e-12);
    }
  }
}

// Beam search is not monotone in width in general. Count violations over
// random toy models; they must be rare, not absent.
TEST(BeamSearch, WiderBeamsRarelyScoreWorse) {
  Rng rng(4);
  int comparisons = 0, violations = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const ModelConfig c = toy_config(trial % 2 == 0, 9);
    const Model m = toy_model(c, 400 + trial);
    const TokenSeq src = testutil::random_ids(rng, 4, c.src_vocab);
    double prev = -1e300;
    for (std::size_t k = 1; k <= 8; ++k) {
      const double s = beam_search(m, src, fixed_length(k, 6, 1.0)).best_score;
      ++comparisons;
      if (s < prev - 1e-12) ++violations;
      prev = std::max(prev, s);
    }
  }
  RecordProperty("violations", violations);
  EXPECT_LE(violations * 10, comparisons);
}

TEST(BeamSearch, OptimizationFlagsChangeNoOutput) {
  Rng rng(5);
  for (bool transformer : {false, true}) {
    ModelConfig c = toy_config(transformer, 11);
    c.attention_kind = AttentionKind::kMultiHead;
    c.fused_weights = false;
    const Model plain = toy_model(c, 500);
    const Model fused = plain.with_fused_weights(true);
    for (int s = 0; s < 5; ++s) {
      const TokenSeq src = testutil::random_ids(rng, 5, c.src_vocab);
      const BeamConfig bc = fixed_length(4, 8, 1.0);
      const TokenSeq ref = beam_search(fused, src, bc).best;
      for (bool pre : {false, true})
        for (bool cache : {false, true})
          for (const Model* m : {&plain, &fused}) EXPECT_EQ(beam_search(*m, src, bc, {pre, cache}).best, ref);
    }
  }
}

TEST(BeamSearch, TerminationInvariants) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelConfig c = toy_config(trial % 2 == 0, 8);
    const Model m = toy_model(c, 600 + trial);
    const TokenSeq src = testutil::random_ids(rng, 3, c.src_vocab);
    const BeamConfig bc = fixed_length(4, 5, 1.0);
    const BeamResult r = beam_search(m, src, bc);
    ASSERT_FALSE(r.finished.empty());
    EXPECT_LE(r.finished.size(), bc.beam_size);
    EXPECT_LE(r.steps, 5u);
    EXPECT_EQ(r.best, r.finished.front().tokens);
    for (std::size_t i = 0; i < r.finished.size(); ++i) {
      const Hypothesis& h = r.finished[i];
      EXPECT_TRUE(h.finished);
      EXPECT_LE(h.tokens.size(), 5u);
      EXPECT_TRUE(h.tokens.back() == kEos || h.tokens.size() == 5u);
      for (std::size_t t = 0; t + 1 < h.tokens.size(); ++t) EXPECT_NE(h.tokens[t], kEos);
      for (TokenId t : h.tokens) EXPECT_TRUE(emittable(t, true));
      EXPECT_LE(h.log_prob, 0.0);
      EXPECT_EQ(h.score, length_penalized_score(h.log_prob, h.tokens.size(), 1.0));
      if (i > 0) {
        EXPECT_LE(h.score, r.finished[i - 1].score);
      }
    }
  }
}

TEST(BeamSearch, ForcedLengthSuppressesEos) {
  const Model m = toy_model(toy_config(true, 9), 700);
  BeamConfig bc;
  bc.beam_size = 3;
  bc.forced_length = 12;
  std::vector<double> steps;
  const BeamResult r = beam_search(m, TokenSeq{4, 5}, bc, {true, true, &steps});
  EXPECT_EQ(r.best.size(), 12u);
  for (TokenId t : r.best) EXPECT_NE(t, kEos);
  EXPECT_EQ(r.steps, 12u);
  EXPECT_EQ(steps.size(), 12u);
}

TEST(BeamSearch, Deterministic) {
  const Model m = toy_model(toy_config(false, 10), 800);
  const TokenSeq src{4, 6, 8};
  const BeamResult a = beam_search(m, src, fixed_length(5, 6, 1.0));
  const BeamResult b = beam_search(m, src, fixed_length(5, 6, 1.0));
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.best_score, b.best_score);
}

TEST(Greedy, StopsAtEosAndRespectsMaxLen) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Model m = toy_model(toy_config(trial % 2 == 0, 6), 900 + trial);
    const TokenSeq src = testutil::random_ids(rng, 3, 6);
    const GreedyResult g = greedy_decode(m, src, 7);
    EXPECT_LE(g.tokens.size(), 7u);
    for (std::size_t t = 0; t + 1 < g.tokens.size(); ++t) EXPECT_NE(g.tokens[t], kEos);
    EXPECT_TRUE(g.tokens.back() == kEos || g.tokens.size() == 7u);
  }
  EXPECT_THROW(greedy_decode(toy_model(toy_config(false, 6), 1), TokenSeq{4}, 0), ConfigError);
}

TEST(PrepareDecoding, AdditiveKeysAlwaysPresent) {
  const Model m(testutil::tiny_hybrid(8, 9), 10);
  const TokenSeq src{4, 5, 6};
  for (bool pre : {false, true}) {
    const EncoderOutput enc = prepare_decoding(m, src, pre);
    EXPECT_TRUE(enc.additive_keys.has_value());
    EXPECT_EQ(enc.states.shape(), (Shape{3, 8}));
  }
  const Model t(testutil::tiny_transformer(8, 9, 2), 10);
  EXPECT_TRUE(prepare_decoding(t, src, false).precomputed_kv.empty());
  EXPECT_EQ(prepare_decoding(t, src, true).precomputed_kv.size(), 2u);
}
