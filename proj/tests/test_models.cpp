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

#include <array>
#include <cmath>
#include <thread>

#include "helpers.hpp"
#include "hmt/errors.hpp"
#include "hmt/model.hpp"

using namespace hmt;
using testutil::bit_equal;
using testutil::max_abs_diff;

namespace {

// Closed-form parameter count from the shape algebra of init_params.
std::size_t expected_param_count(const ModelConfig& c) {
  const std::size_t d = c.d_model, f = c.ffn_filter, h = c.gru_hidden;
  const std::size_t mha = 4 * d * d, ln = 2 * d, ff = 2 * d * f + f + d;
  const std::size_t gru_in_d = 3 * d * d + 3 * d * d + 3 * d;
  std::size_t n = (c.src_vocab + c.tgt_vocab) * d;
  n += c.encoder_kind == EncoderKind::kSelfAttention ? c.enc_layers * (mha + ff + 2 * ln)
                                                     : c.enc_layers * gru_in_d;
  if (c.decoder_kind == DecoderKind::kTransformer) {
    n += c.dec_layers * (2 * mha + ff + 3 * ln);
    n += d * c.tgt_vocab + c.tgt_vocab;
  } else {
    n += d * h + h + 3 * (2 * d) * h + 3 * h * h + 3 * h;
    if (c.attention_kind == AttentionKind::kAdditive) n += h * d + d * d + d;
    if (c.attention_kind == AttentionKind::kDot && h != d) n += h * d;
    if (c.attention_kind == AttentionKind::kMultiHead) n += h * d + 3 * d * d;
    n += (h + 2 * d) * c.tgt_vocab + c.tgt_vocab;
  }
  return n;
}

ModelConfig variant(AttentionKind kind, std::size_t gru_hidden) {
  ModelConfig c = testutil::tiny_hybrid(8, 11);
  c.attention_kind = kind;
  c.gru_hidden = gru_hidden;
  c.enc_layers = 2;
  return c;
}

std::vector<ModelConfig> all_configs() {
  std::vector<ModelConfig> out;
  for (AttentionKind k : {AttentionKind::kAdditive, AttentionKind::kDot, AttentionKind::kMultiHead}) {
    out.push_back(variant(k, 12));
    out.push_back(variant(k, 8));
  }
  ModelConfig t = testutil::tiny_transformer(8, 11, 2);
  out.push_back(t);
  ModelConfig rnmt = variant(AttentionKind::kAdditive, 8);
  rnmt.encoder_kind = EncoderKind::kGru;
  rnmt.enc_layers = 1;
  out.push_back(rnmt);
  return out;
}

// Runs decode_step along tgt_in and stacks the logits.
Tensor stepwise_logits(const Model& m, const EncoderOutput& enc, const TokenSeq& tgt_in,
                       bool kv_cache = true) {
  DecoderState state = initial_state(m, enc, kv_cache);
  std::vector<Tensor> rows;
  for (TokenId t : tgt_in) {
    StepOutput out = decode_step(m, enc, state, t);
    rows.push_back(out.logits);
    state = std::move(out.state);
  }
  return concat_rows(rows);
}

TokenSeq with_bos(TokenSeq body) {
  body.insert(body.begin(), kBos);
  return body;
}

EncoderOutput prepared(const Model& m, std::span<const TokenId> src) {
  EncoderOutput enc = encode(m, src);
  precompute_attention(m, enc);
  return enc;
}

}  // namespace

TEST(InitParams, DeterministicInSeed) {
  const ModelConfig c = testutil::tiny_transformer(8, 9, 2);
  const ModelParams a = init_params(c, 5), b = init_params(c, 5), other = init_params(c, 6);
  ASSERT_EQ(a.store.entries().size(), b.store.entries().size());
  bool any_differs = false;
  for (std::size_t i = 0; i < a.store.entries().size(); ++i) {
    const auto& ea = a.store.entries()[i];
    EXPECT_EQ(ea.name, b.store.entries()[i].name);
    EXPECT_TRUE(bit_equal(ea.tensor, b.store.entries()[i].tensor));
    if (!bit_equal(ea.tensor, other.store.entries()[i].tensor)) any_differs = true;
  }
  EXPECT_TRUE(any_differs);
}

TEST(InitParams, InvalidConfigurations) {
  ModelConfig c = testutil::tiny_hybrid();
  c.heads = 3;
  EXPECT_THROW(init_params(c, 1), ConfigError);
  c = testutil::tiny_hybrid();
  c.dec_layers = 2;
  EXPECT_THROW(init_params(c, 1), ConfigError);
  c = testutil::tiny_hybrid();
  c.d_model = 0;
  EXPECT_THROW(init_params(c, 1), ConfigError);
  c = testutil::tiny_hybrid();
  c.tgt_vocab = 3;
  EXPECT_THROW(init_params(c, 1), ConfigError);
}

TEST(InitParams, ParameterCountMatchesClosedForm) {
  for (const ModelConfig& c : all_configs()) {
    EXPECT_EQ(init_params(c, 1).store.scalar_count(), expected_param_count(c))
        << c.to_text();
  }
  ModelConfig base;
  base.src_vocab = base.tgt_vocab = 30000;
  EXPECT_EQ(expected_param_count(base), 118698800u);
}

TEST(Encoder, EmptyStackIsScaledEmbeddingPlusSignal) {
  ModelConfig c = testutil::tiny_hybrid(8, 9);
  c.enc_layers = 0;
  const Model m(c, 3);
  const TokenSeq src{4, 7, 5};
  const Tensor expected = add(scale(embed(m.params().src_embed, src), std::sqrt(8.0)),
                              positional_signal(3, 8));
  EXPECT_LT(max_abs_diff(encode(m, src).states, expected), 1e-15);
}

TEST(Encoder, MatchesLayerByLayerRecompute) {
  ModelConfig c = testutil::tiny_hybrid(8, 9);
  c.enc_layers = 3;
  for (bool fused : {false, true}) {
    c.fused_weights = fused;
    const Model m(c, 4);
    const TokenSeq src{4, 8, 8, 5, 6};
    Tensor x = add(scale(embed(m.params().src_embed, src), std::sqrt(8.0)), positional_signal(5, 8));
    for (const EncoderLayerParams& layer : m.params().encoder) {
      x = layer_norm(layer.ln_self, add(x, multi_head_attention(layer.self, x, x)));
      x = layer_norm(layer.ln_ffn, add(x, ffn(layer.ffn, x)));
    }
    EXPECT_LT(max_abs_diff(encode(m, src).states, x), 1e-10);
  }
}

TEST(Encoder, ShapesErrorsAndPositionSensitivity) {
  const Model m(testutil::tiny_hybrid(8, 9), 5);
  const TokenSeq one{6};
  const Tensor s = encode(m, one).states;
  EXPECT_EQ(s.shape(), (Shape{1, 8}));
  for (double v : s.data()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_THROW(encode(m, TokenSeq{}), ContractError);
  EXPECT_THROW(encode(m, TokenSeq{4, 9}), IndexError);

  const Tensor ab = encode(m, TokenSeq{4, 5}).states, ba = encode(m, TokenSeq{5, 4}).states;
  EXPECT_GT(std::abs(ab.at(0, 0) - ba.at(1, 0)) + std::abs(ab.at(1, 1) - ba.at(0, 1)), 1e-6);
}

TEST(Encoder, IndependentOfDecoderParameters) {
  const Model m(testutil::tiny_hybrid(8, 9), 6);
  const TokenSeq src{4, 5, 6};
  const Tensor before = encode(m, src).states;
  auto params = std::make_shared<ModelParams>(init_params(m.config(), 6));
  for (double& v : params->out_w.mutable_data()) v += 1.0;
  for (double& v : params->gru_decoder.init_w.mutable_data()) v -= 1.0;
  EXPECT_TRUE(bit_equal(encode(Model(m.config(), params), src).states, before));
}

TEST(GruDecoder, StepMatchesDirectComputation) {
  const Model m(testutil::tiny_hybrid(8, 9), 7);
  const GruDecoderParams& g = m.params().gru_decoder;
  const TokenSeq src{4, 5, 6, 7};
  const EncoderOutput enc = prepared(m, src);
  const Tensor h0 = tanh(add_bias(matmul(mean_rows(enc.states), g.init_w), g.init_b));
  const TokenSeq prev{kBos};
  const Tensor e = embed(m.params().tgt_embed, prev);
  const Tensor ctx = additive_attention(g.additive, h0, enc.states).context;
  const std::array in{e, ctx};
  const Tensor h1 = gru_cell(g.cell, concat_cols(in), h0);
  const std::array readout{h1, ctx, e};
  const Tensor logits = add_bias(matmul(concat_cols(readout), m.params().out_w), m.params().out_b);

  const StepOutput out = decode_step(m, enc, initial_state(m, enc), kBos);
  EXPECT_EQ(out.logits.shape(), (Shape{1, 9}));
  EXPECT_LT(max_abs_diff(out.logits, logits), 1e-10);
  EXPECT_LT(max_abs_diff(std::get<GruDecoderState>(out.state.state).hidden, h1), 1e-10);
}

TEST(GruDecoder, StepIsPure) {
  const Model m(testutil::tiny_hybrid(8, 9), 8);
  const EncoderOutput enc = prepared(m, TokenSeq{4, 5});
  const DecoderState s = initial_state(m, enc);
  const StepOutput a = decode_step(m, enc, s, 6), b = decode_step(m, enc, s, 6);
  EXPECT_TRUE(bit_equal(a.logits, b.logits));
  EXPECT_THROW(decode_step(m, enc, s, 9), IndexError);
}

TEST(Decoders, IncrementalMatchesTeacherForced) {
  Rng rng(9);
  for (const ModelConfig& c : all_configs()) {
    const Model m(c, 10);
    for (int trial = 0; trial < 5; ++trial) {
      const TokenSeq src = testutil::random_ids(rng, 1 + rng.below(8), c.src_vocab);
      const TokenSeq tgt_in = with_bos(testutil::random_ids(rng, rng.below(8), c.tgt_vocab));
      const EncoderOutput enc = prepared(m, src);
      const Tensor full = forward_teacher_forced(m, enc, tgt_in);
      EXPECT_EQ(full.shape(), (Shape{tgt_in.size(), c.tgt_vocab}));
      EXPECT_LT(max_abs_diff(stepwise_logits(m, enc, tgt_in), full), 1e-10) << c.to_text();
      EXPECT_LT(max_abs_diff(stepwise_logits(m, enc, tgt_in, false), full), 1e-10) << c.to_text();
    }
  }
}

TEST(Decoders, SingleTokenTargetEqualsOneStep) {
  for (const ModelConfig& c : all_configs()) {
    const Model m(c, 11);
    const TokenSeq src{4, 6};
    const EncoderOutput enc = prepared(m, src);
    const StepOutput step = decode_step(m, enc, initial_state(m, enc), kBos);
    EXPECT_LT(max_abs_diff(forward_teacher_forced(m, src, TokenSeq{kBos}), step.logits), 1e-10);
  }
}

TEST(Decoders, TeacherForcedIsCausal) {
  for (const ModelConfig& c : all_configs()) {
    const Model m(c, 12);
    const TokenSeq src{4, 5, 6};
    TokenSeq tgt{kBos, 4, 5, 6, 7, 8};
    const Tensor base = forward_teacher_forced(m, src, tgt);
    tgt[3] = 10;
    const Tensor changed = forward_teacher_forced(m, src, tgt);
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t col = 0; col < c.tgt_vocab; ++col) EXPECT_EQ(changed.at(r, col), base.at(r, col));
    EXPECT_GT(max_abs_diff(slice_rows(changed, 3, 6), slice_rows(base, 3, 6)), 0.0);
  }
}

TEST(Decoders, TeacherForcedContract) {
  const Model m(testutil::tiny_transformer(), 13);
  EXPECT_THROW(forward_teacher_forced(m, TokenSeq{4}, TokenSeq{}), ContractError);
  EXPECT_THROW(forward_teacher_forced(m, TokenSeq{4}, TokenSeq{4, 5}), ContractError);
}

TEST(Decoders, FusedMatchesUnfused) {
  Rng rng(14);
  for (ModelConfig c : all_configs()) {
    c.fused_weights = false;
    const Model plain(c, 15);
    const Model fused = plain.with_fused_weights(true);
    const TokenSeq src = testutil::random_ids(rng, 6, c.src_vocab);
    const TokenSeq tgt_in = with_bos(testutil::random_ids(rng, 5, c.tgt_vocab));
    const EncoderOutput enc_p = prepared(plain, src), enc_f = prepared(fused, src);
    EXPECT_LT(max_abs_diff(enc_p.states, enc_f.states), 1e-10);
    EXPECT_LT(max_abs_diff(stepwise_logits(plain, enc_p, tgt_in), stepwise_logits(fused, enc_f, tgt_in)),
              1e-10);
    EXPECT_LT(max_abs_diff(forward_teacher_forced(plain, enc_p, tgt_in),
                           forward_teacher_forced(fused, enc_f, tgt_in)), 1e-10);
  }
}

TEST(Decoders, PrecomputedAttentionMatchesOnTheFly) {
  Rng rng(16);
  for (const ModelConfig& c : all_configs()) {
    const Model m(c, 17);
    const TokenSeq src = testutil::random_ids(rng, 5, c.src_vocab);
    const TokenSeq tgt_in = with_bos(testutil::random_ids(rng, 4, c.tgt_vocab));
    const EncoderOutput raw = encode(m, src);
    const EncoderOutput pre = prepared(m, src);
    if (c.decoder_kind == DecoderKind::kTransformer) {
      EXPECT_EQ(pre.precomputed_kv.size(), c.dec_layers);
    } else if (c.attention_kind == AttentionKind::kMultiHead) {
      EXPECT_EQ(pre.precomputed_kv.size(), 1u);
    }
    for (const KVPair& kv : pre.precomputed_kv) EXPECT_EQ(kv.keys.shape(), (Shape{5, c.d_model}));
    EXPECT_LT(max_abs_diff(stepwise_logits(m, raw, tgt_in), stepwise_logits(m, pre, tgt_in)), 1e-10);
  }
}

TEST(DecoderState, FootprintLaws) {
  const Model gru(testutil::tiny_hybrid(8, 9), 18);
  const Model trans(testutil::tiny_transformer(8, 9, 2), 18);
  const TokenSeq src{4, 5, 6};
  for (const Model* m : {&gru, &trans}) {
    const EncoderOutput enc = prepared(*m, src);
    DecoderState s = initial_state(*m, enc);
    std::vector<std::size_t> sizes{s.footprint()};
    for (TokenId t : {kBos, TokenId{4}, TokenId{5}, TokenId{6}}) {
      s = decode_step(*m, enc, s, t).state;
      sizes.push_back(s.footprint());
    }
    if (m == &gru) {
      for (std::size_t n : sizes) EXPECT_EQ(n, sizes.front());
    } else {
      const auto& ts = std::get<TransformerDecoderState>(s.state);
      EXPECT_EQ(ts.step, 4u);
      for (const auto& k : ts.keys) EXPECT_EQ(k->rows(), 4u);
      for (std::size_t i = 1; i < sizes.size(); ++i) EXPECT_EQ(sizes[i] - sizes[i - 1], 2u * 2u * 8u);
    }
  }
}

TEST(Decoders, ConcurrentDecodesAgree) {
  const Model m(testutil::tiny_transformer(8, 9, 2), 19);
  const TokenSeq src{4, 5, 6}, tgt{kBos, 7, 8, 4};
  const Tensor ref = forward_teacher_forced(m, src, tgt);
  std::array<Tensor, 2> got;
  std::array<std::thread, 2> threads;
  for (std::size_t i = 0; i < 2; ++i)
    threads[i] = std::thread([&, i] { got[i] = stepwise_logits(m, prepared(m, src), tgt); });
  for (auto& t : threads) t.join();
  for (const Tensor& g : got) EXPECT_LT(max_abs_diff(g, ref), 1e-10);
}
