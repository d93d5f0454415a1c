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

#include <cstdint>
#include <vector>

#include "hmt/config.hpp"
#include "hmt/rng.hpp"
#include "hmt/tensor.hpp"
#include "hmt/tokens.hpp"

namespace testutil {

inline hmt::Tensor random(hmt::Shape shape, hmt::Rng& rng, double scale = 1.0, bool grad = false) {
  std::vector<double> v(hmt::numel(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  hmt::Tensor t = hmt::Tensor::from(std::move(shape), std::move(v));
  t.set_requires_grad(grad);
  return t;
}

inline hmt::TokenSeq random_ids(hmt::Rng& rng, std::size_t len, std::size_t vocab) {
  hmt::TokenSeq ids(len);
  for (auto& t : ids) t = static_cast<hmt::TokenId>(hmt::kNumReserved + rng.below(vocab - hmt::kNumReserved));
  return ids;
}

// Tiny configurations for exhaustive and finite-difference checks.
inline hmt::ModelConfig tiny_hybrid(std::size_t d = 8, std::size_t vocab = 7) {
  hmt::ModelConfig c;
  c.d_model = d;
  c.ffn_filter = 2 * d;
  c.heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.decoder_kind = hmt::DecoderKind::kGru;
  c.attention_kind = hmt::AttentionKind::kAdditive;
  c.gru_hidden = d + 4;
  c.src_vocab = c.tgt_vocab = vocab;
  return c;
}

inline hmt::ModelConfig tiny_transformer(std::size_t d = 8, std::size_t vocab = 7, std::size_t layers = 1) {
  hmt::ModelConfig c = tiny_hybrid(d, vocab);
  c.decoder_kind = hmt::DecoderKind::kTransformer;
  c.enc_layers = c.dec_layers = layers;
  return c;
}

inline double max_abs_diff(const hmt::Tensor& a, const hmt::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

inline bool bit_equal(const hmt::Tensor& a, const hmt::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.at(i) != b.at(i)) return false;
  return true;
}

}  // namespace testutil
