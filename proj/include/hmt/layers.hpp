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

// Neural building blocks shared by the encoder and both decoders.
//
// Activations are row vectors: a sequence of L states is an [L x d] matrix
// and a single state is [1 x d]. Weight matrices are stored input-major,
// [in x out], so a projection is matmul(x, W).

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "hmt/ops.hpp"
#include "hmt/tensor.hpp"

namespace hmt {

// Boolean attention mask, row-major [queries x keys]; 1 = may attend.
class AttentionMask {
 public:
  AttentionMask(std::size_t queries, std::size_t keys, std::vector<std::uint8_t> allowed);

  // Query i (at absolute position offset + i) sees keys 0..offset + i.
  static AttentionMask causal(std::size_t queries, std::size_t keys, std::size_t offset = 0);

  std::size_t queries() const { return queries_; }
  std::size_t keys() const { return keys_; }
  std::span<const std::uint8_t> allowed() const { return allowed_; }
  bool allows(std::size_t q, std::size_t k) const { return allowed_[q * keys_ + k] != 0; }

 private:
  std::size_t queries_;
  std::size_t keys_;
  std::vector<std::uint8_t> allowed_;
};

// Score assigned to masked positions before the softmax.
inline constexpr double kMaskedScore = -1e9;

struct AttentionResult {
  Tensor context;  // [Lq x d_v]
  Tensor weights;  // [Lq x Lk]
};

// softmax(q k^T / sqrt(d)) v. Throws ContractError if a mask row allows no key.
AttentionResult scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const AttentionMask* mask = nullptr);

struct MultiHeadParams {
  Tensor w_q;  // [d_query x d_model]
  Tensor w_k;  // [d_model x d_model]
  Tensor w_v;  // [d_model x d_model]
  Tensor w_o;  // [d_model x d_model]
  std::size_t heads = 1;

  std::size_t model_dim() const { return w_k.cols(); }
  std::size_t head_dim() const { return model_dim() / heads; }
};

// Splits already-projected q, k, v into heads, attends per head and
// concatenates the heads (before the output projection).
Tensor attend_heads(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                    const AttentionMask* mask = nullptr);

Tensor multi_head_attention(const MultiHeadParams& p, const Tensor& query,
                            const Tensor& keys_values, const AttentionMask* mask = nullptr);

// Same as multi_head_attention with the K and V projections supplied by the
// caller (pre_k = keys_values * w_k, pre_v = keys_values * w_v).
Tensor multi_head_attention_cached(const MultiHeadParams& p, const Tensor& query,
                                   const Tensor& pre_k, const Tensor& pre_v,
                                   const AttentionMask* mask = nullptr);

struct AdditiveAttnParams {
  Tensor w_a;  // [d_dec x attn_dim]
  Tensor u_a;  // [d_enc x attn_dim]
  Tensor v_a;  // [attn_dim]
};

// e_i = v_a . tanh(W_a s + U_a h_i). `enc_keys`, when given, is enc_states * u_a
// computed once per sentence.
AttentionResult additive_attention(const AdditiveAttnParams& p, const Tensor& dec_state,
                                   const Tensor& enc_states,
                                   const std::optional<Tensor>& enc_keys = std::nullopt);

// Scores enc_states . dec_state / sqrt(d). Dimensions must already agree.
AttentionResult dot_attention(const Tensor& dec_state, const Tensor& enc_states);

struct FFNParams {
  Tensor w1;  // [d_model x filter]
  Tensor b1;  // [filter]
  Tensor w2;  // [filter x d_model]
  Tensor b2;  // [d_model]
};

Tensor ffn(const FFNParams& p, const Tensor& x);

struct LayerNormParams {
  Tensor gain;
  Tensor bias;
};

inline constexpr double kLayerNormEps = 1e-6;

Tensor layer_norm(const LayerNormParams& p, const Tensor& x);

// Gate layout: z = update, r = reset, h = candidate.
//   z  = sigmoid(x W_z + h_prev U_z + b_z)
//   r  = sigmoid(x W_r + h_prev U_r + b_r)
//   h~ = tanh(x W_h + r * (h_prev U_h) + b_h)
//   h  = (1 - z) * h_prev + z * h~
struct GRUParams {
  Tensor w_z, w_r, w_h;  // [d_in x d_h]
  Tensor u_z, u_r, u_h;  // [d_h x d_h]
  Tensor b_z, b_r, b_h;  // [d_h]

  std::size_t input_dim() const { return w_z.rows(); }
  std::size_t hidden_dim() const { return u_z.rows(); }
};

// The three gate transforms of each input concatenated column-wise.
struct GRUFused {
  Tensor w;  // [d_in x 3 d_h]
  Tensor u;  // [d_h x 3 d_h]
  Tensor b;  // [3 d_h]
};

GRUFused fuse(const GRUParams& p);

Tensor gru_cell(const GRUParams& p, const Tensor& x, const Tensor& h_prev);
// Output-identical to the unfused cell with two matrix products instead of six.
Tensor gru_cell(const GRUFused& f, const Tensor& x, const Tensor& h_prev);

// Precomputed input-side gate transform x W + b for a whole sequence, so a
// scan only pays for the recurrent product per step.
Tensor gru_cell_from_projected(const GRUFused& f, const Tensor& x_proj_row, const Tensor& h_prev);

// Sinusoidal table: even columns sin(pos / 10000^(2i/d)), odd columns cos.
// Rows cover positions offset .. offset + length - 1.
Tensor positional_signal(std::size_t length, std::size_t d_model, std::size_t offset = 0);

}  // namespace hmt
