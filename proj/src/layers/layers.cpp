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

#include "hmt/layers.hpp"

#include <array>
#include <cmath>
#include <string>

#include "hmt/errors.hpp"

namespace hmt {

AttentionMask::AttentionMask(std::size_t queries, std::size_t keys,
                             std::vector<std::uint8_t> allowed)
    : queries_(queries), keys_(keys), allowed_(std::move(allowed)) {
  if (allowed_.size() != queries_ * keys_) {
    throw DimensionError("attention mask: " + std::to_string(allowed_.size()) + " entries for " +
                         std::to_string(queries_) + " x " + std::to_string(keys_));
  }
}

AttentionMask AttentionMask::causal(std::size_t queries, std::size_t keys, std::size_t offset) {
  std::vector<std::uint8_t> allowed(queries * keys, 0);
  for (std::size_t q = 0; q < queries; ++q) {
    for (std::size_t k = 0; k < keys && k <= offset + q; ++k) allowed[q * keys + k] = 1;
  }
  return AttentionMask(queries, keys, std::move(allowed));
}

AttentionResult scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const AttentionMask* mask) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.cols() != k.cols() ||
      k.rows() != v.rows()) {
    throw DimensionError("scaled_dot_attention: q " + to_string(q.shape()) + ", k " +
                         to_string(k.shape()) + ", v " + to_string(v.shape()));
  }
  Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  if (mask) {
    if (mask->queries() != q.rows() || mask->keys() != k.rows()) {
      throw DimensionError("scaled_dot_attention: mask " + std::to_string(mask->queries()) + " x " +
                           std::to_string(mask->keys()) + " for scores " + to_string(scores.shape()));
    }
    for (std::size_t r = 0; r < mask->queries(); ++r) {
      bool any = false;
      for (std::size_t c = 0; c < mask->keys() && !any; ++c) any = mask->allows(r, c);
      if (!any) {
        throw ContractError("scaled_dot_attention: query row " + std::to_string(r) +
                            " is fully masked");
      }
    }
    scores = masked_fill(scores, mask->allowed(), kMaskedScore);
  }
  Tensor weights = softmax(scores, 1);
  return {matmul(weights, v), weights};
}

Tensor attend_heads(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                    const AttentionMask* mask) {
  const std::size_t d = q.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attend_heads: model dim " + std::to_string(d) +
                      " not divisible by head count " + std::to_string(heads));
  }
  if (heads == 1) return scaled_dot_attention(q, k, v, mask).context;
  const std::size_t dh = d / heads;
  std::vector<Tensor> parts;
  parts.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t b = h * dh, e = b + dh;
    parts.push_back(
        scaled_dot_attention(slice_cols(q, b, e), slice_cols(k, b, e), slice_cols(v, b, e), mask)
            .context);
  }
  return concat_cols(parts);
}

namespace {

void check_mha(const MultiHeadParams& p, const Tensor& query, const Tensor& keys) {
  if (query.rank() != 2 || query.cols() != p.w_q.rows()) {
    throw DimensionError("multi_head_attention: query " + to_string(query.shape()) +
                         " vs W_Q " + to_string(p.w_q.shape()));
  }
  if (keys.rank() != 2 || keys.cols() != p.model_dim()) {
    throw DimensionError("multi_head_attention: keys " + to_string(keys.shape()) +
                         " vs model dim " + std::to_string(p.model_dim()));
  }
}

}  // namespace

Tensor multi_head_attention(const MultiHeadParams& p, const Tensor& query,
                            const Tensor& keys_values, const AttentionMask* mask) {
  check_mha(p, query, keys_values);
  const Tensor q = matmul(query, p.w_q);
  const Tensor k = matmul(keys_values, p.w_k);
  const Tensor v = matmul(keys_values, p.w_v);
  return matmul(attend_heads(q, k, v, p.heads, mask), p.w_o);
}

Tensor multi_head_attention_cached(const MultiHeadParams& p, const Tensor& query,
                                   const Tensor& pre_k, const Tensor& pre_v,
                                   const AttentionMask* mask) {
  check_mha(p, query, pre_k);
  if (pre_v.shape() != pre_k.shape()) {
    throw DimensionError("multi_head_attention_cached: K " + to_string(pre_k.shape()) + " vs V " +
                         to_string(pre_v.shape()));
  }
  const Tensor q = matmul(query, p.w_q);
  return matmul(attend_heads(q, pre_k, pre_v, p.heads, mask), p.w_o);
}

AttentionResult additive_attention(const AdditiveAttnParams& p, const Tensor& dec_state,
                                   const Tensor& enc_states, const std::optional<Tensor>& enc_keys) {
  if (enc_states.rank() != 2) {
    throw DimensionError("additive_attention: encoder states " + to_string(enc_states.shape()));
  }
  if (dec_state.size() != p.w_a.rows() || enc_states.cols() != p.u_a.rows()) {
    throw DimensionError("additive_attention: state " + to_string(dec_state.shape()) +
                         ", encoder " + to_string(enc_states.shape()) + ", W_a " +
                         to_string(p.w_a.shape()) + ", U_a " + to_string(p.u_a.shape()));
  }
  const Tensor keys = enc_keys ? *enc_keys : matmul(enc_states, p.u_a);
  const Tensor query = matmul(reshape(dec_state, {1, dec_state.size()}), p.w_a);
  const Tensor hidden = tanh(add_bias(keys, query));
  const Tensor scores = matmul_nt(reshape(p.v_a, {1, p.v_a.size()}), hidden);
  Tensor weights = softmax(scores, 1);
  return {matmul(weights, enc_states), weights};
}

AttentionResult dot_attention(const Tensor& dec_state, const Tensor& enc_states) {
  if (enc_states.rank() != 2 || dec_state.size() != enc_states.cols()) {
    throw DimensionError("dot_attention: state " + to_string(dec_state.shape()) + " vs encoder " +
                         to_string(enc_states.shape()));
  }
  const Tensor q = reshape(dec_state, {1, dec_state.size()});
  const Tensor scores =
      scale(matmul_nt(q, enc_states), 1.0 / std::sqrt(static_cast<double>(q.cols())));
  Tensor weights = softmax(scores, 1);
  return {matmul(weights, enc_states), weights};
}

Tensor ffn(const FFNParams& p, const Tensor& x) {
  return add_bias(matmul(relu(add_bias(matmul(x, p.w1), p.b1)), p.w2), p.b2);
}

Tensor layer_norm(const LayerNormParams& p, const Tensor& x) {
  return layer_norm(x, p.gain, p.bias, kLayerNormEps);
}

GRUFused fuse(const GRUParams& p) {
  const std::array w{p.w_z, p.w_r, p.w_h};
  const std::array u{p.u_z, p.u_r, p.u_h};
  const std::array b{reshape(p.b_z, {1, p.b_z.size()}), reshape(p.b_r, {1, p.b_r.size()}),
                     reshape(p.b_h, {1, p.b_h.size()})};
  return {concat_cols(w), concat_cols(u), reshape(concat_cols(b), {3 * p.b_z.size()})};
}

namespace {

void check_gru(std::size_t d_in, std::size_t d_h, const Tensor& x, const Tensor& h_prev) {
  if (x.rank() != 2 || x.rows() != 1 || x.cols() != d_in || h_prev.rank() != 2 ||
      h_prev.rows() != 1 || h_prev.cols() != d_h) {
    throw DimensionError("gru_cell: x " + to_string(x.shape()) + ", h " + to_string(h_prev.shape()) +
                         " for input dim " + std::to_string(d_in) + ", hidden dim " +
                         std::to_string(d_h));
  }
}

Tensor gru_combine(const Tensor& z, const Tensor& candidate, const Tensor& h_prev) {
  return add(mul(affine(z, -1.0, 1.0), h_prev), mul(z, candidate));
}

}  // namespace

Tensor gru_cell(const GRUParams& p, const Tensor& x, const Tensor& h_prev) {
  check_gru(p.input_dim(), p.hidden_dim(), x, h_prev);
  const Tensor z = sigmoid(add(add_bias(matmul(x, p.w_z), p.b_z), matmul(h_prev, p.u_z)));
  const Tensor r = sigmoid(add(add_bias(matmul(x, p.w_r), p.b_r), matmul(h_prev, p.u_r)));
  const Tensor candidate =
      tanh(add(add_bias(matmul(x, p.w_h), p.b_h), mul(r, matmul(h_prev, p.u_h))));
  return gru_combine(z, candidate, h_prev);
}

Tensor gru_cell(const GRUFused& f, const Tensor& x, const Tensor& h_prev) {
  check_gru(f.w.rows(), f.u.rows(), x, h_prev);
  return gru_cell_from_projected(f, add_bias(matmul(x, f.w), f.b), h_prev);
}

Tensor gru_cell_from_projected(const GRUFused& f, const Tensor& x_proj_row, const Tensor& h_prev) {
  const std::size_t h = f.u.rows();
  if (x_proj_row.size() != 3 * h) {
    throw DimensionError("gru_cell: projected input " + to_string(x_proj_row.shape()) +
                         " for hidden dim " + std::to_string(h));
  }
  const Tensor gh = matmul(h_prev, f.u);
  const Tensor z = sigmoid(add(slice_cols(x_proj_row, 0, h), slice_cols(gh, 0, h)));
  const Tensor r = sigmoid(add(slice_cols(x_proj_row, h, 2 * h), slice_cols(gh, h, 2 * h)));
  const Tensor candidate =
      tanh(add(slice_cols(x_proj_row, 2 * h, 3 * h), mul(r, slice_cols(gh, 2 * h, 3 * h))));
  return gru_combine(z, candidate, h_prev);
}

Tensor positional_signal(std::size_t length, std::size_t d_model, std::size_t offset) {
  if (length == 0 || d_model == 0) {
    throw ContractError("positional_signal: length and model dim must be positive");
  }
  std::vector<double> table(length * d_model);
  for (std::size_t row = 0; row < length; ++row) {
    const double pos = static_cast<double>(offset + row);
    for (std::size_t i = 0; i < d_model; ++i) {
      const double pair = static_cast<double>(i - i % 2);
      const double angle = pos / std::pow(10000.0, pair / static_cast<double>(d_model));
      table[row * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({length, d_model}, std::move(table));
}

}  // namespace hmt
