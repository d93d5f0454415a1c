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

// The three architectures: self-attention encoder (or the recurrent reference
// encoder), Transformer decoder, and the single-layer GRU decoder.
//
// Every decoder offers two routes to the same logits: an incremental step
// function carrying a DecoderState, and a teacher-forced forward over a whole
// target prefix. The two are implemented independently and checked against
// each other.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "hmt/config.hpp"
#include "hmt/params.hpp"
#include "hmt/tokens.hpp"

namespace hmt {

// Concatenated weights for the fused ("weight combination") path.
struct FusedWeights {
  std::vector<Tensor> encoder_qkv;       // [d x 3d] per encoder layer
  std::vector<GRUFused> encoder_gru;     // per GRU encoder layer
  std::vector<Tensor> decoder_self_qkv;  // [d x 3d] per decoder layer
  std::vector<Tensor> decoder_inter_kv;  // [d x 2d] per decoder layer
  std::optional<GRUFused> gru_cell;
  std::optional<Tensor> gru_attn_kv;  // [d x 2d], multi-head GRU attention
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);
  Model(ModelConfig cfg, std::shared_ptr<ModelParams> params);

  const ModelConfig& config() const { return cfg_; }
  const ModelParams& params() const { return *params_; }
  ModelParams& params() { return *params_; }
  const std::shared_ptr<ModelParams>& shared_params() const { return params_; }

  // Same parameters, different fused-weights setting.
  Model with_fused_weights(bool fused) const;

  // Fused weight views. Cached while parameters are unchanged and nothing is
  // being recorded; rebuilt on the active tape otherwise so gradients reach
  // the underlying parameters.
  std::shared_ptr<const FusedWeights> fused() const;

 private:
  ModelConfig cfg_;
  std::shared_ptr<ModelParams> params_;
  struct FusedCache {
    std::mutex mutex;
    std::uint64_t version = 0;
    std::shared_ptr<const FusedWeights> weights;
  };
  std::shared_ptr<FusedCache> fused_cache_;
};

struct KVPair {
  Tensor keys;    // [L x d_model]
  Tensor values;  // [L x d_model]
};

struct EncoderOutput {
  Tensor states;  // [L x d_model]
  // One pair per consumer attention site: each Transformer decoder layer, or
  // the GRU decoder's multi-head attention.
  std::vector<KVPair> precomputed_kv;
  // states * U_a for additive attention, computed once per sentence.
  std::optional<Tensor> additive_keys;
};

struct GruDecoderState {
  Tensor hidden;  // [1 x gru_hidden]
  TokenId last_token = kBos;
};

// With the KV cache enabled, keys/values hold every emitted position's
// projections per layer. Without it, inputs holds each layer's input rows
// and projections are recomputed on every step.
struct TransformerDecoderState {
  bool kv_cache = true;
  std::vector<std::optional<Tensor>> keys;
  std::vector<std::optional<Tensor>> values;
  std::vector<std::optional<Tensor>> inputs;
  std::size_t step = 0;
};

struct DecoderState {
  std::variant<GruDecoderState, TransformerDecoderState> state;

  // Number of scalars held, for footprint assertions.
  std::size_t footprint() const;
};

struct StepOutput {
  Tensor logits;  // [1 x tgt_vocab]
  DecoderState state;
};

// Throws ContractError on empty input, IndexError on out-of-range ids.
EncoderOutput encode(const Model& model, std::span<const TokenId> src);

// Fills precomputed inter-attention K/V (Transformer decoder, or GRU decoder
// with multi-head attention) and the additive-attention key projection.
void precompute_attention(const Model& model, EncoderOutput& enc);

DecoderState initial_state(const Model& model, const EncoderOutput& enc, bool kv_cache = true);

StepOutput decode_step(const Model& model, const EncoderOutput& enc, const DecoderState& state,
                       TokenId prev);
StepOutput decode_step_gru(const Model& model, const EncoderOutput& enc,
                           const GruDecoderState& state, TokenId prev);
StepOutput decode_step_transformer(const Model& model, const EncoderOutput& enc,
                                   const TransformerDecoderState& state, TokenId prev);

// Logits [T x tgt_vocab] for decoder inputs `tgt_in` (starting with BOS);
// row t only depends on tgt_in[0..t].
Tensor forward_teacher_forced(const Model& model, const EncoderOutput& enc,
                              std::span<const TokenId> tgt_in);
Tensor forward_teacher_forced(const Model& model, std::span<const TokenId> src,
                              std::span<const TokenId> tgt_in);

}  // namespace hmt
