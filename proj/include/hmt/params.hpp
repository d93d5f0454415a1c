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
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmt/config.hpp"
#include "hmt/gradcheck.hpp"
#include "hmt/layers.hpp"

namespace hmt {

// Ordered, named collection of trainable tensors. Names are stable and are
// the keys of checkpoint records.
class ParamStore {
 public:
  // Registers a trainable tensor; throws ConfigError on duplicate names.
  Tensor add(std::string name, Tensor tensor);
  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::span<const NamedTensor> entries() const { return entries_; }
  std::size_t scalar_count() const;

  // Bumped by anything that rewrites values in place (optimizer, loader), so
  // derived caches know to rebuild.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  void zero_grad();

 private:
  std::vector<NamedTensor> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t version_ = 0;
};

struct EncoderLayerParams {
  MultiHeadParams self;
  LayerNormParams ln_self;
  FFNParams ffn;
  LayerNormParams ln_ffn;
};

struct TransformerDecoderLayerParams {
  MultiHeadParams self;
  LayerNormParams ln_self;
  MultiHeadParams inter;
  LayerNormParams ln_inter;
  FFNParams ffn;
  LayerNormParams ln_ffn;
};

struct GruDecoderParams {
  Tensor init_w;  // [d_model x gru_hidden]
  Tensor init_b;  // [gru_hidden]
  GRUParams cell;  // input = [embedding, context], 2 d_model wide
  AdditiveAttnParams additive;
  std::optional<Tensor> bridge;  // [gru_hidden x d_model], dot attention with unequal dims
  MultiHeadParams multi_head;    // w_q is [gru_hidden x d_model]
};

struct ModelParams {
  ParamStore store;
  Tensor src_embed;  // [src_vocab x d_model]
  Tensor tgt_embed;  // [tgt_vocab x d_model]
  std::vector<EncoderLayerParams> encoder;
  std::vector<GRUParams> encoder_gru;
  std::vector<TransformerDecoderLayerParams> decoder;
  GruDecoderParams gru_decoder;
  Tensor out_w;  // [readout_dim x tgt_vocab]
  Tensor out_b;  // [tgt_vocab]
};

// Width of the vector fed to the output projection.
std::size_t readout_dim(const ModelConfig& cfg);

// Allocates every tensor for `cfg` and initializes it deterministically from
// `seed`: Glorot-uniform matrices, N(0, 1/d_model) embeddings, zero biases,
// unit layer-norm gains. Throws ConfigError for invalid configurations.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace hmt
