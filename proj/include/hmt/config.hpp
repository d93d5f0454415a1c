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

#include <cstddef>
#include <string>
#include <string_view>

namespace hmt {

enum class EncoderKind { kSelfAttention, kGru };
enum class DecoderKind { kTransformer, kGru };
enum class AttentionKind { kAdditive, kDot, kMultiHead };

std::string_view to_string(EncoderKind kind);
std::string_view to_string(DecoderKind kind);
std::string_view to_string(AttentionKind kind);
// Throw ConfigError on unknown names.
EncoderKind parse_encoder_kind(std::string_view name);
DecoderKind parse_decoder_kind(std::string_view name);
AttentionKind parse_attention_kind(std::string_view name);

// Architecture hyperparameters. Fully determines every parameter shape.
//
// attention_kind selects the GRU decoder's source attention; the Transformer
// decoder always uses multi-head inter-attention. The GRU encoder exists only
// as the recurrent reference configuration for latency comparisons.
struct ModelConfig {
  std::size_t d_model = 512;
  std::size_t ffn_filter = 2048;
  std::size_t heads = 8;
  std::size_t enc_layers = 6;
  std::size_t dec_layers = 1;
  EncoderKind encoder_kind = EncoderKind::kSelfAttention;
  DecoderKind decoder_kind = DecoderKind::kGru;
  AttentionKind attention_kind = AttentionKind::kAdditive;
  std::size_t gru_hidden = 1024;
  std::size_t src_vocab = 30000;
  std::size_t tgt_vocab = 30000;
  // Combine linear maps that share an input into one matrix product.
  bool fused_weights = true;

  // Throws ConfigError naming the violated constraint.
  void validate() const;

  // Hidden width of the decoder state that feeds the output readout.
  std::size_t decoder_dim() const {
    return decoder_kind == DecoderKind::kGru ? gru_hidden : d_model;
  }

  // "key = value" lines; parse() accepts exactly what to_text() writes.
  std::string to_text() const;
  static ModelConfig parse(std::string_view text);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace hmt
