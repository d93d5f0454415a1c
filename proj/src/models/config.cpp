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

#include "hmt/config.hpp"

#include <charconv>
#include <map>
#include <sstream>

#include "hmt/errors.hpp"
#include "hmt/tokens.hpp"

namespace hmt {

std::string_view to_string(EncoderKind kind) {
  return kind == EncoderKind::kGru ? "gru" : "self_attention";
}

std::string_view to_string(DecoderKind kind) {
  return kind == DecoderKind::kGru ? "gru" : "transformer";
}

std::string_view to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kAdditive:
      return "additive";
    case AttentionKind::kDot:
      return "dot";
    case AttentionKind::kMultiHead:
      return "multihead";
  }
  return "?";
}

EncoderKind parse_encoder_kind(std::string_view name) {
  if (name == "self_attention" || name == "transformer") return EncoderKind::kSelfAttention;
  if (name == "gru") return EncoderKind::kGru;
  throw ConfigError("unknown encoder kind '" + std::string(name) + "'");
}

DecoderKind parse_decoder_kind(std::string_view name) {
  if (name == "transformer") return DecoderKind::kTransformer;
  if (name == "gru") return DecoderKind::kGru;
  throw ConfigError("unknown decoder kind '" + std::string(name) + "'");
}

AttentionKind parse_attention_kind(std::string_view name) {
  if (name == "additive") return AttentionKind::kAdditive;
  if (name == "dot") return AttentionKind::kDot;
  if (name == "multihead" || name == "multi_head") return AttentionKind::kMultiHead;
  throw ConfigError("unknown attention kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(d_model, "d_model");
  positive(ffn_filter, "ffn_filter");
  positive(heads, "heads");
  positive(gru_hidden, "gru_hidden");
  if (d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by heads " +
                      std::to_string(heads));
  }
  if (decoder_kind == DecoderKind::kGru && dec_layers != 1) {
    throw ConfigError("the GRU decoder has exactly one layer, got dec_layers = " +
                      std::to_string(dec_layers));
  }
  positive(dec_layers, "dec_layers");
  if (encoder_kind == EncoderKind::kGru) positive(enc_layers, "enc_layers for a GRU encoder");
  if (src_vocab < kNumReserved || tgt_vocab < kNumReserved) {
    throw ConfigError("vocabularies need at least " + std::to_string(kNumReserved) +
                      " entries for the reserved tokens");
  }
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  out << "d_model = " << d_model << '\n'
      << "ffn_filter = " << ffn_filter << '\n'
      << "heads = " << heads << '\n'
      << "enc_layers = " << enc_layers << '\n'
      << "dec_layers = " << dec_layers << '\n'
      << "encoder_kind = " << to_string(encoder_kind) << '\n'
      << "decoder_kind = " << to_string(decoder_kind) << '\n'
      << "attention_kind = " << to_string(attention_kind) << '\n'
      << "gru_hidden = " << gru_hidden << '\n'
      << "src_vocab = " << src_vocab << '\n'
      << "tgt_vocab = " << tgt_vocab << '\n'
      << "fused_weights = " << (fused_weights ? 1 : 0) << '\n';
  return out.str();
}

ModelConfig ModelConfig::parse(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  auto trim = [](const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed config line '" + line + "'");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(std::string("config is missing '") + key + "'");
    return it->second;
  };
  auto number = [&](const char* key) {
    const std::string& s = get(key);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ConfigError(std::string("config value for '") + key + "' is not an integer: " + s);
    }
    return v;
  };
  ModelConfig cfg;
  cfg.d_model = number("d_model");
  cfg.ffn_filter = number("ffn_filter");
  cfg.heads = number("heads");
  cfg.enc_layers = number("enc_layers");
  cfg.dec_layers = number("dec_layers");
  cfg.encoder_kind = parse_encoder_kind(get("encoder_kind"));
  cfg.decoder_kind = parse_decoder_kind(get("decoder_kind"));
  cfg.attention_kind = parse_attention_kind(get("attention_kind"));
  cfg.gru_hidden = number("gru_hidden");
  cfg.src_vocab = number("src_vocab");
  cfg.tgt_vocab = number("tgt_vocab");
  cfg.fused_weights = number("fused_weights") != 0;
  return cfg;
}

}  // namespace hmt
