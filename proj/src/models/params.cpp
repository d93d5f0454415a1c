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

#include "hmt/params.hpp"

#include <cmath>

#include "hmt/errors.hpp"
#include "hmt/rng.hpp"

namespace hmt {

Tensor ParamStore::add(std::string name, Tensor tensor) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  tensor.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), tensor});
  return tensor;
}

const Tensor& ParamStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return entries_[it->second].tensor;
}

bool ParamStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const NamedTensor& e : entries_) n += e.tensor.size();
  return n;
}

void ParamStore::zero_grad() {
  for (NamedTensor& e : entries_) e.tensor.zero_grad();
}

std::size_t readout_dim(const ModelConfig& cfg) {
  // GRU readout sees [hidden, context, previous embedding].
  return cfg.decoder_kind == DecoderKind::kGru ? cfg.gru_hidden + 2 * cfg.d_model : cfg.d_model;
}

namespace {

class Initializer {
 public:
  Initializer(ParamStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Tensor matrix(const std::string& name, std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng_.uniform(-limit, limit);
    return store_.add(name, Tensor::from({rows, cols}, std::move(v)));
  }

  Tensor vector(const std::string& name, std::size_t n, double value) {
    return store_.add(name, Tensor::full({n}, value));
  }

  Tensor uniform_vector(const std::string& name, std::size_t n) {
    const double limit = std::sqrt(6.0 / static_cast<double>(n + 1));
    std::vector<double> v(n);
    for (double& x : v) x = rng_.uniform(-limit, limit);
    return store_.add(name, Tensor::from({n}, std::move(v)));
  }

  Tensor embedding(const std::string& name, std::size_t vocab, std::size_t d) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> v(vocab * d);
    for (double& x : v) x = rng_.normal(0.0, stddev);
    return store_.add(name, Tensor::from({vocab, d}, std::move(v)));
  }

  MultiHeadParams multi_head(const std::string& prefix, std::size_t d_query, std::size_t d,
                             std::size_t heads) {
    MultiHeadParams p;
    p.w_q = matrix(prefix + ".w_q", d_query, d);
    p.w_k = matrix(prefix + ".w_k", d, d);
    p.w_v = matrix(prefix + ".w_v", d, d);
    p.w_o = matrix(prefix + ".w_o", d, d);
    p.heads = heads;
    return p;
  }

  LayerNormParams layer_norm(const std::string& prefix, std::size_t d) {
    return {vector(prefix + ".gain", d, 1.0), vector(prefix + ".bias", d, 0.0)};
  }

  FFNParams ffn(const std::string& prefix, std::size_t d, std::size_t filter) {
    FFNParams p;
    p.w1 = matrix(prefix + ".w1", d, filter);
    p.b1 = vector(prefix + ".b1", filter, 0.0);
    p.w2 = matrix(prefix + ".w2", filter, d);
    p.b2 = vector(prefix + ".b2", d, 0.0);
    return p;
  }

  GRUParams gru(const std::string& prefix, std::size_t d_in, std::size_t d_h) {
    GRUParams p;
    p.w_z = matrix(prefix + ".w_z", d_in, d_h);
    p.w_r = matrix(prefix + ".w_r", d_in, d_h);
    p.w_h = matrix(prefix + ".w_h", d_in, d_h);
    p.u_z = matrix(prefix + ".u_z", d_h, d_h);
    p.u_r = matrix(prefix + ".u_r", d_h, d_h);
    p.u_h = matrix(prefix + ".u_h", d_h, d_h);
    p.b_z = vector(prefix + ".b_z", d_h, 0.0);
    p.b_r = vector(prefix + ".b_r", d_h, 0.0);
    p.b_h = vector(prefix + ".b_h", d_h, 0.0);
    return p;
  }

 private:
  ParamStore& store_;
  Rng rng_;
};

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  Initializer init(p.store, seed);
  const std::size_t d = cfg.d_model;

  p.src_embed = init.embedding("src_embed", cfg.src_vocab, d);
  p.tgt_embed = init.embedding("tgt_embed", cfg.tgt_vocab, d);

  if (cfg.encoder_kind == EncoderKind::kSelfAttention) {
    for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
      const std::string pre = "enc." + std::to_string(l);
      EncoderLayerParams layer;
      layer.self = init.multi_head(pre + ".self", d, d, cfg.heads);
      layer.ln_self = init.layer_norm(pre + ".ln_self", d);
      layer.ffn = init.ffn(pre + ".ffn", d, cfg.ffn_filter);
      layer.ln_ffn = init.layer_norm(pre + ".ln_ffn", d);
      p.encoder.push_back(std::move(layer));
    }
  } else {
    for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
      p.encoder_gru.push_back(init.gru("enc_gru." + std::to_string(l), d, d));
    }
  }

  if (cfg.decoder_kind == DecoderKind::kTransformer) {
    for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
      const std::string pre = "dec." + std::to_string(l);
      TransformerDecoderLayerParams layer;
      layer.self = init.multi_head(pre + ".self", d, d, cfg.heads);
      layer.ln_self = init.layer_norm(pre + ".ln_self", d);
      layer.inter = init.multi_head(pre + ".inter", d, d, cfg.heads);
      layer.ln_inter = init.layer_norm(pre + ".ln_inter", d);
      layer.ffn = init.ffn(pre + ".ffn", d, cfg.ffn_filter);
      layer.ln_ffn = init.layer_norm(pre + ".ln_ffn", d);
      p.decoder.push_back(std::move(layer));
    }
  } else {
    const std::size_t h = cfg.gru_hidden;
    GruDecoderParams& g = p.gru_decoder;
    g.init_w = init.matrix("gru_dec.init_w", d, h);
    g.init_b = init.vector("gru_dec.init_b", h, 0.0);
    g.cell = init.gru("gru_dec.cell", 2 * d, h);
    switch (cfg.attention_kind) {
      case AttentionKind::kAdditive:
        g.additive.w_a = init.matrix("gru_dec.attn.w_a", h, d);
        g.additive.u_a = init.matrix("gru_dec.attn.u_a", d, d);
        g.additive.v_a = init.uniform_vector("gru_dec.attn.v_a", d);
        break;
      case AttentionKind::kDot:
        if (h != d) g.bridge = init.matrix("gru_dec.attn.bridge", h, d);
        break;
      case AttentionKind::kMultiHead:
        g.multi_head = init.multi_head("gru_dec.attn.mha", h, d, cfg.heads);
        break;
    }
  }

  p.out_w = init.matrix("out.w", readout_dim(cfg), cfg.tgt_vocab);
  p.out_b = init.vector("out.b", cfg.tgt_vocab, 0.0);
  return p;
}

}  // namespace hmt
