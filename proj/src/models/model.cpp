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

#include "hmt/model.hpp"

#include <array>
#include <cmath>
#include <string>

#include "hmt/errors.hpp"
#include "hmt/timing.hpp"

namespace hmt {

Model::Model(ModelConfig cfg, std::uint64_t seed)
    : Model(cfg, std::make_shared<ModelParams>(init_params(cfg, seed))) {}

Model::Model(ModelConfig cfg, std::shared_ptr<ModelParams> params)
    : cfg_(cfg), params_(std::move(params)), fused_cache_(std::make_shared<FusedCache>()) {
  cfg_.validate();
}

Model Model::with_fused_weights(bool fused) const {
  Model copy = *this;
  copy.cfg_.fused_weights = fused;
  return copy;
}

namespace {

Tensor concat3(const Tensor& a, const Tensor& b, const Tensor& c) {
  const std::array parts{a, b, c};
  return concat_cols(parts);
}

Tensor concat2(const Tensor& a, const Tensor& b) {
  const std::array parts{a, b};
  return concat_cols(parts);
}

FusedWeights build_fused(const ModelConfig& cfg, const ModelParams& p) {
  FusedWeights f;
  for (const EncoderLayerParams& l : p.encoder) {
    f.encoder_qkv.push_back(concat3(l.self.w_q, l.self.w_k, l.self.w_v));
  }
  for (const GRUParams& g : p.encoder_gru) f.encoder_gru.push_back(fuse(g));
  for (const TransformerDecoderLayerParams& l : p.decoder) {
    f.decoder_self_qkv.push_back(concat3(l.self.w_q, l.self.w_k, l.self.w_v));
    f.decoder_inter_kv.push_back(concat2(l.inter.w_k, l.inter.w_v));
  }
  if (cfg.decoder_kind == DecoderKind::kGru) {
    f.gru_cell = fuse(p.gru_decoder.cell);
    if (cfg.attention_kind == AttentionKind::kMultiHead) {
      f.gru_attn_kv = concat2(p.gru_decoder.multi_head.w_k, p.gru_decoder.multi_head.w_v);
    }
  }
  return f;
}

}  // namespace

std::shared_ptr<const FusedWeights> Model::fused() const {
  if (active_tape() != nullptr) {
    return std::make_shared<const FusedWeights>(build_fused(cfg_, *params_));
  }
  std::lock_guard lock(fused_cache_->mutex);
  if (!fused_cache_->weights || fused_cache_->version != params_->store.version()) {
    fused_cache_->weights = std::make_shared<const FusedWeights>(build_fused(cfg_, *params_));
    fused_cache_->version = params_->store.version();
  }
  return fused_cache_->weights;
}

std::size_t DecoderState::footprint() const {
  if (const auto* g = std::get_if<GruDecoderState>(&state)) return g->hidden.size() + 1;
  const auto& t = std::get<TransformerDecoderState>(state);
  std::size_t n = 1;
  for (const auto* cache : {&t.keys, &t.values, &t.inputs}) {
    for (const auto& c : *cache) n += c ? c->size() : 0;
  }
  return n;
}

namespace {

struct Projected {
  Tensor q, k, v;
};

// Q, K and V of `x` under one attention block, fused or not.
Projected project_qkv(const MultiHeadParams& p, const Tensor* fused_qkv, const Tensor& x) {
  const std::size_t d = p.model_dim();
  if (fused_qkv) {
    const Tensor qkv = matmul(x, *fused_qkv);
    return {slice_cols(qkv, 0, d), slice_cols(qkv, d, 2 * d), slice_cols(qkv, 2 * d, 3 * d)};
  }
  return {matmul(x, p.w_q), matmul(x, p.w_k), matmul(x, p.w_v)};
}

KVPair project_kv(const MultiHeadParams& p, const Tensor* fused_kv, const Tensor& states) {
  const std::size_t d = p.model_dim();
  if (fused_kv) {
    const Tensor kv = matmul(states, *fused_kv);
    return {slice_cols(kv, 0, d), slice_cols(kv, d, 2 * d)};
  }
  return {matmul(states, p.w_k), matmul(states, p.w_v)};
}

void check_token(TokenId id, std::size_t vocab, const char* what) {
  if (id >= vocab) {
    throw IndexError(std::string(what) + ": token id " + std::to_string(id) +
                     " outside vocabulary of " + std::to_string(vocab));
  }
}

double embed_scale(const ModelConfig& cfg) { return std::sqrt(static_cast<double>(cfg.d_model)); }

Tensor encode_self_attention(const Model& model, std::span<const TokenId> src) {
  const ModelConfig& cfg = model.config();
  const ModelParams& p = model.params();
  const auto fw = cfg.fused_weights ? model.fused() : nullptr;
  Tensor x = add(scale(embed(p.src_embed, src), embed_scale(cfg)),
                 positional_signal(src.size(), cfg.d_model));
  for (std::size_t l = 0; l < p.encoder.size(); ++l) {
    const EncoderLayerParams& layer = p.encoder[l];
    const Projected qkv = project_qkv(layer.self, fw ? &fw->encoder_qkv[l] : nullptr, x);
    const Tensor attn = matmul(attend_heads(qkv.q, qkv.k, qkv.v, layer.self.heads), layer.self.w_o);
    x = layer_norm(layer.ln_self, add(x, attn));
    x = layer_norm(layer.ln_ffn, add(x, ffn(layer.ffn, x)));
  }
  return x;
}

Tensor encode_gru(const Model& model, std::span<const TokenId> src) {
  const ModelConfig& cfg = model.config();
  const ModelParams& p = model.params();
  const auto fw = cfg.fused_weights ? model.fused() : nullptr;
  Tensor x = embed(p.src_embed, src);
  for (std::size_t l = 0; l < p.encoder_gru.size(); ++l) {
    Tensor h = Tensor::zeros({1, cfg.d_model});
    std::vector<Tensor> rows;
    rows.reserve(src.size());
    for (std::size_t t = 0; t < src.size(); ++t) {
      const Tensor xt = slice_rows(x, t, t + 1);
      h = fw ? gru_cell(fw->encoder_gru[l], xt, h) : gru_cell(p.encoder_gru[l], xt, h);
      rows.push_back(h);
    }
    x = concat_rows(rows);
  }
  return x;
}

}  // namespace

EncoderOutput encode(const Model& model, std::span<const TokenId> src) {
  if (src.empty()) throw ContractError("encode: empty source sentence");
  ScopedTiming timing(Category::kEncoding);
  for (TokenId id : src) check_token(id, model.config().src_vocab, "encode");
  EncoderOutput out;
  out.states = model.config().encoder_kind == EncoderKind::kSelfAttention
                   ? encode_self_attention(model, src)
                   : encode_gru(model, src);
  return out;
}

void precompute_attention(const Model& model, EncoderOutput& enc) {
  ScopedTiming timing(Category::kEncoding);
  const ModelConfig& cfg = model.config();
  const ModelParams& p = model.params();
  const auto fw = cfg.fused_weights ? model.fused() : nullptr;
  enc.precomputed_kv.clear();
  enc.additive_keys.reset();
  if (cfg.decoder_kind == DecoderKind::kTransformer) {
    for (std::size_t l = 0; l < p.decoder.size(); ++l) {
      enc.precomputed_kv.push_back(
          project_kv(p.decoder[l].inter, fw ? &fw->decoder_inter_kv[l] : nullptr, enc.states));
    }
    return;
  }
  switch (cfg.attention_kind) {
    case AttentionKind::kAdditive:
      enc.additive_keys = matmul(enc.states, p.gru_decoder.additive.u_a);
      break;
    case AttentionKind::kMultiHead:
      enc.precomputed_kv.push_back(project_kv(p.gru_decoder.multi_head,
                                              fw ? &*fw->gru_attn_kv : nullptr, enc.states));
      break;
    case AttentionKind::kDot:
      break;
  }
}

namespace {

Tensor gru_initial_hidden(const Model& model, const EncoderOutput& enc) {
  const GruDecoderParams& g = model.params().gru_decoder;
  return tanh(add_bias(matmul(mean_rows(enc.states), g.init_w), g.init_b));
}

// Source context for the GRU decoder given the previous hidden state.
Tensor gru_context(const Model& model, const FusedWeights* fw, const EncoderOutput& enc,
                   const Tensor& hidden) {
  const ModelConfig& cfg = model.config();
  const GruDecoderParams& g = model.params().gru_decoder;
  switch (cfg.attention_kind) {
    case AttentionKind::kAdditive:
      return additive_attention(g.additive, hidden, enc.states, enc.additive_keys).context;
    case AttentionKind::kDot: {
      const Tensor query = g.bridge ? matmul(hidden, *g.bridge) : hidden;
      return dot_attention(query, enc.states).context;
    }
    case AttentionKind::kMultiHead: {
      if (!enc.precomputed_kv.empty()) {
        const KVPair& kv = enc.precomputed_kv.front();
        return multi_head_attention_cached(g.multi_head, hidden, kv.keys, kv.values);
      }
      if (fw) {
        const KVPair kv = project_kv(g.multi_head, &*fw->gru_attn_kv, enc.states);
        return multi_head_attention_cached(g.multi_head, hidden, kv.keys, kv.values);
      }
      return multi_head_attention(g.multi_head, hidden, enc.states);
    }
  }
  throw ConfigError("unhandled attention kind");
}

Tensor inter_attention(const TransformerDecoderLayerParams& layer, const Tensor* fused_kv,
                       const EncoderOutput& enc, std::size_t l, const Tensor& x) {
  if (l < enc.precomputed_kv.size()) {
    const KVPair& kv = enc.precomputed_kv[l];
    return multi_head_attention_cached(layer.inter, x, kv.keys, kv.values);
  }
  if (fused_kv) {
    const KVPair kv = project_kv(layer.inter, fused_kv, enc.states);
    return multi_head_attention_cached(layer.inter, x, kv.keys, kv.values);
  }
  return multi_head_attention(layer.inter, x, enc.states);
}

Tensor append_row(const std::optional<Tensor>& history, const Tensor& row) {
  if (!history) return row;
  const std::array parts{*history, row};
  return concat_rows(parts);
}

}  // namespace

DecoderState initial_state(const Model& model, const EncoderOutput& enc, bool kv_cache) {
  const ModelConfig& cfg = model.config();
  if (cfg.decoder_kind == DecoderKind::kGru) {
    return {GruDecoderState{gru_initial_hidden(model, enc), kBos}};
  }
  TransformerDecoderState s;
  s.kv_cache = kv_cache;
  s.keys.resize(cfg.dec_layers);
  s.values.resize(cfg.dec_layers);
  s.inputs.resize(cfg.dec_layers);
  return {std::move(s)};
}

StepOutput decode_step(const Model& model, const EncoderOutput& enc, const DecoderState& state,
                       TokenId prev) {
  if (const auto* g = std::get_if<GruDecoderState>(&state.state)) {
    return decode_step_gru(model, enc, *g, prev);
  }
  return decode_step_transformer(model, enc, std::get<TransformerDecoderState>(state.state), prev);
}

StepOutput decode_step_gru(const Model& model, const EncoderOutput& enc,
                           const GruDecoderState& state, TokenId prev) {
  const ModelConfig& cfg = model.config();
  if (cfg.decoder_kind != DecoderKind::kGru) throw ConfigError("decode_step_gru on a non-GRU model");
  check_token(prev, cfg.tgt_vocab, "decode_step_gru");
  if (state.hidden.size() != cfg.gru_hidden) {
    throw DimensionError("decode_step_gru: hidden state " + to_string(state.hidden.shape()) +
                         " for gru_hidden " + std::to_string(cfg.gru_hidden));
  }
  const ModelParams& p = model.params();
  const auto fw = cfg.fused_weights ? model.fused() : nullptr;
  const TokenId ids[] = {prev};
  const Tensor e = embed(p.tgt_embed, ids);

  Tensor context;
  {
    ScopedTiming timing(Category::kAttention);
    context = gru_context(model, fw.get(), enc, state.hidden);
  }
  Tensor hidden;
  {
    ScopedTiming timing(Category::kSelfAttOrGru);
    const Tensor x = concat2(e, context);
    hidden = fw ? gru_cell(*fw->gru_cell, x, state.hidden) : gru_cell(p.gru_decoder.cell, x, state.hidden);
  }
  Tensor logits;
  {
    ScopedTiming timing(Category::kSoftmax);
    logits = add_bias(matmul(concat3(hidden, context, e), p.out_w), p.out_b);
  }
  return {logits, DecoderState{GruDecoderState{hidden, prev}}};
}

StepOutput decode_step_transformer(const Model& model, const EncoderOutput& enc,
                                   const TransformerDecoderState& state, TokenId prev) {
  const ModelConfig& cfg = model.config();
  if (cfg.decoder_kind != DecoderKind::kTransformer) {
    throw ConfigError("decode_step_transformer on a non-Transformer model");
  }
  check_token(prev, cfg.tgt_vocab, "decode_step_transformer");
  if (state.keys.size() != cfg.dec_layers || state.inputs.size() != cfg.dec_layers) {
    throw DimensionError("decode_step_transformer: state has " + std::to_string(state.keys.size()) +
                         " layers, model has " + std::to_string(cfg.dec_layers));
  }
  const ModelParams& p = model.params();
  const auto fw = cfg.fused_weights ? model.fused() : nullptr;
  const std::size_t d = cfg.d_model;
  const TokenId ids[] = {prev};
  Tensor x = add(scale(embed(p.tgt_embed, ids), embed_scale(cfg)),
                 positional_signal(1, d, state.step));

  TransformerDecoderState next;
  next.kv_cache = state.kv_cache;
  next.step = state.step + 1;
  next.keys.resize(cfg.dec_layers);
  next.values.resize(cfg.dec_layers);
  next.inputs.resize(cfg.dec_layers);

  for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
    const TransformerDecoderLayerParams& layer = p.decoder[l];
    {
      ScopedTiming timing(Category::kSelfAttOrGru);
      const Tensor* fused_qkv = fw ? &fw->decoder_self_qkv[l] : nullptr;
      Tensor q, keys, values;
      if (state.kv_cache) {
        const Projected proj = project_qkv(layer.self, fused_qkv, x);
        q = proj.q;
        keys = append_row(state.keys[l], proj.k);
        values = append_row(state.values[l], proj.v);
        next.keys[l] = keys;
        next.values[l] = values;
      } else {
        const Tensor history = append_row(state.inputs[l], x);
        const Projected proj = project_qkv(layer.self, fused_qkv, history);
        q = slice_rows(proj.q, history.rows() - 1, history.rows());
        keys = proj.k;
        values = proj.v;
        next.inputs[l] = history;
      }
      const Tensor attn = matmul(attend_heads(q, keys, values, layer.self.heads), layer.self.w_o);
      x = layer_norm(layer.ln_self, add(x, attn));
    }
    {
      ScopedTiming timing(Category::kAttention);
      const Tensor ctx = inter_attention(layer, fw ? &fw->decoder_inter_kv[l] : nullptr, enc, l, x);
      x = layer_norm(layer.ln_inter, add(x, ctx));
    }
    {
      ScopedTiming timing(Category::kFfn);
      x = layer_norm(layer.ln_ffn, add(x, ffn(layer.ffn, x)));
    }
  }
  Tensor logits;
  {
    ScopedTiming timing(Category::kSoftmax);
    logits = add_bias(matmul(x, p.out_w), p.out_b);
  }
  return {logits, DecoderState{std::move(next)}};
}

namespace {

Tensor teacher_forced_transformer(const Model& model, const EncoderOutput& enc,
                                  std::span<const TokenId> tgt_in) {
  const ModelConfig& cfg = model.config();
  const ModelParams& p = model.params();
  const auto fw = cfg.fused_weights ? model.fused() : nullptr;
  const std::size_t t_len = tgt_in.size();
  Tensor x = add(scale(embed(p.tgt_embed, tgt_in), embed_scale(cfg)),
                 positional_signal(t_len, cfg.d_model));
  const AttentionMask causal = AttentionMask::causal(t_len, t_len);
  for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
    const TransformerDecoderLayerParams& layer = p.decoder[l];
    const Projected qkv = project_qkv(layer.self, fw ? &fw->decoder_self_qkv[l] : nullptr, x);
    const Tensor attn =
        matmul(attend_heads(qkv.q, qkv.k, qkv.v, layer.self.heads, &causal), layer.self.w_o);
    x = layer_norm(layer.ln_self, add(x, attn));
    const Tensor ctx = inter_attention(layer, fw ? &fw->decoder_inter_kv[l] : nullptr, enc, l, x);
    x = layer_norm(layer.ln_inter, add(x, ctx));
    x = layer_norm(layer.ln_ffn, add(x, ffn(layer.ffn, x)));
  }
  return add_bias(matmul(x, p.out_w), p.out_b);
}

// Sequential scan with the input-side gate products for all embeddings done
// as one matrix product and the readout done once for the whole sequence.
Tensor teacher_forced_gru(const Model& model, const EncoderOutput& enc,
                          std::span<const TokenId> tgt_in) {
  const ModelConfig& cfg = model.config();
  const ModelParams& p = model.params();
  const auto fw = model.fused();
  const GRUFused& cell = *fw->gru_cell;
  const std::size_t d = cfg.d_model;
  const Tensor emb = embed(p.tgt_embed, tgt_in);
  const Tensor w_emb = slice_rows(cell.w, 0, d);
  const Tensor w_ctx = slice_rows(cell.w, d, 2 * d);
  const Tensor emb_proj = add_bias(matmul(emb, w_emb), cell.b);

  EncoderOutput local = enc;
  if (cfg.attention_kind == AttentionKind::kAdditive && !local.additive_keys) {
    local.additive_keys = matmul(enc.states, p.gru_decoder.additive.u_a);
  }
  if (cfg.attention_kind == AttentionKind::kMultiHead && local.precomputed_kv.empty()) {
    local.precomputed_kv.push_back(project_kv(p.gru_decoder.multi_head, nullptr, enc.states));
  }

  Tensor hidden = gru_initial_hidden(model, local);
  std::vector<Tensor> hiddens, contexts;
  hiddens.reserve(tgt_in.size());
  contexts.reserve(tgt_in.size());
  for (std::size_t t = 0; t < tgt_in.size(); ++t) {
    const Tensor context = gru_context(model, nullptr, local, hidden);
    const Tensor x_proj = add(slice_rows(emb_proj, t, t + 1), matmul(context, w_ctx));
    hidden = gru_cell_from_projected(cell, x_proj, hidden);
    hiddens.push_back(hidden);
    contexts.push_back(context);
  }
  const Tensor readout = concat3(concat_rows(hiddens), concat_rows(contexts), emb);
  return add_bias(matmul(readout, p.out_w), p.out_b);
}

}  // namespace

Tensor forward_teacher_forced(const Model& model, const EncoderOutput& enc,
                              std::span<const TokenId> tgt_in) {
  if (tgt_in.empty()) throw ContractError("forward_teacher_forced: empty target");
  if (tgt_in.front() != kBos) throw ContractError("forward_teacher_forced: target must start with BOS");
  for (TokenId id : tgt_in) check_token(id, model.config().tgt_vocab, "forward_teacher_forced");
  return model.config().decoder_kind == DecoderKind::kGru
             ? teacher_forced_gru(model, enc, tgt_in)
             : teacher_forced_transformer(model, enc, tgt_in);
}

Tensor forward_teacher_forced(const Model& model, std::span<const TokenId> src,
                              std::span<const TokenId> tgt_in) {
  return forward_teacher_forced(model, encode(model, src), tgt_in);
}

}  // namespace hmt
