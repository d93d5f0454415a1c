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

#include "hmt/profiler.hpp"

#include <string>

#include "hmt/errors.hpp"
#include "hmt/rng.hpp"

namespace hmt {

namespace {
thread_local TimingSink* g_sink = nullptr;
}  // namespace

TimingSink* active_timing_sink() { return g_sink; }

TimingSinkScope::TimingSinkScope(TimingSink* sink) : previous_(g_sink) { g_sink = sink; }
TimingSinkScope::~TimingSinkScope() { g_sink = previous_; }

double TimingReport::words_per_second() const {
  const double t = total();
  return t > 0.0 ? static_cast<double>(tokens) / t : 0.0;
}

double TimingReport::row(std::string_view label) const {
  if (label == "Encoding") return encoding;
  if (label == "Decoding") return decoding;
  if (label == "Attention") return attention;
  if (label == "SelfAtt/GRU") return self_att_or_gru;
  if (label == "FFN") return ffn;
  if (label == "Softmax") return softmax;
  if (label == "Others") return others();
  if (label == "Total") return total();
  throw ContractError("unknown report row '" + std::string(label) + "'");
}

std::vector<TokenSeq> make_pseudo_sentences(const Workload& wl, std::size_t src_vocab) {
  if (src_vocab <= kNumReserved) throw ConfigError("pseudo sentences need non-reserved ids");
  if (wl.src_len == 0) throw ConfigError("workload source length must be positive");
  Rng rng(wl.seed);
  std::vector<TokenSeq> out(wl.sentences, TokenSeq(wl.src_len));
  for (TokenSeq& s : out) {
    for (TokenId& t : s) t = static_cast<TokenId>(kNumReserved + rng.below(src_vocab - kNumReserved));
  }
  return out;
}

TimingReport profile_decode(const Model& model, const Workload& wl, std::size_t beam,
                            const DecodeOptions& opts, std::vector<TokenSeq>* outputs) {
  if (wl.tgt_len == 0) throw ConfigError("workload target length must be positive");
  NoGradScope no_grad;
  BeamConfig bc;
  bc.beam_size = beam;
  bc.forced_length = wl.tgt_len;
  const std::vector<TokenSeq> sources = make_pseudo_sentences(wl, model.config().src_vocab);

  Workload warm = wl;
  warm.seed = wl.seed ^ 0x9e3779b97f4a7c15ULL;
  warm.sentences = wl.warmup;
  for (const TokenSeq& s : make_pseudo_sentences(warm, model.config().src_vocab)) {
    beam_search(model, s, bc, opts);
  }

  AccumulatingSink sink;
  TimingReport report;
  report.name = std::string(to_string(model.config().decoder_kind));
  report.beam = beam;
  report.sentences = sources.size();
  std::vector<double> steps;
  DecodeOptions timed = opts;
  timed.step_seconds = &steps;
  if (outputs) outputs->clear();
  {
    TimingSinkScope scope(&sink);
    for (const TokenSeq& s : sources) {
      steps.clear();
      const BeamResult r = beam_search(model, s, bc, timed);
      report.tokens += r.best.size();
      if (outputs) outputs->push_back(r.best);
      if (report.step_seconds.size() < steps.size()) report.step_seconds.resize(steps.size(), 0.0);
      for (std::size_t i = 0; i < steps.size(); ++i) report.step_seconds[i] += steps[i];
    }
  }
  for (double& s : report.step_seconds) s /= static_cast<double>(sources.size());
  report.encoding = sink.get(Category::kEncoding);
  report.decoding = sink.get(Category::kDecoding);
  report.attention = sink.get(Category::kAttention);
  report.self_att_or_gru = sink.get(Category::kSelfAttOrGru);
  report.ffn = sink.get(Category::kFfn);
  report.softmax = sink.get(Category::kSoftmax);
  return report;
}

Comparison compare_architectures(std::span<const NamedConfig> configs, const Workload& wl,
                                 std::size_t beam, std::uint64_t init_seed) {
  if (configs.size() < 2) throw ConfigError("compare_architectures needs at least two configs");
  Comparison c;
  for (const NamedConfig& nc : configs) {
    const Model model(nc.config, init_seed);
    TimingReport r = profile_decode(model, wl, beam);
    r.name = nc.name;
    c.reports.push_back(std::move(r));
  }
  const std::size_t n = c.reports.size();
  c.speedup.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double ti = c.reports[i].total();
      c.speedup[i][j] = ti > 0.0 ? c.reports[j].total() / ti : 0.0;
    }
  }
  return c;
}

std::vector<AblationRow> ablate_optimizations(const Model& model, const Workload& wl,
                                              std::size_t beam) {
  std::vector<AblationRow> rows;
  std::vector<TokenSeq> reference;
  for (int mask = 7; mask >= 0; --mask) {
    AblationRow row;
    row.precompute_kv = (mask & 4) != 0;
    row.kv_cache = (mask & 2) != 0;
    row.fused_weights = (mask & 1) != 0;
    const Model variant = model.with_fused_weights(row.fused_weights);
    DecodeOptions opts;
    opts.precompute_kv = row.precompute_kv;
    opts.kv_cache = row.kv_cache;
    std::vector<TokenSeq> outputs;
    row.report = profile_decode(variant, wl, beam, opts, &outputs);
    if (rows.empty()) {
      reference = std::move(outputs);
    } else if (outputs != reference) {
      throw ContractError(std::string("optimization toggles changed decoded output (precompute=") +
                          (row.precompute_kv ? "on" : "off") + ", kv_cache=" +
                          (row.kv_cache ? "on" : "off") + ", fused=" +
                          (row.fused_weights ? "on" : "off") + ")");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double slope(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += static_cast<double>(i);
    my += values[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxy += dx * (values[i] - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace hmt
