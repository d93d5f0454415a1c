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

// Per-submodule decoding time breakdown and architecture comparisons.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hmt/inference.hpp"
#include "hmt/model.hpp"
#include "hmt/timing.hpp"

namespace hmt {

class AccumulatingSink : public TimingSink {
 public:
  void add(Category category, double seconds) override {
    seconds_[static_cast<std::size_t>(category)] += seconds;
  }
  double get(Category category) const { return seconds_[static_cast<std::size_t>(category)]; }
  void reset() { seconds_.fill(0.0); }

 private:
  std::array<double, static_cast<std::size_t>(Category::kCount)> seconds_{};
};

// Report row labels, in order.
inline constexpr std::array<std::string_view, 8> kReportRows = {
    "Encoding", "Decoding", "Attention", "SelfAtt/GRU", "FFN", "Softmax", "Others", "Total"};

struct TimingReport {
  std::string name;
  double encoding = 0.0;
  double decoding = 0.0;
  double attention = 0.0;
  double self_att_or_gru = 0.0;
  double ffn = 0.0;
  double softmax = 0.0;
  std::size_t beam = 0;
  std::size_t sentences = 0;
  std::size_t tokens = 0;  // target tokens emitted (best hypotheses)
  // Mean per-hypothesis wall time of each decoding step, by step index.
  std::vector<double> step_seconds;

  double others() const { return decoding - (attention + self_att_or_gru + ffn + softmax); }
  double total() const { return encoding + decoding; }
  double words_per_second() const;
  // Value for one of kReportRows.
  double row(std::string_view label) const;
};

struct Workload {
  std::size_t sentences = 1000;
  std::size_t src_len = 20;
  std::size_t tgt_len = 20;  // forced: EOS is disabled
  std::uint64_t seed = 1;
  std::size_t warmup = 10;
};

// Uniformly random non-reserved ids.
std::vector<TokenSeq> make_pseudo_sentences(const Workload& wl, std::size_t src_vocab);

// Decodes the workload with beam search, timing each category. Outputs, when
// requested, receive the best hypothesis per sentence.
TimingReport profile_decode(const Model& model, const Workload& wl, std::size_t beam,
                            const DecodeOptions& opts = {},
                            std::vector<TokenSeq>* outputs = nullptr);

struct NamedConfig {
  std::string name;
  ModelConfig config;
};

struct Comparison {
  std::vector<TimingReport> reports;
  // ratio[i][j] = total(j) / total(i): how many times faster i is than j.
  std::vector<std::vector<double>> speedup;
};

Comparison compare_architectures(std::span<const NamedConfig> configs, const Workload& wl,
                                 std::size_t beam, std::uint64_t init_seed = 1);

struct AblationRow {
  bool precompute_kv = true;
  bool kv_cache = true;
  bool fused_weights = true;
  TimingReport report;
};

// All 8 toggle combinations, all-on first. Throws ContractError if any
// combination decodes a different token sequence.
std::vector<AblationRow> ablate_optimizations(const Model& model, const Workload& wl,
                                              std::size_t beam);

// Least-squares slope of values against their index.
double slope(std::span<const double> values);

// Aligned table with one column per report, followed by the reference
// breakdown columns.
std::string render_text(std::span<const TimingReport> reports);
// category,seconds,share_of_decoding
std::string render_csv(const TimingReport& report);
std::string render_comparison(const Comparison& comparison);
std::string render_ablation(std::span<const AblationRow> rows);

struct ReferenceColumn {
  std::string_view name;
  std::array<double, 8> values;  // kReportRows order; negative = not applicable
};

// Reference latency breakdown (K40, beam 8, seconds).
const std::array<ReferenceColumn, 3>& reference_breakdown();

}  // namespace hmt
