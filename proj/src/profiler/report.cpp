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

#include <cstdio>
#include <string>

#include "hmt/profiler.hpp"

namespace hmt {

const std::array<ReferenceColumn, 3>& reference_breakdown() {
  static const std::array<ReferenceColumn, 3> table = {{
      {"RNMT", {72.3, 138.0, 43.3, 42.9, -1.0, 40.1, 11.7, 210.3}},
      {"Trans(base)", {63.2, 434.1, 99.3, 152.0, 86.1, 46.7, 50.0, 497.3}},
      {"Trans(1layer)", {10.6, 170.5, 24.9, 41.5, 19.9, 45.6, 38.6, 181.1}},
  }};
  return table;
}

namespace {

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

std::string render_text(std::span<const TimingReport> reports) {
  constexpr std::size_t kLabel = 12, kCol = 14;
  std::string out = std::string(kLabel, ' ');
  for (const TimingReport& r : reports) out += pad(r.name, kCol);
  for (const ReferenceColumn& c : reference_breakdown()) out += pad(std::string(c.name) + "*", kCol);
  out += '\n';
  for (std::size_t i = 0; i < kReportRows.size(); ++i) {
    std::string line(kReportRows[i]);
    line.resize(kLabel, ' ');
    for (const TimingReport& r : reports) line += pad(format("%.4f", r.row(kReportRows[i])), kCol);
    for (const ReferenceColumn& c : reference_breakdown()) {
      line += pad(c.values[i] < 0.0 ? "-" : format("%.1f", c.values[i]), kCol);
    }
    out += line + '\n';
  }
  for (const TimingReport& r : reports) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%s: beam %zu, %zu sentences, %zu tokens, %.1f words/s\n",
                  r.name.c_str(), r.beam, r.sentences, r.tokens, r.words_per_second());
    out += buf;
  }
  out += "seconds; * reference K40 figures, shown for scale only\n";
  return out;
}

std::string render_csv(const TimingReport& report) {
  std::string out = "category,seconds,share_of_decoding\n";
  for (std::string_view label : kReportRows) {
    const double v = report.row(label);
    const double share = report.decoding > 0.0 ? v / report.decoding : 0.0;
    out += std::string(label) + "," + format("%.9g", v) + "," + format("%.6f", share) + "\n";
  }
  return out;
}

std::string render_comparison(const Comparison& c) {
  std::string out = render_text(c.reports);
  out += "\nspeedup (row faster than column by)\n";
  std::string header(14, ' ');
  for (const TimingReport& r : c.reports) header += pad(r.name, 14);
  out += header + '\n';
  for (std::size_t i = 0; i < c.reports.size(); ++i) {
    std::string line = c.reports[i].name;
    line.resize(14, ' ');
    for (double s : c.speedup[i]) line += pad(format("%.2fx", s), 14);
    out += line + '\n';
  }
  return out;
}

std::string render_ablation(std::span<const AblationRow> rows) {
  std::string out = "precompute  kv_cache  fused       Total    Decoding\n";
  for (const AblationRow& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-10s  %-8s  %-5s  %10.4f  %10.4f\n",
                  r.precompute_kv ? "on" : "off", r.kv_cache ? "on" : "off",
                  r.fused_weights ? "on" : "off", r.report.total(), r.report.decoding);
    out += buf;
  }
  return out;
}

}  // namespace hmt
