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

#include <cmath>

#include "hmt/errors.hpp"
#include "hmt/training.hpp"

namespace hmt {

double gradient_norm(const ParamStore& store) {
  double sq = 0.0;
  for (const NamedTensor& e : store.entries()) {
    if (!e.tensor.has_grad()) continue;
    for (double g : e.tensor.impl()->grad) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(ParamStore& store, double max_norm) {
  const double norm = gradient_norm(store);
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const NamedTensor& e : store.entries()) {
      for (double& g : e.tensor.impl()->grad) g *= factor;
    }
  }
  return norm;
}

double Adam::step(ParamStore& store) {
  const double norm = clip_gradients(store, cfg_.clip_norm);
  const auto entries = store.entries();
  if (m_.empty()) {
    for (const NamedTensor& e : entries) {
      m_.emplace_back(e.tensor.size(), 0.0);
      v_.emplace_back(e.tensor.size(), 0.0);
    }
  }
  if (m_.size() != entries.size()) throw ContractError("Adam: parameter set changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor p = entries[i].tensor;
    if (!p.has_grad()) continue;
    const std::vector<double>& g = p.impl()->grad;
    std::span<double> w = p.mutable_data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      w[j] -= cfg_.learning_rate * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + cfg_.epsilon);
    }
  }
  store.zero_grad();
  store.bump_version();
  return norm;
}

}  // namespace hmt
