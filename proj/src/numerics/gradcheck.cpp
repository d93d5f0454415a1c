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

#include "hmt/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace hmt {

GradCheckResult check_gradients(std::span<const NamedTensor> params,
                                const std::function<Tensor()>& loss_fn, double step,
                                double abs_floor) {
  std::vector<std::vector<double>> analytic;
  {
    for (const NamedTensor& p : params) {
      Tensor t = p.tensor;
      t.set_requires_grad(true);
      t.zero_grad();
    }
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = loss_fn();
    backward(tape, loss);
    for (const NamedTensor& p : params) analytic.push_back(p.tensor.grad());
  }

  GradCheckResult result;
  NoGradScope no_grad;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = params[pi].tensor;
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = loss_fn().item();
      values[i] = saved - step;
      const double down = loss_fn().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_name = params[pi].name;
        result.worst_index = i;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace hmt
