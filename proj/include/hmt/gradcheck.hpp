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

#include <functional>
#include <span>
#include <string>
#include <utility>

#include "hmt/tensor.hpp"

namespace hmt {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckResult {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst_name;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares backpropagated gradients of `loss_fn` against central finite
// differences for every element of every tensor in `params`.
//
// Relative error is |a - n| / max(|a|, |n|, abs_floor); the floor keeps
// gradients that are zero up to rounding from dominating the maximum.
// `loss_fn` must rebuild the loss from the current parameter values on each
// call. Parameter values are restored before returning.
GradCheckResult check_gradients(std::span<const NamedTensor> params,
                                const std::function<Tensor()>& loss_fn, double step = 1e-4,
                                double abs_floor = 1e-6);

}  // namespace hmt
