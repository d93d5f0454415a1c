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

// Differentiable tensor operations. All ops check shapes up front and throw
// DimensionError naming both operands; every output is checked for NaN/Inf
// and a NumericError names the producing op.
//
// Broadcasting is limited to add_bias (a vector over the last axis).

#include <cstdint>
#include <span>
#include <vector>

#include "hmt/tensor.hpp"
#include "hmt/tokens.hpp"

namespace hmt {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double factor);
// alpha * x + beta, elementwise.
Tensor affine(const Tensor& x, double alpha, double beta);

// [m x k] . [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m x k] . [n x k]^T, without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// [L x n] -> [1 x n]
Tensor mean_rows(const Tensor& x);

// Max-subtracted, so inputs of magnitude up to 1e4 and beyond do not overflow.
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);
// Normalizes over the last axis, then applies gain and bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);

// Positions with allowed[i] == 0 are replaced by `fill` and get no gradient.
Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> allowed, double fill);

// Row gather from a [V x d] table. Gradients scatter-add into the table.
Tensor embed(const Tensor& table, std::span<const TokenId> ids);

// Mean over rows of -log softmax(logits)[t, targets[t]].
Tensor cross_entropy(const Tensor& logits, std::span<const TokenId> targets);

// Mean over rows of KL(p || softmax(logits)). `teacher_probs` is a constant:
// it must not require a gradient.
Tensor kl_divergence(const Tensor& teacher_probs, const Tensor& student_logits);

}  // namespace hmt
