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

#include <string>

#include "hmt/errors.hpp"
#include "hmt/training.hpp"

namespace hmt {

namespace {

TokenSeq strip_padding(const TokenSeq& ids) {
  TokenSeq out = ids;
  while (!out.empty() && out.back() == kPad) out.pop_back();
  return out;
}

struct Forced {
  TokenSeq src, tgt_in, tgt_out;
};

Forced forced(const TokenSeq& src, const TokenSeq& tgt) {
  Forced f;
  f.src = strip_padding(src);
  const TokenSeq body = strip_padding(tgt);
  f.tgt_in.reserve(body.size() + 1);
  f.tgt_in.push_back(kBos);
  f.tgt_in.insert(f.tgt_in.end(), body.begin(), body.end());
  f.tgt_out = body;
  f.tgt_out.push_back(kEos);
  return f;
}

Tensor batch_mean(std::vector<Tensor> terms) {
  if (terms.empty()) throw ContractError("loss over an empty batch");
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return scale(total, 1.0 / static_cast<double>(terms.size()));
}

Tensor token_kl(const Model& student, const Model& teacher, const Forced& f) {
  Tensor teacher_probs;
  {
    NoGradScope no_grad;
    teacher_probs = softmax(forward_teacher_forced(teacher, f.src, f.tgt_in), 1);
  }
  return kl_divergence(teacher_probs, forward_teacher_forced(student, f.src, f.tgt_in));
}

}  // namespace

Tensor sentence_nll(const Model& model, const TokenSeq& src, const TokenSeq& tgt) {
  const Forced f = forced(src, tgt);
  return cross_entropy(forward_teacher_forced(model, f.src, f.tgt_in), f.tgt_out);
}

Tensor mle_loss(const Model& student, std::span<const SentencePair> batch) {
  std::vector<Tensor> terms;
  terms.reserve(batch.size());
  for (const SentencePair& p : batch) terms.push_back(sentence_nll(student, p.src, p.tgt));
  return batch_mean(std::move(terms));
}

std::string_view to_string(KDMode mode) {
  switch (mode) {
    case KDMode::kTokenKl: return "token_kl";
    case KDMode::kSequenceLevel: return "sequence_level";
    case KDMode::kBoth: return "both";
  }
  return "?";
}

KDMode parse_kd_mode(std::string_view name) {
  if (name == "token_kl") return KDMode::kTokenKl;
  if (name == "sequence_level") return KDMode::kSequenceLevel;
  if (name == "both") return KDMode::kBoth;
  throw ConfigError("unknown kd mode '" + std::string(name) + "' (token_kl, sequence_level, both)");
}

KDLoss kd_loss_terms(const Model& student, const Model& teacher,
                     std::span<const SentencePair> batch, const KDConfig& kd) {
  if (student.config().tgt_vocab != teacher.config().tgt_vocab) {
    throw ConfigError("kd_loss: student target vocabulary " +
                      std::to_string(student.config().tgt_vocab) + " vs teacher " +
                      std::to_string(teacher.config().tgt_vocab));
  }
  if (!(kd.lambda >= 0.0)) throw ConfigError("kd_loss: lambda must be >= 0");
  std::vector<Tensor> mle_terms, kd_terms;
  for (const SentencePair& p : batch) {
    mle_terms.push_back(sentence_nll(student, p.src, p.tgt));
    const TokenSeq& target =
        kd.mode != KDMode::kTokenKl && p.distilled ? *p.distilled : p.tgt;
    if (kd.mode == KDMode::kSequenceLevel) {
      kd_terms.push_back(sentence_nll(student, p.src, target));
    } else {
      kd_terms.push_back(token_kl(student, teacher, forced(p.src, target)));
    }
  }
  KDLoss out;
  const Tensor mle = batch_mean(std::move(mle_terms));
  const Tensor term = batch_mean(std::move(kd_terms));
  out.mle = mle.item();
  out.kd = term.item();
  out.loss = add(mle, scale(term, kd.lambda));
  return out;
}

Tensor kd_loss(const Model& student, const Model& teacher, std::span<const SentencePair> batch,
               const KDConfig& kd) {
  return kd_loss_terms(student, teacher, batch, kd).loss;
}

}  // namespace hmt
