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

// Losses, optimizer and the two-stage MLE + distillation trainer.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "hmt/data.hpp"
#include "hmt/inference.hpp"
#include "hmt/model.hpp"

namespace hmt {

// Mean over the batch of per-sentence mean token cross-entropy. Trailing PAD
// on either side is ignored.
Tensor mle_loss(const Model& student, std::span<const SentencePair> batch);

// Per-sentence mean token cross-entropy for one pair.
Tensor sentence_nll(const Model& model, const TokenSeq& src, const TokenSeq& tgt);

enum class KDMode { kTokenKl, kSequenceLevel, kBoth };

std::string_view to_string(KDMode mode);
KDMode parse_kd_mode(std::string_view name);

struct KDConfig {
  double lambda = 1.0;
  KDMode mode = KDMode::kBoth;
  const Model* teacher = nullptr;
  // Beam settings for generating the distilled corpus.
  BeamConfig beam;
};

struct KDLoss {
  Tensor loss;
  double mle = 0.0;
  double kd = 0.0;  // the regularizer before scaling by lambda
};

// Loss to minimize: mle(gold) + lambda * term, where term is
//   token_kl:        mean KL(teacher || student) forced on the gold target
//   sequence_level:  student NLL of the distilled target
//   both:            mean KL(teacher || student) forced on the distilled target
// Pairs without a distilled target use the gold one. Teacher distributions
// are constants. Throws ConfigError when target vocabularies differ.
KDLoss kd_loss_terms(const Model& student, const Model& teacher,
                     std::span<const SentencePair> batch, const KDConfig& kd);
Tensor kd_loss(const Model& student, const Model& teacher, std::span<const SentencePair> batch,
               const KDConfig& kd);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // 0 disables clipping
};

// Scales all gradients so their global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_gradients(ParamStore& store, double max_norm);
double gradient_norm(const ParamStore& store);

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  // Clips, updates every parameter from its gradient, zeroes gradients and
  // bumps the store version. Returns the pre-clip gradient norm.
  double step(ParamStore& store);

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 10;
  std::uint64_t seed = 1;
  // Stop once the epoch's evaluation accuracy reaches this value.
  std::optional<double> target_accuracy;
  // Pairs from the head of the training corpus used for per-epoch accuracy
  // when no evaluation corpus is given; 0 skips accuracy.
  std::size_t eval_limit = 200;
  // Stop after this many batches in total (budget-constrained runs).
  std::optional<std::size_t> max_batches;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;      // mean batch loss
  double accuracy = 0.0;  // greedy token accuracy, NaN when not measured
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::size_t batches = 0;
};

using LossFn = std::function<Tensor(const Model&, std::span<const SentencePair>)>;

// Length-bucketed minibatches in a seeded shuffled order. Throws NumericError
// with the epoch and batch if the loss stops being finite.
TrainHistory train(Model& model, const ParallelCorpus& corpus, const TrainConfig& tc,
                   const LossFn& loss_fn, const ParallelCorpus* eval = nullptr);

// Batches of corpus indices grouped by length, in a seeded shuffled order.
std::vector<std::vector<std::size_t>> make_batches(const ParallelCorpus& corpus,
                                                   std::size_t batch_size, std::uint64_t seed);

// Free-running greedy decode scored position by position against tgt + EOS.
double token_accuracy(const Model& model, std::span<const SentencePair> corpus);

// Teacher's best beam hypothesis for each source (EOS stripped).
ParallelCorpus distill_corpus(const Model& teacher, std::span<const SentencePair> corpus,
                              const BeamConfig& bc);

struct PipelineResult {
  TrainHistory stage1;
  TrainHistory stage2;
};

// Stage 1 trains `student` with mle_loss; stage 2 with kd_loss, over a
// distilled corpus when the mode needs one. The teacher is never modified.
PipelineResult two_stage_pipeline(Model& student, const ParallelCorpus& corpus,
                                  const TrainConfig& stage1, const TrainConfig& stage2,
                                  const KDConfig& kd);

// Stage 2 alone (the teacher's distilled targets are attached as needed).
TrainHistory distill(Model& student, const ParallelCorpus& corpus, const TrainConfig& tc,
                     const KDConfig& kd);

// Whitespace-aligned "epoch loss accuracy" table.
void write_history(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace hmt
