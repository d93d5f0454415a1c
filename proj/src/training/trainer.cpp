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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "hmt/errors.hpp"
#include "hmt/rng.hpp"
#include "hmt/training.hpp"

namespace hmt {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(adam.learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(adam.clip_norm >= 0.0)) throw ConfigError("clip norm must be >= 0");
}

std::vector<std::vector<std::size_t>> make_batches(const ParallelCorpus& corpus,
                                                   std::size_t batch_size, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ka = std::pair(corpus[a].src.size(), corpus[a].tgt.size());
    const auto kb = std::pair(corpus[b].src.size(), corpus[b].tgt.size());
    return ka < kb;
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  Rng rng(seed);
  rng.shuffle(std::span(batches));
  return batches;
}

double token_accuracy(const Model& model, std::span<const SentencePair> corpus) {
  NoGradScope no_grad;
  std::size_t correct = 0, total = 0;
  for (const SentencePair& p : corpus) {
    TokenSeq gold = p.tgt;
    gold.push_back(kEos);
    const GreedyResult out = greedy_decode(model, p.src, gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (i < out.tokens.size() && out.tokens[i] == gold[i]) ++correct;
    }
    total += gold.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainHistory train(Model& model, const ParallelCorpus& corpus, const TrainConfig& tc,
                   const LossFn& loss_fn, const ParallelCorpus* eval) {
  tc.validate();
  if (corpus.empty()) throw DataError("train: empty corpus");
  Adam adam(tc.adam);
  ParamStore& store = model.params().store;
  store.zero_grad();
  const std::span<const SentencePair> eval_set =
      eval ? std::span<const SentencePair>(*eval)
           : std::span<const SentencePair>(corpus).first(std::min(tc.eval_limit, corpus.size()));

  TrainHistory history;
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    if (tc.max_batches && history.batches >= *tc.max_batches) break;
    const auto batches = make_batches(corpus, tc.batch_size, tc.seed + epoch);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::vector<SentencePair> batch;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      if (tc.max_batches && history.batches >= *tc.max_batches) break;
      batch.clear();
      for (std::size_t i : batches[b]) batch.push_back(corpus[i]);
      Tape tape;
      double value = 0.0;
      try {
        TapeScope scope(tape);
        const Tensor loss = loss_fn(model, batch);
        value = loss.item();
        if (!std::isfinite(value)) throw NumericError("loss is not finite");
        backward(tape, loss);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1) + ": " + e.what());
      }
      adam.step(store);
      loss_sum += value;
      ++seen;
      ++history.batches;
    }
    if (seen == 0) break;
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = loss_sum / static_cast<double>(seen);
    stats.accuracy = eval_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : token_accuracy(model, eval_set);
    history.epochs.push_back(stats);
    if (tc.target_accuracy && stats.accuracy >= *tc.target_accuracy) break;
  }
  return history;
}

ParallelCorpus distill_corpus(const Model& teacher, std::span<const SentencePair> corpus,
                              const BeamConfig& bc) {
  NoGradScope no_grad;
  ParallelCorpus out;
  out.reserve(corpus.size());
  for (const SentencePair& p : corpus) {
    SentencePair d;
    d.src = p.src;
    d.tgt = strip_eos(beam_search(teacher, p.src, bc).best);
    out.push_back(std::move(d));
  }
  return out;
}

TrainHistory distill(Model& student, const ParallelCorpus& corpus, const TrainConfig& tc,
                     const KDConfig& kd) {
  if (!kd.teacher) throw ConfigError("distillation needs a teacher model");
  if (kd.teacher->shared_params() == student.shared_params()) {
    throw ConfigError("teacher and student must not share parameters");
  }
  ParallelCorpus data = corpus;
  if (kd.mode != KDMode::kTokenKl && kd.lambda != 0.0) {
    const ParallelCorpus synthetic = distill_corpus(*kd.teacher, corpus, kd.beam);
    for (std::size_t i = 0; i < data.size(); ++i) data[i].distilled = synthetic[i].tgt;
  }
  const Model& teacher = *kd.teacher;
  return train(student, data, tc, [&](const Model& m, std::span<const SentencePair> batch) {
    return kd_loss(m, teacher, batch, kd);
  });
}

PipelineResult two_stage_pipeline(Model& student, const ParallelCorpus& corpus,
                                  const TrainConfig& stage1, const TrainConfig& stage2,
                                  const KDConfig& kd) {
  PipelineResult result;
  result.stage1 = train(student, corpus, stage1, mle_loss);
  result.stage2 = distill(student, corpus, stage2, kd);
  return result;
}

void write_history(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "epoch        loss  accuracy\n";
  char line[96];
  for (const EpochStats& e : history.epochs) {
    std::snprintf(line, sizeof line, "%5zu  %10.6f  %8.4f\n", e.epoch, e.loss, e.accuracy);
    out << line;
  }
  if (!out) throw DataError("error writing '" + path.string() + "'");
}

}  // namespace hmt
