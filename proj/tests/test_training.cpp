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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "hmt/errors.hpp"
#include "hmt/gradcheck.hpp"
#include "hmt/training.hpp"
#include "oracles.hpp"

using namespace hmt;
using testutil::bit_equal;

namespace {

ParallelCorpus random_corpus(Rng& rng, std::size_t n, std::size_t vocab, std::size_t max_len = 5) {
  ParallelCorpus c;
  for (std::size_t i = 0; i < n; ++i) {
    c.push_back({testutil::random_ids(rng, 1 + rng.below(max_len), vocab),
                 testutil::random_ids(rng, rng.below(max_len + 1), vocab), std::nullopt});
  }
  return c;
}

std::vector<std::vector<double>> snapshot(const ParamStore& store) {
  std::vector<std::vector<double>> out;
  for (const NamedTensor& e : store.entries()) out.emplace_back(e.tensor.data().begin(), e.tensor.data().end());
  return out;
}

}  // namespace

TEST(MleLoss, UniformLogitsGiveLogV) {
  ModelConfig c = testutil::tiny_hybrid(8, 4);
  Model m(c, 1);
  for (double& v : m.params().out_w.mutable_data()) v = 0.0;
  const std::vector<SentencePair> batch{{{kUnk}, {kUnk, kUnk}, std::nullopt}};
  EXPECT_NEAR(mle_loss(m, batch).item(), std::log(4.0), 1e-15);
}

TEST(MleLoss, SinglePairIsCrossEntropyAndBatchIsMean) {
  Rng rng(2);
  const Model m(testutil::tiny_transformer(8, 9), 2);
  const ParallelCorpus batch = random_corpus(rng, 3, 9);
  double total = 0.0;
  for (const SentencePair& p : batch) {
    TokenSeq tgt_in{kBos}, tgt_out = p.tgt;
    tgt_in.insert(tgt_in.end(), p.tgt.begin(), p.tgt.end());
    tgt_out.push_back(kEos);
    const Tensor logits = forward_teacher_forced(m, p.src, tgt_in);
    const double ref = oracle::cross_entropy(oracle::to_mat(logits), {tgt_out.begin(), tgt_out.end()});
    const std::array one{p};
    EXPECT_NEAR(mle_loss(m, one).item(), ref, 1e-12);
    total += ref;
  }
  EXPECT_NEAR(mle_loss(m, batch).item(), total / 3.0, 1e-12);
  EXPECT_THROW(mle_loss(m, std::span<const SentencePair>{}), ContractError);
}

TEST(MleLoss, PaddingInvariant) {
  Rng rng(3);
  const Model m(testutil::tiny_hybrid(8, 9), 3);
  ParallelCorpus batch = random_corpus(rng, 4, 9);
  const double base = mle_loss(m, batch).item();
  for (SentencePair& p : batch) {
    p.src.insert(p.src.end(), 3, kPad);
    p.tgt.insert(p.tgt.end(), 2, kPad);
  }
  EXPECT_NEAR(mle_loss(m, batch).item(), base, 1e-10);
}

TEST(MleLoss, OutOfVocabularyTarget) {
  const Model m(testutil::tiny_hybrid(8, 9), 4);
  const std::vector<SentencePair> batch{{{4}, {9}, std::nullopt}};
  EXPECT_THROW(mle_loss(m, batch), IndexError);
}

TEST(KdLoss, LambdaZeroIsMleExactly) {
  Rng rng(5);
  const Model student(testutil::tiny_hybrid(8, 9), 5);
  const Model teacher(testutil::tiny_transformer(8, 9), 6);
  ParallelCorpus batch = random_corpus(rng, 4, 9);
  batch[1].distilled = TokenSeq{4, 5};
  const double mle = mle_loss(student, batch).item();
  for (KDMode mode : {KDMode::kTokenKl, KDMode::kSequenceLevel, KDMode::kBoth}) {
    KDConfig kd;
    kd.lambda = 0.0;
    kd.mode = mode;
    EXPECT_EQ(kd_loss(student, teacher, batch, kd).item(), mle);
  }
}

TEST(KdLoss, TeacherEqualsStudentGivesZeroKl) {
  Rng rng(7);
  const Model student(testutil::tiny_hybrid(8, 9), 7);
  const Model teacher(student.config(), std::make_shared<ModelParams>(init_params(student.config(), 7)));
  const ParallelCorpus batch = random_corpus(rng, 4, 9);
  for (KDMode mode : {KDMode::kTokenKl, KDMode::kBoth}) {
    KDConfig kd;
    kd.mode = mode;
    const KDLoss terms = kd_loss_terms(student, teacher, batch, kd);
    EXPECT_LT(std::abs(terms.kd), 1e-10);
    EXPECT_NEAR(terms.loss.item(), mle_loss(student, batch).item(), 1e-10);
  }
}

TEST(KdLoss, TokenKlMatchesScalarOracle) {
  const Model student(testutil::tiny_hybrid(8, 9), 8);
  const Model teacher(testutil::tiny_transformer(8, 9), 9);
  const std::vector<SentencePair> batch{{{4, 6, 5}, {7}, std::nullopt}};
  const TokenSeq tgt_in{kBos, 7};
  const oracle::Mat t_logits = oracle::to_mat(forward_teacher_forced(teacher, batch[0].src, tgt_in));
  const oracle::Mat s_logits = oracle::to_mat(forward_teacher_forced(student, batch[0].src, tgt_in));
  oracle::Mat tp, sq;
  for (std::size_t r = 0; r < 2; ++r) {
    tp.push_back(oracle::softmax(t_logits[r]));
    sq.push_back(oracle::softmax(s_logits[r]));
  }
  KDConfig kd;
  kd.mode = KDMode::kTokenKl;
  const KDLoss terms = kd_loss_terms(student, teacher, batch, kd);
  EXPECT_NEAR(terms.kd, oracle::kl(tp, sq), 1e-8);
  EXPECT_NEAR(terms.loss.item(), terms.mle + terms.kd, 1e-12);
}

TEST(KdLoss, SequenceLevelUsesDistilledTargets) {
  const Model student(testutil::tiny_hybrid(8, 9), 10);
  const Model teacher(testutil::tiny_transformer(8, 9), 11);
  std::vector<SentencePair> batch{{{4, 5}, {6, 7}, TokenSeq{8}}};
  KDConfig kd;
  kd.mode = KDMode::kSequenceLevel;
  const KDLoss terms = kd_loss_terms(student, teacher, batch, kd);
  EXPECT_NEAR(terms.kd, sentence_nll(student, {4, 5}, {8}).item(), 1e-12);
  EXPECT_NEAR(terms.mle, sentence_nll(student, {4, 5}, {6, 7}).item(), 1e-12);
  batch[0].distilled.reset();
  EXPECT_NEAR(kd_loss_terms(student, teacher, batch, kd).kd, terms.mle, 1e-12);
}

TEST(KdLoss, KlTermNonNegativeAndVocabularyChecked) {
  Rng rng(12);
  const Model student(testutil::tiny_hybrid(8, 9), 12);
  const Model teacher(testutil::tiny_transformer(8, 9), 13);
  for (int b = 0; b < 5; ++b) {
    const ParallelCorpus batch = random_corpus(rng, 3, 9);
    const KDLoss terms = kd_loss_terms(student, teacher, batch, {});
    EXPECT_GE(terms.kd, 0.0);
    EXPECT_GE(terms.loss.item(), terms.mle);
  }
  const Model other(testutil::tiny_transformer(8, 10), 14);
  EXPECT_THROW(kd_loss(student, other, random_corpus(rng, 1, 9), {}), ConfigError);
  EXPECT_EQ(parse_kd_mode("sequence_level"), KDMode::kSequenceLevel);
  EXPECT_EQ(to_string(parse_kd_mode("both")), "both");
  EXPECT_THROW(parse_kd_mode("soft"), ConfigError);
}

TEST(Gradients, MleAndKdMatchFiniteDifferences) {
  Rng rng(15);
  for (bool transformer : {false, true}) {
    Model student(transformer ? testutil::tiny_transformer(8, 7) : testutil::tiny_hybrid(8, 7), 15);
    const Model teacher(testutil::tiny_transformer(8, 7), 16);
    const ParallelCorpus batch = random_corpus(rng, 2, 7, 3);
    ParamStore& store = student.params().store;
    const std::span<const NamedTensor> params = store.entries();
    // Finite differences edit values in place, so the fused-weight cache must
    // be invalidated on every evaluation.
    const GradCheckResult mle = check_gradients(params, [&] {
      store.bump_version();
      return mle_loss(student, batch);
    });
    EXPECT_LT(mle.max_rel_error, 1e-3) << mle.worst_name;
    EXPECT_EQ(mle.checked, student.params().store.scalar_count());
    const GradCheckResult kd =
        check_gradients(params, [&] {
          store.bump_version();
          return kd_loss(student, teacher, batch, {});
        });
    EXPECT_LT(kd.max_rel_error, 1e-3) << kd.worst_name;
  }
}

TEST(Gradients, TeacherReceivesNone) {
  Rng rng(17);
  const Model student(testutil::tiny_hybrid(8, 7), 17);
  const Model teacher(testutil::tiny_transformer(8, 7), 18);
  Tape tape;
  {
    TapeScope scope(tape);
    backward(tape, kd_loss(student, teacher, random_corpus(rng, 2, 7), {}));
  }
  for (const NamedTensor& e : teacher.params().store.entries()) EXPECT_FALSE(e.tensor.has_grad()) << e.name;
  EXPECT_GT(gradient_norm(student.params().store), 0.0);
}

TEST(Optimizer, ClipBoundsGlobalNorm) {
  Rng rng(19);
  ParamStore store;
  Tensor a = store.add("a", testutil::random({3, 4}, rng));
  Tensor b = store.add("b", testutil::random({5}, rng));
  Tape tape;
  {
    TapeScope scope(tape);
    backward(tape, sum(scale(add(sum(mul(a, a)), sum(b)), 50.0)));
  }
  const double before = gradient_norm(store);
  ASSERT_GT(before, 5.0);
  EXPECT_EQ(clip_gradients(store, 5.0), before);
  EXPECT_LE(gradient_norm(store), 5.0 + 1e-9);
  EXPECT_NEAR(gradient_norm(store), 5.0, 1e-9);
  EXPECT_EQ(clip_gradients(store, 100.0), gradient_norm(store));
}

TEST(Optimizer, FirstAdamStepMovesByLearningRateTimesSign) {
  ParamStore store;
  Tensor w = store.add("w", Tensor::from({3}, {1.0, -2.0, 0.5}));
  Tape tape;
  {
    TapeScope scope(tape);
    backward(tape, sum(mul(w, Tensor::from({3}, {0.3, -0.1, 2.0}))));
  }
  const std::uint64_t version = store.version();
  Adam adam({.learning_rate = 0.01, .clip_norm = 0.0});
  adam.step(store);
  EXPECT_NEAR(w.at(0), 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(w.at(1), -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(w.at(2), 0.5 - 0.01, 1e-9);
  EXPECT_GT(store.version(), version);
  for (double g : w.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  Rng rng(20);
  Model m(testutil::tiny_hybrid(8, 9), 20);
  const auto before = snapshot(m.params().store);
  TrainConfig tc;
  tc.adam.learning_rate = 0.0;
  tc.max_epochs = 2;
  tc.batch_size = 4;
  const TrainHistory h = train(m, random_corpus(rng, 10, 9), tc, mle_loss);
  EXPECT_EQ(h.epochs.size(), 2u);
  EXPECT_EQ(h.batches, 6u);
  EXPECT_EQ(snapshot(m.params().store), before);
}

TEST(Train, DeterministicAndReducesLoss) {
  Rng rng(21);
  const ParallelCorpus corpus = make_synthetic_task(TaskKind::kCopy, 9, 4, 64, 21);
  TrainConfig tc;
  tc.max_epochs = 4;
  tc.batch_size = 8;
  tc.adam.learning_rate = 5e-3;
  Model a(testutil::tiny_hybrid(8, 9), 22), b(testutil::tiny_hybrid(8, 9), 22);
  const TrainHistory ha = train(a, corpus, tc, mle_loss), hb = train(b, corpus, tc, mle_loss);
  ASSERT_EQ(ha.epochs.size(), 4u);
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(ha.epochs[e].loss, hb.epochs[e].loss);
    EXPECT_EQ(ha.epochs[e].accuracy, hb.epochs[e].accuracy);
  }
  EXPECT_EQ(snapshot(a.params().store), snapshot(b.params().store));
  EXPECT_LT(ha.epochs.back().loss, ha.epochs.front().loss);
}

TEST(Train, BudgetAndValidation) {
  Rng rng(23);
  Model m(testutil::tiny_hybrid(8, 9), 23);
  TrainConfig tc;
  tc.batch_size = 2;
  tc.max_batches = 3;
  tc.eval_limit = 0;
  const TrainHistory h = train(m, random_corpus(rng, 10, 9), tc, mle_loss);
  EXPECT_EQ(h.batches, 3u);
  EXPECT_EQ(h.epochs.size(), 1u);
  EXPECT_TRUE(std::isnan(h.epochs[0].accuracy));
  tc.batch_size = 0;
  EXPECT_THROW(train(m, random_corpus(rng, 2, 9), tc, mle_loss), ConfigError);
  EXPECT_THROW(train(m, ParallelCorpus{}, TrainConfig{}, mle_loss), DataError);
}

TEST(Train, DivergenceGuardNamesEpochAndBatch) {
  Rng rng(24);
  Model m(testutil::tiny_hybrid(8, 9), 24);
  TrainConfig tc;
  tc.batch_size = 2;
  int calls = 0;
  const LossFn diverging = [&](const Model& model, std::span<const SentencePair> batch) {
    Tensor loss = mle_loss(model, batch);
    if (++calls == 2) loss = scale(loss, std::numeric_limits<double>::max());
    return scale(loss, 10.0);
  };
  try {
    train(m, random_corpus(rng, 6, 9), tc, diverging);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 2"), std::string::npos) << e.what();
  }
}

TEST(Batches, CoverEveryPairOnceGroupedByLength) {
  Rng rng(25);
  const ParallelCorpus corpus = random_corpus(rng, 37, 9, 8);
  const auto batches = make_batches(corpus, 5, 3);
  std::multiset<std::size_t> seen;
  for (const auto& b : batches) {
    EXPECT_LE(b.size(), 5u);
    for (std::size_t i = 1; i < b.size(); ++i) EXPECT_LE(corpus[b[i - 1]].src.size(), corpus[b[i]].src.size());
    seen.insert(b.begin(), b.end());
  }
  EXPECT_EQ(seen.size(), 37u);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 37u);
  EXPECT_EQ(make_batches(corpus, 5, 3), batches);
  EXPECT_NE(make_batches(corpus, 5, 4), batches);
}

TEST(Distill, CorpusShapeAndBeamOneEqualsGreedy) {
  Rng rng(26);
  const Model teacher(testutil::tiny_transformer(8, 9), 26);
  const ParallelCorpus corpus = random_corpus(rng, 6, 9);
  BeamConfig bc;
  bc.beam_size = 1;
  const ParallelCorpus out = distill_corpus(teacher, corpus, bc);
  ASSERT_EQ(out.size(), corpus.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out[i].src, corpus[i].src);
    EXPECT_EQ(out[i].tgt, strip_eos(greedy_decode(teacher, corpus[i].src, max_decode_length(corpus[i].src.size(), bc)).tokens));
  }
}

TEST(Distill, TeacherUnchangedAndLambdaZeroIsExtendedMle) {
  const ParallelCorpus corpus = make_synthetic_task(TaskKind::kReverse, 9, 4, 24, 27);
  const Model teacher(testutil::tiny_transformer(8, 9), 27);
  const auto teacher_before = snapshot(teacher.params().store);
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.batch_size = 6;
  tc.eval_limit = 0;

  Model piped(testutil::tiny_hybrid(8, 9), 28), plain(testutil::tiny_hybrid(8, 9), 28);
  KDConfig kd;
  kd.teacher = &teacher;
  kd.lambda = 0.0;
  kd.mode = KDMode::kTokenKl;
  const PipelineResult r = two_stage_pipeline(piped, corpus, tc, tc, kd);
  train(plain, corpus, tc, mle_loss);
  train(plain, corpus, tc, mle_loss);
  EXPECT_EQ(snapshot(piped.params().store), snapshot(plain.params().store));
  EXPECT_EQ(r.stage1.epochs.size(), 2u);
  EXPECT_EQ(r.stage2.epochs.size(), 2u);

  Model student(testutil::tiny_hybrid(8, 9), 29);
  KDConfig both;
  both.teacher = &teacher;
  both.beam.beam_size = 2;
  distill(student, corpus, tc, both);
  EXPECT_EQ(snapshot(teacher.params().store), teacher_before);

  KDConfig none;
  EXPECT_THROW(distill(student, corpus, tc, none), ConfigError);
}

TEST(History, WritesTable) {
  TrainHistory h;
  h.epochs.push_back({1, 2.5, 0.25});
  h.epochs.push_back({2, 1.25, 0.5});
  const auto path = std::filesystem::temp_directory_path() / "hmt_history_test.txt";
  write_history(path, h);
  std::ifstream in(path);
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "epoch        loss  accuracy");
  std::getline(in, line);
  EXPECT_EQ(line, "    1    2.500000    0.2500");
  std::filesystem::remove(path);
}

TEST(Accuracy, PerfectOnItsOwnGreedyOutputs) {
  Rng rng(30);
  const Model m(testutil::tiny_transformer(8, 9), 30);
  ParallelCorpus corpus = random_corpus(rng, 5, 9);
  for (SentencePair& p : corpus) p.tgt = strip_eos(greedy_decode(m, p.src, 4).tokens);
  std::erase_if(corpus, [&](const SentencePair& p) { return p.tgt.size() >= 4; });
  if (!corpus.empty()) {
    EXPECT_EQ(token_accuracy(m, corpus), 1.0);
  }
}
