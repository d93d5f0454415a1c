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

// hmt: vocabulary building, training, distillation, translation, benchmarking.
//
// Exit codes: 0 success, 1 internal error, 2 usage, 3 data, 4 numeric divergence.
// HMT_LOG=quiet|info|debug sets stderr verbosity (default info).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hmt/checkpoint.hpp"
#include "hmt/data.hpp"
#include "hmt/errors.hpp"
#include "hmt/gradcheck.hpp"
#include "hmt/inference.hpp"
#include "hmt/profiler.hpp"
#include "hmt/training.hpp"

using namespace hmt;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

enum Exit { kOk = 0, kInternal = 1, kUsage = 2, kData = 3, kNumeric = 4 };

int verbosity() {
  static const int level = [] {
    const char* v = std::getenv("HMT_LOG");
    if (!v) return 1;
    const std::string s(v);
    return s == "quiet" ? 0 : s == "debug" ? 2 : 1;
  }();
  return level;
}

void info(const std::string& msg) {
  if (verbosity() >= 1) std::cerr << msg << '\n';
}

void debug(const std::string& msg) {
  if (verbosity() >= 2) std::cerr << msg << '\n';
}

std::string now_iso() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Model flags shared by train, distill and bench. Defaults are the base
// configuration.
struct ModelFlags {
  std::size_t d_model = 512, ffn = 2048, heads = 8, enc_layers = 6, dec_layers = 1, gru_hidden = 1024;
  std::string encoder = "self_attention", decoder = "gru", attention = "additive";
  bool no_fused = false;

  void add(CLI::App* app) {
    app->add_option("--d-model", d_model, "model width")->capture_default_str();
    app->add_option("--ffn", ffn, "feed-forward filter size")->capture_default_str();
    app->add_option("--heads", heads, "attention heads")->capture_default_str();
    app->add_option("--enc-layers", enc_layers, "encoder layers")->capture_default_str();
    app->add_option("--dec-layers", dec_layers, "decoder layers (transformer only)")->capture_default_str();
    app->add_option("--gru-hidden", gru_hidden, "GRU decoder state size")->capture_default_str();
    app->add_option("--encoder", encoder, "self_attention | gru")->capture_default_str();
    app->add_option("--decoder", decoder, "gru | transformer")->capture_default_str();
    app->add_option("--attention", attention, "additive | dot | multihead")->capture_default_str();
    app->add_flag("--no-fused-weights", no_fused, "keep linear maps separate");
  }

  ModelConfig config(std::size_t src_vocab, std::size_t tgt_vocab) const {
    ModelConfig c;
    c.d_model = d_model;
    c.ffn_filter = ffn;
    c.heads = heads;
    c.enc_layers = enc_layers;
    c.dec_layers = dec_layers;
    c.gru_hidden = gru_hidden;
    c.encoder_kind = parse_encoder_kind(encoder);
    c.decoder_kind = parse_decoder_kind(decoder);
    c.attention_kind = parse_attention_kind(attention);
    c.fused_weights = !no_fused;
    c.src_vocab = src_vocab;
    c.tgt_vocab = tgt_vocab;
    c.validate();
    return c;
  }
};

// Either a synthetic task or a pair of text files with vocabularies.
struct DataFlags {
  std::string task;
  std::size_t task_vocab = 20, task_len = 10, task_pairs = 2000, eval_pairs = 200;
  std::uint64_t task_seed = 1;
  std::string src, tgt, src_vocab, tgt_vocab, eval_src, eval_tgt;

  void add(CLI::App* app) {
    app->add_option("--task", task, "synthetic task: copy | reverse | vocab-rotate");
    app->add_option("--task-vocab", task_vocab, "synthetic vocabulary size incl. reserved")->capture_default_str();
    app->add_option("--task-len", task_len, "synthetic maximum length")->capture_default_str();
    app->add_option("--task-pairs", task_pairs, "synthetic training pairs")->capture_default_str();
    app->add_option("--task-seed", task_seed, "synthetic corpus seed")->capture_default_str();
    app->add_option("--eval-pairs", eval_pairs, "synthetic held-out pairs")->capture_default_str();
    app->add_option("--src", src, "source side of the training corpus");
    app->add_option("--tgt", tgt, "target side of the training corpus");
    app->add_option("--src-vocab", src_vocab, "source vocabulary file");
    app->add_option("--tgt-vocab", tgt_vocab, "target vocabulary file");
    app->add_option("--eval-src", eval_src, "held-out source");
    app->add_option("--eval-tgt", eval_tgt, "held-out target");
  }

  struct Loaded {
    Vocabulary src_vocab, tgt_vocab;
    ParallelCorpus train;
    std::optional<ParallelCorpus> eval;
  };

  Loaded load() const {
    Loaded out;
    if (!task.empty()) {
      if (!src.empty() || !tgt.empty()) throw ConfigError("--task and --src/--tgt are exclusive");
      const TaskKind kind = parse_task_kind(task);
      out.src_vocab = out.tgt_vocab = synthetic_vocabulary(task_vocab);
      out.train = make_synthetic_task(kind, task_vocab, task_len, task_pairs, task_seed);
      if (eval_pairs > 0)
        out.eval = make_synthetic_task(kind, task_vocab, task_len, eval_pairs, task_seed + 0x5eed);
      return out;
    }
    if (src.empty() || tgt.empty() || src_vocab.empty() || tgt_vocab.empty())
      throw ConfigError("give --task, or all of --src --tgt --src-vocab --tgt-vocab");
    out.src_vocab = Vocabulary::load(src_vocab);
    out.tgt_vocab = Vocabulary::load(tgt_vocab);
    out.train = load_parallel(src, tgt, out.src_vocab, out.tgt_vocab);
    if (!eval_src.empty() || !eval_tgt.empty())
      out.eval = load_parallel(eval_src, eval_tgt, out.src_vocab, out.tgt_vocab);
    return out;
  }
};

struct TrainFlags {
  double lr = 1e-3, clip = 5.0;
  std::size_t batch = 32, epochs = 10, eval_limit = 200;
  std::uint64_t seed = 1;
  std::optional<double> target_accuracy;

  void add(CLI::App* app, const std::string& prefix = "") {
    app->add_option("--" + prefix + "lr", lr, "Adam learning rate")->capture_default_str();
    app->add_option("--" + prefix + "clip", clip, "global gradient norm clip, 0 disables")->capture_default_str();
    app->add_option("--" + prefix + "batch", batch, "sentences per batch")->capture_default_str();
    app->add_option("--" + prefix + "epochs", epochs, "maximum epochs")->capture_default_str();
    app->add_option("--" + prefix + "target-accuracy", target_accuracy, "stop once held-out accuracy reaches this");
    if (prefix.empty()) {
      app->add_option("--seed", seed, "initialization and shuffling seed")->capture_default_str();
      app->add_option("--eval-limit", eval_limit, "held-out pairs scored per epoch")->capture_default_str();
    }
  }

  TrainConfig config(std::uint64_t s, std::size_t limit) const {
    TrainConfig tc;
    tc.adam.learning_rate = lr;
    tc.adam.clip_norm = clip;
    tc.batch_size = batch;
    tc.max_epochs = epochs;
    tc.seed = s;
    tc.eval_limit = limit;
    tc.target_accuracy = target_accuracy;
    tc.validate();
    return tc;
  }
};

struct BeamFlags {
  std::size_t beam = 12;
  double alpha = 1.0, factor = 2.0;
  std::size_t offset = 10;
  bool greedy = false, no_precompute = false, no_kv_cache = false, no_fused = false;

  void add(CLI::App* app) {
    app->add_option("--beam", beam, "beam width")->capture_default_str();
    app->add_option("--alpha", alpha, "length penalty exponent")->capture_default_str();
    app->add_option("--max-len-factor", factor, "max length = factor * source + offset")->capture_default_str();
    app->add_option("--max-len-offset", offset, "max length offset")->capture_default_str();
    app->add_flag("--greedy", greedy, "greedy decoding");
    app->add_flag("--no-precompute", no_precompute, "project encoder keys per step");
    app->add_flag("--no-kv-cache", no_kv_cache, "recompute decoder self-attention");
    app->add_flag("--no-fused-weights", no_fused, "keep linear maps separate");
  }

  BeamConfig config() const {
    BeamConfig bc;
    bc.beam_size = greedy ? 1 : beam;
    bc.alpha = alpha;
    bc.max_len_factor = factor;
    bc.max_len_offset = offset;
    bc.validate();
    return bc;
  }

  DecodeOptions options() const { return {!no_precompute, !no_kv_cache}; }
};

// Everything a run resolved, written next to its outputs.
class Manifest {
 public:
  Manifest(std::string subcommand, const CLI::App& app) {
    doc_["subcommand"] = std::move(subcommand);
    doc_["started"] = now_iso();
    doc_["resolved"] = app.config_to_str(true, false);
    doc_["outputs"] = json::array();
  }
  void set(const std::string& key, json value) { doc_[key] = std::move(value); }
  void output(const fs::path& p) { doc_["outputs"].push_back(p.string()); }
  void write(const fs::path& dir) {
    doc_["finished"] = now_iso();
    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write manifest in '" + dir.string() + "'");
    out << doc_.dump(2) << '\n';
  }

 private:
  json doc_;
};

json history_json(const TrainHistory& h) {
  json epochs = json::array();
  for (const EpochStats& e : h.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", std::isnan(e.accuracy) ? json() : json(e.accuracy)}});
  }
  return {{"batches", h.batches}, {"epochs", epochs}};
}

void report_history(const std::string& label, const TrainHistory& h) {
  for (const EpochStats& e : h.epochs) {
    char line[128];
    std::snprintf(line, sizeof line, "%s epoch %zu loss %.6f accuracy %.4f", label.c_str(), e.epoch, e.loss, e.accuracy);
    info(line);
  }
}

void save_vocabs(const fs::path& dir, const DataFlags::Loaded& d, Manifest& m) {
  d.src_vocab.save(dir / "src_vocab.txt");
  d.tgt_vocab.save(dir / "tgt_vocab.txt");
  m.output(dir / "src_vocab.txt");
  m.output(dir / "tgt_vocab.txt");
}

int run_vocab(const CLI::App& app, const std::string& corpus, const std::string& out, std::size_t cap) {
  Manifest manifest("vocab", app);
  const Vocabulary v = build_vocab(fs::path(corpus), cap);
  v.save(out);
  const fs::path dir = fs::absolute(out).parent_path();
  manifest.output(out);
  manifest.set("size", v.size());
  manifest.write(dir);
  info("vocabulary of " + std::to_string(v.size()) + " entries written to " + out);
  return kOk;
}

int run_train(const CLI::App& app, const ModelFlags& mf, const DataFlags& df, const TrainFlags& tf,
              const std::string& out) {
  Manifest manifest("train", app);
  const DataFlags::Loaded data = df.load();
  const ModelConfig cfg = mf.config(data.src_vocab.size(), data.tgt_vocab.size());
  const TrainConfig tc = tf.config(tf.seed, tf.eval_limit);
  fs::create_directories(out);
  Model model(cfg, tf.seed);
  debug("parameters: " + std::to_string(model.params().store.scalar_count()));
  const TrainHistory h = train(model, data.train, tc, mle_loss, data.eval ? &*data.eval : nullptr);
  report_history("train", h);
  const fs::path dir(out);
  save_checkpoint(dir / "model.ckpt", cfg, model.params());
  write_history(dir / "history.txt", h);
  save_vocabs(dir, data, manifest);
  manifest.output(dir / "model.ckpt");
  manifest.output(dir / "history.txt");
  manifest.set("seed", tf.seed);
  manifest.set("model", cfg.to_text());
  manifest.set("history", history_json(h));
  manifest.write(dir);
  return kOk;
}

struct DistillFlags {
  std::string teacher, student, out, mode = "both";
  double lambda = 1.0;
  std::size_t distill_beam = 12, stage1_epochs = 0;
};

int run_distill(const CLI::App& app, const ModelFlags& mf, const DataFlags& df, const TrainFlags& tf,
                const DistillFlags& dfl) {
  Manifest manifest("distill", app);
  const DataFlags::Loaded data = df.load();
  const Model teacher = load_model(dfl.teacher);
  std::optional<Model> student;
  if (!dfl.student.empty()) {
    student.emplace(load_model(dfl.student));
  } else {
    student.emplace(mf.config(data.src_vocab.size(), data.tgt_vocab.size()), tf.seed);
  }
  const ModelConfig cfg = student->config();
  if (cfg.src_vocab != data.src_vocab.size() || cfg.tgt_vocab != data.tgt_vocab.size())
    throw ConfigError("student vocabulary sizes do not match the data");
  if (teacher.config().tgt_vocab != cfg.tgt_vocab)
    throw ConfigError("teacher target vocabulary " + std::to_string(teacher.config().tgt_vocab) + " vs student " +
                      std::to_string(cfg.tgt_vocab));

  KDConfig kd;
  kd.teacher = &teacher;
  kd.lambda = dfl.lambda;
  kd.mode = parse_kd_mode(dfl.mode);
  kd.beam.beam_size = dfl.distill_beam;
  kd.beam.validate();
  const ParallelCorpus* eval = data.eval ? &*data.eval : nullptr;

  fs::create_directories(dfl.out);
  const fs::path dir(dfl.out);
  if (dfl.stage1_epochs > 0) {
    TrainFlags s1 = tf;
    s1.epochs = dfl.stage1_epochs;
    const TrainHistory h1 = train(*student, data.train, s1.config(tf.seed, tf.eval_limit), mle_loss, eval);
    report_history("stage1", h1);
    write_history(dir / "stage1_history.txt", h1);
    manifest.output(dir / "stage1_history.txt");
    manifest.set("stage1", history_json(h1));
  }
  if (verbosity() >= 1 && !data.train.empty()) {
    const std::size_t n = std::min<std::size_t>(data.train.size(), 32);
    const KDLoss first = kd_loss_terms(*student, teacher, std::span(data.train).first(n), kd);
    char line[128];
    std::snprintf(line, sizeof line, "initial mle %.6f kd term %.6g", first.mle, first.kd);
    info(line);
  }
  const TrainHistory h = distill(*student, data.train, tf.config(tf.seed, tf.eval_limit), kd);
  report_history("distill", h);
  save_checkpoint(dir / "model.ckpt", cfg, student->params());
  write_history(dir / "history.txt", h);
  save_vocabs(dir, data, manifest);
  manifest.output(dir / "model.ckpt");
  manifest.output(dir / "history.txt");
  manifest.set("seed", tf.seed);
  manifest.set("model", cfg.to_text());
  manifest.set("history", history_json(h));
  manifest.write(dir);
  return kOk;
}

int run_translate(const std::string& ckpt, const std::string& input, std::string src_vocab, std::string tgt_vocab,
                  const BeamFlags& bf) {
  Model model = load_model(ckpt);
  if (bf.no_fused) model = model.with_fused_weights(false);
  const fs::path dir = fs::absolute(ckpt).parent_path();
  if (src_vocab.empty()) src_vocab = (dir / "src_vocab.txt").string();
  if (tgt_vocab.empty()) tgt_vocab = (dir / "tgt_vocab.txt").string();
  const Vocabulary sv = Vocabulary::load(src_vocab), tv = Vocabulary::load(tgt_vocab);
  if (sv.size() != model.config().src_vocab || tv.size() != model.config().tgt_vocab)
    throw DataError("vocabulary sizes do not match the checkpoint");
  const BeamConfig bc = bf.config();
  for (const std::string& line : read_lines(input)) {
    const TokenSeq src = encode_line(sv, line, Role::kSource);
    TokenSeq out;
    if (!src.empty()) {
      out = bf.greedy ? greedy_decode(model, src, max_decode_length(src.size(), bc), bf.options()).tokens
                      : beam_search(model, src, bc, bf.options()).best;
    }
    std::cout << decode_ids(tv, out) << '\n';
  }
  return kOk;
}

struct BenchFlags {
  std::size_t sentences = 1000, src_len = 20, tgt_len = 20, beam = 8, warmup = 10, vocab = 30000;
  std::uint64_t seed = 1;
  bool compare = false, ablate = false;
  std::string out, format = "text";
  bool no_precompute = false, no_kv_cache = false;
};

int run_bench(const CLI::App& app, const ModelFlags& mf, const BenchFlags& b) {
  Manifest manifest("bench", app);
  Workload wl;
  wl.sentences = b.sentences;
  wl.src_len = b.src_len;
  wl.tgt_len = b.tgt_len;
  wl.seed = b.seed;
  wl.warmup = b.warmup;
  const ModelConfig cfg = mf.config(b.vocab, b.vocab);
  std::string text;
  if (b.compare) {
    ModelConfig hybrid = cfg, trans = cfg;
    hybrid.decoder_kind = DecoderKind::kGru;
    hybrid.dec_layers = 1;
    trans.decoder_kind = DecoderKind::kTransformer;
    trans.dec_layers = cfg.enc_layers;
    const std::array configs{NamedConfig{"hybrid", hybrid}, NamedConfig{"transformer", trans}};
    const Comparison c = compare_architectures(configs, wl, b.beam, b.seed);
    text = render_text(c.reports) + '\n' + render_comparison(c);
  } else if (b.ablate) {
    text = render_ablation(ablate_optimizations(Model(cfg, b.seed), wl, b.beam));
  } else {
    const TimingReport r = profile_decode(Model(cfg, b.seed), wl, b.beam, {!b.no_precompute, !b.no_kv_cache});
    text = b.format == "csv" ? render_csv(r) : render_text(std::array{r});
  }
  std::cout << text;
  if (!b.out.empty()) {
    fs::create_directories(b.out);
    const fs::path p = fs::path(b.out) / (b.format == "csv" && !b.compare && !b.ablate ? "report.csv" : "report.txt");
    std::ofstream(p) << text;
    manifest.output(p);
    manifest.set("model", cfg.to_text());
    manifest.write(b.out);
  }
  return kOk;
}

// Desk-scale smoke checks of the whole pipeline.
int run_selftest() {
  int failures = 0;
  auto check = [&](const std::string& name, bool ok, const std::string& detail = "") {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << (ok || detail.empty() ? "" : ": " + detail) << '\n';
    if (!ok) ++failures;
  };
  ModelConfig c;
  c.d_model = 64;
  c.ffn_filter = 256;
  c.heads = 4;
  c.gru_hidden = 128;
  c.enc_layers = 2;
  c.src_vocab = c.tgt_vocab = 20;
  ModelConfig t = c;
  t.decoder_kind = DecoderKind::kTransformer;
  t.dec_layers = 2;

  {
    ModelConfig tiny = c;
    tiny.d_model = 8;
    tiny.heads = 2;
    tiny.ffn_filter = 16;
    tiny.gru_hidden = 8;
    tiny.enc_layers = 1;
    tiny.src_vocab = tiny.tgt_vocab = 7;
    Model m(tiny, 3);
    const ParallelCorpus batch = make_synthetic_task(TaskKind::kReverse, 7, 3, 2, 3);
    ParamStore& store = m.params().store;
    const GradCheckResult r = check_gradients(store.entries(), [&] {
      store.bump_version();
      return mle_loss(m, batch);
    });
    check("gradients match finite differences", r.max_rel_error < 1e-3, r.worst_name);
  }
  {
    bool same = true;
    const ParallelCorpus probe = make_synthetic_task(TaskKind::kCopy, 20, 8, 10, 5);
    for (const ModelConfig& cfg : {c, t}) {
      const Model fused(cfg, 4);
      const Model plain = fused.with_fused_weights(false);
      BeamConfig bc;
      bc.beam_size = 4;
      for (const SentencePair& p : probe) {
        const TokenSeq ref = beam_search(fused, p.src, bc).best;
        same = same && beam_search(plain, p.src, bc, {false, false}).best == ref;
      }
    }
    check("optimizations leave decoding unchanged", same);
  }
  {
    const fs::path dir = fs::temp_directory_path() / "hmt_selftest";
    fs::create_directories(dir);
    const Model m(c, 5);
    save_checkpoint(dir / "m.ckpt", c, m.params());
    const Model back = load_model(dir / "m.ckpt");
    bool same = true;
    for (const SentencePair& p : make_synthetic_task(TaskKind::kCopy, 20, 8, 10, 6))
      same = same && greedy_decode(m, p.src, 12).tokens == greedy_decode(back, p.src, 12).tokens;
    fs::remove_all(dir);
    check("checkpoint round trip", same);
  }
  {
    const ParallelCorpus corpus = make_synthetic_task(TaskKind::kCopy, 20, 6, 300, 7);
    Model m(c, 7);
    TrainConfig tc;
    tc.max_epochs = 3;
    const TrainHistory h = train(m, corpus, tc, mle_loss);
    const bool ok = h.epochs.back().loss < h.epochs.front().loss;
    char detail[96];
    std::snprintf(detail, sizeof detail, "loss %.4f -> %.4f", h.epochs.front().loss, h.epochs.back().loss);
    check("training reduces loss", ok, detail);
  }
  return failures == 0 ? kOk : kInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hmt: self-attention encoder with GRU decoder, transformer baseline"};
  app.set_config("--config-file", "", "INI/TOML file of option defaults");
  app.require_subcommand(1);

  std::string corpus, vocab_out;
  std::size_t cap = 30000;
  CLI::App* vocab = app.add_subcommand("vocab", "build a frequency-capped vocabulary");
  vocab->add_option("--corpus", corpus, "whitespace-tokenized text")->required();
  vocab->add_option("--out", vocab_out, "vocabulary file")->required();
  vocab->add_option("--cap", cap, "maximum non-reserved entries")->capture_default_str();

  ModelFlags train_model;
  DataFlags train_data;
  TrainFlags train_flags;
  std::string train_out;
  CLI::App* train_cmd = app.add_subcommand("train", "maximum-likelihood training");
  train_model.add(train_cmd);
  train_data.add(train_cmd);
  train_flags.add(train_cmd);
  train_cmd->add_option("--out", train_out, "output directory")->required();

  ModelFlags distill_model;
  DataFlags distill_data;
  TrainFlags distill_flags;
  DistillFlags distill_opts;
  CLI::App* distill_cmd = app.add_subcommand("distill", "knowledge-distillation fine-tuning");
  distill_model.add(distill_cmd);
  distill_data.add(distill_cmd);
  distill_flags.add(distill_cmd);
  distill_cmd->add_option("--teacher", distill_opts.teacher, "teacher checkpoint")->required();
  distill_cmd->add_option("--student", distill_opts.student, "student checkpoint (else a fresh model)");
  distill_cmd->add_option("--out", distill_opts.out, "output directory")->required();
  distill_cmd->add_option("--lambda", distill_opts.lambda, "weight of the distillation term")->capture_default_str();
  distill_cmd->add_option("--kd-mode", distill_opts.mode, "token_kl | sequence_level | both")->capture_default_str();
  distill_cmd->add_option("--distill-beam", distill_opts.distill_beam, "teacher beam for distilled targets")
      ->capture_default_str();
  distill_cmd->add_option("--stage1-epochs", distill_opts.stage1_epochs, "MLE epochs before distillation")
      ->capture_default_str();

  std::string ckpt, input, src_vocab, tgt_vocab;
  BeamFlags beam_flags;
  CLI::App* translate = app.add_subcommand("translate", "decode a file, one sentence per line");
  translate->add_option("--model", ckpt, "checkpoint")->required();
  translate->add_option("--input", input, "source sentences")->required();
  translate->add_option("--src-vocab", src_vocab, "defaults to src_vocab.txt beside the checkpoint");
  translate->add_option("--tgt-vocab", tgt_vocab, "defaults to tgt_vocab.txt beside the checkpoint");
  beam_flags.add(translate);

  ModelFlags bench_model;
  BenchFlags bench_flags;
  CLI::App* bench = app.add_subcommand("bench", "per-category decoding latency");
  bench_model.add(bench);
  bench->add_option("--sentences", bench_flags.sentences, "pseudo sentences")->capture_default_str();
  bench->add_option("--src-len", bench_flags.src_len, "source length")->capture_default_str();
  bench->add_option("--tgt-len", bench_flags.tgt_len, "forced target length")->capture_default_str();
  bench->add_option("--beam", bench_flags.beam, "beam width")->capture_default_str();
  bench->add_option("--warmup", bench_flags.warmup, "untimed warm-up sentences")->capture_default_str();
  bench->add_option("--vocab", bench_flags.vocab, "source and target vocabulary size")->capture_default_str();
  bench->add_option("--seed", bench_flags.seed, "initialization and workload seed")->capture_default_str();
  bench->add_flag("--compare", bench_flags.compare, "hybrid vs transformer of the same depth");
  bench->add_flag("--ablate", bench_flags.ablate, "all 8 optimization combinations");
  bench->add_flag("--no-precompute", bench_flags.no_precompute, "project encoder keys per step");
  bench->add_flag("--no-kv-cache", bench_flags.no_kv_cache, "recompute decoder self-attention");
  bench->add_option("--format", bench_flags.format, "text | csv")
      ->check(CLI::IsMember({"text", "csv"}))
      ->capture_default_str();
  bench->add_option("--out", bench_flags.out, "directory for the report and manifest");

  CLI::App* selftest = app.add_subcommand("selftest", "desk-scale smoke checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (vocab->parsed()) return run_vocab(*vocab, corpus, vocab_out, cap);
    if (train_cmd->parsed()) return run_train(*train_cmd, train_model, train_data, train_flags, train_out);
    if (distill_cmd->parsed()) return run_distill(*distill_cmd, distill_model, distill_data, distill_flags, distill_opts);
    if (translate->parsed()) return run_translate(ckpt, input, src_vocab, tgt_vocab, beam_flags);
    if (bench->parsed()) return run_bench(*bench, bench_model, bench_flags);
    if (selftest->parsed()) return run_selftest();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const IndexError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
