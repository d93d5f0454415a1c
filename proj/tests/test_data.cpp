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

#include <cstring>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "hmt/checkpoint.hpp"
#include "hmt/data.hpp"
#include "hmt/errors.hpp"
#include "hmt/inference.hpp"

using namespace hmt;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("hmt_data_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::vector<unsigned char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(Vocab, FrequencyOrderAndTies) {
  const std::vector<std::string> lines{"a a b"};
  const Vocabulary v = build_vocab(lines, 10);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_EQ(v.id("a"), 4u);
  EXPECT_EQ(v.id("b"), 5u);
  const std::vector<std::string> tie{"b a"};
  EXPECT_EQ(build_vocab(tie, 10).id("a"), 4u);
  const std::vector<std::string> three{"x y z"};
  const Vocabulary capped = build_vocab(three, 1);
  EXPECT_EQ(capped.size(), 5u);
  EXPECT_EQ(encode_line(capped, "x y z", Role::kSource), (TokenSeq{4, kUnk, kUnk}));
}

TEST(Vocab, ReservedIdsAndErrors) {
  const Vocabulary v;
  EXPECT_EQ(v.id("<pad>"), kPad);
  EXPECT_EQ(v.id("<s>"), kBos);
  EXPECT_EQ(v.id("</s>"), kEos);
  EXPECT_EQ(v.id("<unk>"), kUnk);
  EXPECT_EQ(v.id("nope"), kUnk);
  EXPECT_THROW(v.token(4), IndexError);
  const std::vector<std::string> dup{"a", "a"};
  EXPECT_THROW(Vocabulary{dup}, DataError);
  const std::vector<std::string> blank{"", "  "};
  EXPECT_THROW(build_vocab(blank, 5), DataError);
  EXPECT_THROW(build_vocab(fs::path("/nonexistent/corpus.txt"), 5), DataError);
  const std::vector<std::string> with_reserved{"<s> a </s>"};
  EXPECT_EQ(build_vocab(with_reserved, 5).size(), 5u);
}

TEST(Vocab, SaveLoadRoundTrip) {
  TempDir dir;
  const std::vector<std::string> lines{"the cat sat", "the dog"};
  const Vocabulary v = build_vocab(lines, 100);
  v.save(dir / "vocab.txt");
  EXPECT_EQ(Vocabulary::load(dir / "vocab.txt"), v);
  EXPECT_EQ(build_vocab(dir / "vocab.txt", 100).size(), v.size());
}

TEST(Encoding, RolesAndRoundTrip) {
  const Vocabulary v = synthetic_vocabulary(12);
  EXPECT_EQ(v.size(), 12u);
  EXPECT_EQ(v.token(4), "w4");
  EXPECT_EQ(encode_line(v, "w5 w6", Role::kTarget), (TokenSeq{kBos, 5, 6, kEos}));
  EXPECT_EQ(encode_line(v, "  w5\tw6 ", Role::kSource), (TokenSeq{5, 6}));
  EXPECT_EQ(decode_ids(v, TokenSeq{kBos, 5, kPad, 6, kEos, 7}), "w5 w6");

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const TokenSeq ids = testutil::random_ids(rng, 1 + rng.below(10), 12);
    std::string line;
    for (TokenId t : ids) line += (line.empty() ? "" : " ") + v.token(t);
    EXPECT_EQ(decode_ids(v, encode_line(v, line, Role::kTarget)), line);
    EXPECT_EQ(encode_line(v, line, Role::kSource), ids);
  }
}

TEST(Corpus, LoadParallel) {
  TempDir dir;
  const std::vector<std::string> src{"w4 w5", "", "w6 zz"};
  const std::vector<std::string> tgt{"w5 w4", "w4", "w7"};
  write_lines(dir / "src.txt", src);
  write_lines(dir / "tgt.txt", tgt);
  const Vocabulary v = synthetic_vocabulary(10);
  const ParallelCorpus c = load_parallel(dir / "src.txt", dir / "tgt.txt", v, v);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].src, (TokenSeq{4, 5}));
  EXPECT_EQ(c[0].tgt, (TokenSeq{5, 4}));
  EXPECT_EQ(c[1].src, (TokenSeq{6, kUnk}));
  write_lines(dir / "short.txt", std::vector<std::string>{"w4"});
  EXPECT_THROW(load_parallel(dir / "src.txt", dir / "short.txt", v, v), DataError);
  EXPECT_THROW(read_lines(dir / "missing.txt"), DataError);
}

TEST(SyntheticTask, Laws) {
  const ParallelCorpus copy = make_synthetic_task(TaskKind::kCopy, 20, 10, 200, 3);
  ASSERT_EQ(copy.size(), 200u);
  for (const SentencePair& p : copy) {
    EXPECT_EQ(p.src, p.tgt);
    EXPECT_GE(p.src.size(), 1u);
    EXPECT_LE(p.src.size(), 10u);
    for (TokenId t : p.src) {
      EXPECT_GE(t, kNumReserved);
      EXPECT_LT(t, 20u);
    }
  }
  const ParallelCorpus rev = make_synthetic_task(TaskKind::kReverse, 20, 10, 50, 3);
  for (const SentencePair& p : rev) EXPECT_EQ(TokenSeq(p.tgt.rbegin(), p.tgt.rend()), p.src);
  const ParallelCorpus rot = make_synthetic_task(TaskKind::kRotate, 8, 6, 50, 3);
  for (const SentencePair& p : rot)
    for (std::size_t i = 0; i < p.src.size(); ++i) EXPECT_EQ(p.tgt[i], p.src[i] == 7 ? 4u : p.src[i] + 1);

  const ParallelCorpus again = make_synthetic_task(TaskKind::kCopy, 20, 10, 200, 3);
  for (std::size_t i = 0; i < 200; ++i) EXPECT_EQ(again[i].src, copy[i].src);
  const ParallelCorpus other = make_synthetic_task(TaskKind::kCopy, 20, 10, 200, 4);
  bool differs = false;
  for (std::size_t i = 0; i < 200; ++i) differs = differs || other[i].src != copy[i].src;
  EXPECT_TRUE(differs);
  EXPECT_EQ(parse_task_kind("vocab-rotate"), TaskKind::kRotate);
  EXPECT_EQ(parse_task_kind(to_string(TaskKind::kReverse)), TaskKind::kReverse);
  EXPECT_THROW(parse_task_kind("shuffle"), ConfigError);
}

TEST(Checkpoint, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a({}), 0xcbf29ce484222325ull);
  const unsigned char a[] = {'a'};
  EXPECT_EQ(fnv1a(a), 0xaf63dc4c8601ec8cull);
  const unsigned char foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  EXPECT_EQ(fnv1a(foobar), 0x85944171f73967e8ull);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  for (const ModelConfig& c : {testutil::tiny_hybrid(8, 11), testutil::tiny_transformer(8, 11, 2)}) {
    const Model m(c, 42);
    save_checkpoint(dir / "m.ckpt", m.config(), m.params());
    const LoadedCheckpoint loaded = load_checkpoint(dir / "m.ckpt");
    EXPECT_EQ(loaded.config, c);
    const auto& a = m.params().store.entries();
    const auto& b = loaded.params->store.entries();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].name, b[i].name);
      EXPECT_EQ(std::memcmp(a[i].tensor.data().data(), b[i].tensor.data().data(), a[i].tensor.size() * sizeof(double)), 0);
    }
    const Model back = load_model(dir / "m.ckpt");
    Rng rng(7);
    for (int s = 0; s < 10; ++s) {
      const TokenSeq src = testutil::random_ids(rng, 1 + rng.below(6), 11);
      EXPECT_EQ(greedy_decode(back, src, 8).tokens, greedy_decode(m, src, 8).tokens);
    }
  }
}

TEST(Checkpoint, HeaderLayout) {
  TempDir dir;
  const Model m(testutil::tiny_hybrid(8, 7), 1);
  save_checkpoint(dir / "m.ckpt", m.config(), m.params());
  const std::vector<unsigned char> bytes = read_bytes(dir / "m.ckpt");
  ASSERT_GT(bytes.size(), 28u);
  EXPECT_EQ(std::memcmp(bytes.data(), "HMTCKPT\0", 8), 0);
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[9] | bytes[10] | bytes[11], 0);
  std::uint64_t body = 0;
  for (int i = 0; i < 8; ++i) body |= std::uint64_t{bytes[12 + i]} << (8 * i);
  EXPECT_EQ(body + 28, bytes.size());
  const std::string text(bytes.begin(), bytes.end());
  EXPECT_NE(text.find("d_model = 8"), std::string::npos);
}

TEST(Checkpoint, DistinctLoadErrors) {
  TempDir dir;
  const Model m(testutil::tiny_hybrid(8, 7), 2);
  save_checkpoint(dir / "m.ckpt", m.config(), m.params());
  const std::vector<unsigned char> good = read_bytes(dir / "m.ckpt");

  std::vector<unsigned char> corrupt = good;
  corrupt[corrupt.size() / 2] ^= 0x01;
  write_bytes(dir / "corrupt.ckpt", corrupt);
  EXPECT_THROW(load_checkpoint(dir / "corrupt.ckpt"), CheckpointChecksumError);

  std::vector<unsigned char> version = good;
  version[8] = 2;
  write_bytes(dir / "version.ckpt", version);
  EXPECT_THROW(load_checkpoint(dir / "version.ckpt"), CheckpointVersionError);

  for (std::size_t keep : {std::size_t{4}, std::size_t{15}, good.size() - 1, good.size() / 2}) {
    write_bytes(dir / "short.ckpt", std::vector<unsigned char>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(keep)));
    EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), CheckpointTruncatedError) << keep;
  }

  std::vector<unsigned char> magic = good;
  magic[0] = 'X';
  write_bytes(dir / "magic.ckpt", magic);
  try {
    load_checkpoint(dir / "magic.ckpt");
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointVersionError&) {
    FAIL() << "bad magic reported as a version error";
  } catch (const CheckpointChecksumError&) {
    FAIL() << "bad magic reported as a checksum error";
  } catch (const CheckpointError&) {
  }
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), DataError);
}
