// Copyright 2026 The Foley Eval Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "foley/embed.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

using builtin::kDim;
using builtin::kMelBands;

AudioClip clip_of(std::vector<std::int16_t> pcm, std::string id = "c") {
  AudioClip c;
  c.samples = std::move(pcm);
  c.clip_id = std::move(id);
  return c;
}

std::vector<std::int16_t> tone_pcm(double hz) {
  const auto s = testing::sine(hz, kClipRate, kClipSamples, 0.5);
  std::vector<std::int16_t> pcm(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) pcm[i] = static_cast<std::int16_t>(std::lround(s[i] * 32767));
  return pcm;
}

TEST(BuiltinEmbed, SilenceHitsLogFloor) {
  const auto e = builtin_embed(std::vector<std::int16_t>(kClipSamples, 0));
  ASSERT_EQ(e.size(), builtin::kWindows * kDim);
  for (std::size_t w = 0; w < builtin::kWindows; ++w) {
    for (std::size_t b = 0; b < kMelBands; ++b) {
      EXPECT_EQ(e[w * kDim + b], -10.0f);
      EXPECT_EQ(e[w * kDim + kMelBands + b], 0.0f);
    }
  }
}

TEST(BuiltinEmbed, ToneEnergyLandsInMatchingBand) {
  const auto e = builtin_embed(tone_pcm(1000.0));
  const auto peak = std::max_element(e.begin(), e.begin() + kMelBands) - e.begin();
  const auto& bank = builtin::mel_filterbank();
  const auto bin = static_cast<std::size_t>(std::lround(1000.0 * builtin::kFrameLength / kClipRate));
  EXPECT_GT(bank[static_cast<std::size_t>(peak) * builtin::kBins + bin], 0.5);
}

TEST(BuiltinEmbed, MelScaleRoundTrip) {
  for (double hz : {0.0, 100.0, 1000.0, 11025.0}) EXPECT_NEAR(builtin::mel_to_hz(builtin::hz_to_mel(hz)), hz, 1e-9);
  EXPECT_NEAR(builtin::hz_to_mel(1000.0), 1000.0, 1.0);
}

TEST(BuiltinEmbed, RejectsNonConformingClip) {
  EXPECT_THROW(builtin_embed(std::vector<std::int16_t>(100)), Error);
  AudioClip c = clip_of(std::vector<std::int16_t>(kClipSamples));
  c.sample_rate = 44100;
  EXPECT_THROW(builtin_embed(c), Error);
}

TEST(BuiltinEmbed, BatchParallelMatchesSerial) {
  std::vector<AudioClip> clips;
  for (int i = 0; i < 5; ++i) clips.push_back(clip_of(testing::random_pcm(kClipSamples, i, 3000 * (i + 1))));
  EXPECT_EQ(builtin_embed_batch(clips, Exec::kSerial), builtin_embed_batch(clips, Exec::kParallel));
}

EmbeddingMatrix sample_matrix() {
  EmbeddingMatrix m;
  m.model_id = "test-model";
  m.dim = 3;
  m.attributes["seed"] = "5";
  const std::vector<float> a = {1, 2, 3, 4, 5, 6};
  const std::vector<float> b = {-1, 0.5f, 7};
  m.append("sys/rain/00", "sys", Category::kRain, a);
  m.append("eval-1", "evaluation", std::nullopt, b);
  return m;
}

TEST(EmbeddingFile, RoundTrip) {
  testing::TempDir dir;
  const EmbeddingMatrix m = sample_matrix();
  EXPECT_EQ(m.rows(), 3u);
  EXPECT_EQ(m.row_offsets(), (std::vector<std::size_t>{0, 2}));
  write_embeddings(m, dir / "m.femb");
  EXPECT_EQ(read_embeddings(dir / "m.femb"), m);
}

TEST(EmbeddingFile, RejectsCorruption) {
  const std::string bytes = encode_embeddings(sample_matrix());
  EXPECT_THROW(decode_embeddings("XXXX" + bytes.substr(4)), Error);
  EXPECT_THROW(decode_embeddings(bytes.substr(0, bytes.size() - 4)), Error);
  EXPECT_THROW(decode_embeddings(bytes.substr(0, 6)), Error);
  std::string nan_bytes = bytes;
  const float nan = std::nanf("");
  nan_bytes.replace(nan_bytes.size() - 4, 4, reinterpret_cast<const char*>(&nan), 4);
  EXPECT_THROW(decode_embeddings(nan_bytes), Error);
}

TEST(EmbeddingMatrix, AppendChecksShape) {
  EmbeddingMatrix m;
  m.model_id = "x";
  m.dim = 4;
  const std::vector<float> bad = {1, 2, 3};
  EXPECT_THROW(m.append("c", "g", std::nullopt, bad), Error);
}

TEST(EmbeddingMatrix, GroupsAndPooling) {
  const EmbeddingMatrix m = sample_matrix();
  const auto idx = group_index(m);
  EXPECT_EQ(idx.size(), 1u);  // uncategorized clips are not grouped
  const std::vector<std::size_t> both = {0, 1};
  EXPECT_EQ(gather_rows(m, both).size(), 9u);
  const auto pooled = pooled_rows(m, both);
  EXPECT_EQ(pooled, (std::vector<double>{2.5, 3.5, 4.5, -1, 0.5, 7}));
}

TEST(EmbeddingMatrix, ConcatRejectsMixedModels) {
  EmbeddingMatrix a = sample_matrix(), b = sample_matrix();
  b.model_id = "other";
  const std::vector<EmbeddingMatrix> parts = {a, b};
  EXPECT_THROW(concat(parts), Error);
  const std::vector<EmbeddingMatrix> same = {a, a};
  EXPECT_EQ(concat(same).clip_count(), 4u);
}

TEST(ImportEmbeddings, ReadsExchangeFilesAndReportsProblems) {
  testing::TempDir dir;
  EmbeddingMatrix one;
  one.model_id = "ext";
  one.dim = 3;
  const std::vector<float> v = {1, 2, 3};
  one.append("a", "g", Category::kRain, v);
  write_embeddings(one, dir / "a.femb");
  const EmbedderSpec spec{"ext", 3, 1};
  const std::vector<ClipRef> ok = {{"a", "sys", Category::kRain}};
  const EmbeddingMatrix m = import_external_embeddings(dir.path(), ok, spec);
  EXPECT_EQ(m.clip_ids, std::vector<std::string>{"a"});
  EXPECT_EQ(m.groups, std::vector<std::string>{"sys"});

  const std::vector<ClipRef> missing = {{"b", "sys", Category::kRain}};
  EXPECT_THROW(import_external_embeddings(dir.path(), missing, spec), Error);
  EXPECT_THROW(import_external_embeddings(dir.path(), ok, EmbedderSpec{"ext", 4, 1}), Error);
  EXPECT_THROW(import_external_embeddings(dir.path(), ok, EmbedderSpec{"", 3, 1}), Error);
}

}  // namespace
}  // namespace foley
