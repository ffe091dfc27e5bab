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

#include <fmt/format.h>

#include "foley/corpus.hpp"
#include "foley/wav.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

namespace fs = std::filesystem;

DecodedAudio tone(int rate, int channels, double seconds, double amp = 0.3) {
  DecodedAudio a;
  a.sample_rate = rate;
  a.channels = channels;
  const auto frames = static_cast<std::size_t>(seconds * rate);
  const auto s = testing::sine(330.0, rate, frames, amp);
  for (std::size_t i = 0; i < frames; ++i)
    for (int c = 0; c < channels; ++c) a.samples.push_back(s[i]);
  return a;
}

DecodedAudio from_pcm(const std::vector<std::int16_t>& pcm) {
  DecodedAudio a;
  a.sample_rate = kClipRate;
  a.channels = 1;
  for (auto s : pcm) a.samples.push_back(s / 32768.0);
  return a;
}

TEST(Category, NamesRoundTrip) {
  for (Category c : kCategories) EXPECT_EQ(parse_category(category_name(c)), c);
  EXPECT_EQ(category_name(Category::kMovingMotorVehicle), "moving_motor_vehicle");
  EXPECT_FALSE(parse_category("cat_meow"));
  try {
    category_from_string("cat_meow");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("sneeze_cough"), std::string::npos);
  }
}

TEST(Anchor, LowQualityHighFitIsInvalid) {
  EXPECT_TRUE(is_valid_anchor({Pole::kHigh, Pole::kLow}));
  EXPECT_TRUE(is_valid_anchor({Pole::kHigh, Pole::kHigh}));
  EXPECT_TRUE(is_valid_anchor({Pole::kLow, Pole::kLow}));
  EXPECT_FALSE(is_valid_anchor({Pole::kLow, Pole::kHigh}));
}

TEST(Preprocess, ShortStereoIsPaddedWithTrailingZeros) {
  const auto pcm = preprocess_samples(tone(44100, 2, 2.5), SegmentPolicy::kMaxRms);
  ASSERT_EQ(pcm.size(), kClipSamples);
  // 2.5 s at 22,050 Hz is 55,125 samples; the remaining 33,075 are padding.
  for (std::size_t i = 55125; i < kClipSamples; ++i) ASSERT_EQ(pcm[i], 0) << i;
  int nonzero = 0;
  for (std::size_t i = 0; i < 55125; ++i) nonzero += pcm[i] != 0;
  EXPECT_GT(nonzero, 50000);
}

TEST(Preprocess, DownmixAveragesChannels) {
  DecodedAudio a;
  a.sample_rate = kClipRate;
  a.channels = 2;
  for (std::size_t i = 0; i < kClipSamples; ++i) {
    a.samples.push_back(0.5);
    a.samples.push_back(-0.25);
  }
  const auto pcm = preprocess_samples(a, SegmentPolicy::kFirst);
  EXPECT_EQ(pcm[kClipSamples / 2], 4096);
}

TEST(Preprocess, ConformingClipIsUnchanged) {
  const auto pcm = testing::random_pcm(kClipSamples, 9);
  EXPECT_EQ(preprocess_samples(from_pcm(pcm), SegmentPolicy::kMaxRms), pcm);
}

TEST(Preprocess, Idempotent) {
  SeededRng rng(4);
  for (int rate : {16000, 32000, 44100, 48000}) {
    auto a = tone(rate, 1, 5.3);
    for (auto& s : a.samples) s += 0.05 * (rng.uniform() - 0.5);
    const auto once = preprocess_samples(a, SegmentPolicy::kMaxRms);
    EXPECT_EQ(preprocess_samples(from_pcm(once), SegmentPolicy::kMaxRms), once) << rate;
  }
}

TEST(Preprocess, SerialAndParallelAgree) {
  const auto a = tone(48000, 2, 6.1);
  EXPECT_EQ(preprocess_samples(a, SegmentPolicy::kMaxRms, Exec::kSerial),
            preprocess_samples(a, SegmentPolicy::kMaxRms, Exec::kParallel));
}

TEST(Preprocess, RejectsBadInput) {
  DecodedAudio empty;
  empty.sample_rate = 22050;
  empty.channels = 1;
  EXPECT_THROW(preprocess_samples(empty, SegmentPolicy::kFirst), Error);
  auto slow = tone(4000, 1, 1.0);
  EXPECT_THROW(preprocess_samples(slow, SegmentPolicy::kFirst), Error);
}

TEST(SelectSegment, MaxRmsMatchesBruteForce) {
  SeededRng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = kClipSamples + rng.below(6 * kClipRate);
    std::vector<std::int16_t> s(n);
    for (auto& x : s) x = static_cast<std::int16_t>(static_cast<int>(rng.below(2001)) - 1000);
    // A loud burst somewhere.
    const std::size_t at = rng.below(n - 5000);
    for (std::size_t i = at; i < at + 5000; ++i) s[i] = static_cast<std::int16_t>(s[i] * 20);
    std::size_t best = 0;
    double best_e = -1;
    for (std::size_t start = 0; start + kClipSamples <= n; start += kSegmentHop) {
      double e = 0;
      for (std::size_t i = start; i < start + kClipSamples; ++i) e += double(s[i]) * s[i];
      if (e > best_e) best_e = e, best = start;
    }
    EXPECT_EQ(select_segment(s, SegmentPolicy::kMaxRms), best);
    EXPECT_EQ(select_segment(s, SegmentPolicy::kFirst), 0u);
  }
}

TEST(SelectSegment, LoudTailIsChosen) {
  std::vector<std::int16_t> s(3 * kClipRate * 4, 10);
  for (std::size_t i = s.size() - kClipSamples; i < s.size(); ++i) s[i] = 9000;
  const auto pcm = preprocess_samples(from_pcm(s), SegmentPolicy::kMaxRms);
  EXPECT_EQ(pcm.front(), 9000);
}

std::string manifest_text(const std::vector<std::string>& rows) {
  std::string t = "clip_id,path,category,source_recording_id,split,referent,anchor_quality,anchor_fit\n";
  for (const auto& r : rows) t += r + "\n";
  return t;
}

TEST(Manifest, LoadsRowsAndAnchors) {
  testing::TempDir dir;
  write_file_atomic(dir / "m.csv", manifest_text({"a,a.wav,rain,r1,development,1,,",
                                                   "b,b.wav,rain,r2,evaluation,0,high,low"}));
  const Manifest m = load_manifest(dir / "m.csv");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_TRUE(m.entries[0].referent);
  ASSERT_TRUE(m.entries[1].anchor);
  EXPECT_EQ(m.entries[1].anchor->fit, Pole::kLow);
  EXPECT_EQ(m.resolve(m.entries[0]), dir / "a.wav");
  EXPECT_EQ(m.count(Category::kRain, Split::kEvaluation), 1u);
}

void expect_manifest_error(const std::string& row, const std::string& needle) {
  testing::TempDir dir;
  write_file_atomic(dir / "m.csv", manifest_text({"ok,ok.wav,rain,r1,development,0,,", row}));
  try {
    load_manifest(dir / "m.csv");
    FAIL() << row;
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find(needle), std::string::npos) << msg;
  }
}

TEST(Manifest, ErrorsCarryLineNumbers) {
  expect_manifest_error("x,x.wav,cat_meow,r,development,0,,", "unknown category 'cat_meow'");
  expect_manifest_error("x,x.wav,rain,r,training,0,,", "unknown split");
  expect_manifest_error("x,x.wav,rain,r,development,2,,", "referent");
  expect_manifest_error("x,x.wav,rain,r,evaluation,0,low,high", "not used");
  expect_manifest_error("x,x.wav,rain,r,evaluation,0,high,", "anchor poles");
  expect_manifest_error("ok,y.wav,rain,r,development,0,,", "duplicate clip_id");
  expect_manifest_error("x,x.wav,rain,,development,0,,", "source_recording_id");
}

TEST(Manifest, WrongHeaderAndMissingFile) {
  testing::TempDir dir;
  write_file_atomic(dir / "m.csv", "id,path\n");
  EXPECT_THROW(load_manifest(dir / "m.csv"), Error);
  EXPECT_THROW(load_manifest(dir / "none.csv"), Error);
}

TEST(Manifest, WriteLoadRoundTrip) {
  testing::TempDir dir;
  write_file_atomic(dir / "m.csv", manifest_text({"a,\"x,y.wav\",gunshot,r1,evaluation,0,low,low"}));
  const Manifest m = load_manifest(dir / "m.csv");
  Provenance p{"abc", 3};
  write_manifest(m, dir / "n.csv", &p);
  EXPECT_EQ(read_file(dir / "n.csv").rfind("# tool=", 0), 0u);
  const Manifest n = load_manifest(dir / "n.csv");
  EXPECT_EQ(n.entries[0].path, "x,y.wav");
  EXPECT_EQ(n.entries[0].anchor, m.entries[0].anchor);
}

Manifest split_manifest(std::size_t rain_eval, bool leak) {
  Manifest m;
  auto add = [&](std::string id, Category c, std::string rec, Split s) {
    ManifestEntry e;
    e.clip_id = std::move(id);
    e.path = e.clip_id + ".wav";
    e.category = c;
    e.source_recording_id = std::move(rec);
    e.split = s;
    m.entries.push_back(e);
  };
  for (Category c : kCategories) {
    const std::size_t n = c == Category::kRain ? rain_eval : 100;
    for (std::size_t i = 0; i < n; ++i)
      add(fmt::format("{}-e{}", category_name(c), i), c, fmt::format("{}-rec-e{}", category_name(c), i), Split::kEvaluation);
    add(fmt::format("{}-d", category_name(c)), c, fmt::format("{}-rec-d", category_name(c)), Split::kDevelopment);
  }
  if (leak) {
    add("dog-dev-leak", Category::kDogBark, "bbc_0042", Split::kDevelopment);
    add("dog-eval-leak", Category::kDogBark, "bbc_0042", Split::kEvaluation);
  }
  return m;
}

TEST(SplitValidation, CleanSplitPasses) {
  const SplitReport r = validate_split(split_manifest(100, false));
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.development_total, 7u);
}

TEST(SplitValidation, ReportsRecordingLeak) {
  Manifest m = split_manifest(100, true);
  m.entries.erase(m.entries.begin());  // keep dog_bark at 100 evaluation clips
  const SplitReport r = validate_split(m);
  ASSERT_EQ(r.leaks.size(), 1u);
  EXPECT_EQ(r.leaks[0].recording_id, "bbc_0042");
  EXPECT_EQ(r.leaks[0].development_clips, std::vector<std::string>{"dog-dev-leak"});
  EXPECT_EQ(r.leaks[0].evaluation_clips, std::vector<std::string>{"dog-eval-leak"});
  EXPECT_TRUE(r.count_violations.empty());
}

TEST(SplitValidation, ReportsShortCategory) {
  const SplitReport r = validate_split(split_manifest(99, false));
  ASSERT_EQ(r.count_violations.size(), 1u);
  EXPECT_EQ(r.count_violations[0].category, Category::kRain);
  EXPECT_EQ(r.count_violations[0].found, 99u);
  EXPECT_EQ(r.count_violations[0].expected, 100u);
}

TEST(SplitValidation, AnchorsAreNotCounted) {
  Manifest m = split_manifest(100, false);
  ManifestEntry a = m.entries.front();
  a.clip_id = "anchor";
  a.source_recording_id = "anchor-rec";
  a.anchor = AnchorPoles{Pole::kHigh, Pole::kLow};
  m.entries.push_back(a);
  EXPECT_TRUE(validate_split(m).ok());
}

void write_system(const fs::path& root, const std::string& id) {
  fs::create_directories(root);
  write_file_atomic(root / "system.json", fmt::format(R"({{"system_id":"{}","track":"A","team_id":"t"}})", id));
}

TEST(Submission, FlagsDuplicateFormatAndCount) {
  testing::TempDir dir;
  const auto dev = testing::random_pcm(kClipSamples, 1);
  write_wav_pcm16(dir / "dev.wav", dev, kClipRate);
  write_file_atomic(dir / "m.csv", manifest_text({"dev-1,dev.wav,rain,r1,development,0,,"}));
  const ContentIndex index = build_content_index(load_manifest(dir / "m.csv"), Split::kDevelopment);

  const fs::path sys = dir / "sys";
  write_system(sys, "sys1");
  for (Category c : kCategories) fs::create_directories(sys / std::string(category_name(c)));
  for (Category c : kCategories) {
    for (int i = 0; i < 2; ++i) {
      write_wav_pcm16(sys / std::string(category_name(c)) / fmt::format("{:02d}.wav", i),
                      testing::random_pcm(kClipSamples, 100 + category_code(c) * 10 + i), kClipRate);
    }
  }
  write_wav_pcm16(sys / "rain" / "01.wav", dev, kClipRate);
  write_wav_pcm16(sys / "gunshot" / "01.wav", testing::random_pcm(1000, 5), 44100);
  write_wav_pcm16(sys / "keyboard" / "02.wav", testing::random_pcm(kClipSamples, 77), kClipRate);
  fs::create_directories(sys / "cat_meow");

  const SubmissionInfo info = load_submission_info(sys);
  EXPECT_EQ(info.system_id, "sys1");
  const SubmissionReport r = validate_submission(info, 2, index);
  ASSERT_EQ(r.duplicates.size(), 1u);
  EXPECT_EQ(r.duplicates[0].clip_id, "sys1/rain/01");
  EXPECT_EQ(r.duplicates[0].development_clip_id, "dev-1");
  ASSERT_EQ(r.format_violations.size(), 1u);
  EXPECT_NE(r.format_violations[0].path.find("gunshot"), std::string::npos);
  ASSERT_EQ(r.count_violations.size(), 1u);
  EXPECT_EQ(r.count_violations[0].category, Category::kKeyboard);
  EXPECT_EQ(r.count_violations[0].found, 3u);
  EXPECT_EQ(r.unexpected_entries, std::vector<std::string>{"cat_meow"});
  EXPECT_FALSE(r.ok());
}

TEST(Submission, BadSystemJson) {
  testing::TempDir dir;
  fs::create_directories(dir / "s");
  write_file_atomic(dir / "s" / "system.json", R"({"system_id":"x","track":"C","team_id":"t"})");
  EXPECT_THROW(load_submission_info(dir / "s"), Error);
  EXPECT_THROW(load_submission_info(dir / "missing"), Error);
}

TEST(PcmHash, DependsOnContent) {
  const auto a = testing::random_pcm(100, 1);
  auto b = a;
  EXPECT_EQ(pcm_hash(a), pcm_hash(b));
  b[50] ^= 1;
  EXPECT_NE(pcm_hash(a), pcm_hash(b));
}

}  // namespace
}  // namespace foley
