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


#ifndef FOLEY_CORPUS_HPP_
#define FOLEY_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "foley/common.hpp"
#include "foley/kernels.hpp"
#include "foley/wav.hpp"

namespace foley {

enum class Category : std::uint8_t {
  kDogBark = 0,
  kFootstep = 1,
  kGunshot = 2,
  kKeyboard = 3,
  kMovingMotorVehicle = 4,
  kRain = 5,
  kSneezeCough = 6,
};

inline constexpr std::size_t kNumCategories = 7;
inline constexpr std::array<Category, kNumCategories> kCategories = {
    Category::kDogBark, Category::kFootstep,           Category::kGunshot,    Category::kKeyboard,
    Category::kMovingMotorVehicle, Category::kRain, Category::kSneezeCough,
};

constexpr int category_code(Category c) { return static_cast<int>(c); }
std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view name);
// Like parse_category but throws with the list of valid labels.
Category category_from_string(std::string_view name);
std::string valid_category_list();

enum class Split { kDevelopment, kEvaluation, kSubmission };
std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

enum class Pole { kHigh, kLow };
std::string_view pole_name(Pole p);
std::optional<Pole> parse_pole(std::string_view name);

struct AnchorPoles {
  Pole quality = Pole::kHigh;
  Pole fit = Pole::kHigh;

  friend bool operator==(const AnchorPoles&, const AnchorPoles&) = default;
};

// Only (high, low), (high, high) and (low, low) are valid anchor types.
bool is_valid_anchor(const AnchorPoles& poles);

enum class Track { kA, kB };
std::string_view track_name(Track t);
std::optional<Track> parse_track(std::string_view name);

// Clip format contract.
inline constexpr int kClipRate = 22050;
inline constexpr int kClipSeconds = 4;
inline constexpr std::size_t kClipSamples = static_cast<std::size_t>(kClipRate) * kClipSeconds;
inline constexpr std::size_t kSegmentHop = kClipRate / 2;

struct AudioClip {
  std::vector<std::int16_t> samples;
  int sample_rate = kClipRate;
  int channels = 1;
  std::string clip_id;
  Category category = Category::kDogBark;
  std::string source_recording_id;
  Split split = Split::kDevelopment;
  bool referent = false;
  std::optional<AnchorPoles> anchor;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  bool conforms() const {
    return sample_rate == kClipRate && channels == 1 && samples.size() == kClipSamples;
  }
};

struct ManifestEntry {
  std::string clip_id;
  std::string path;  // as written in the CSV; relative paths resolve against the manifest directory
  Category category = Category::kDogBark;
  std::string source_recording_id;
  Split split = Split::kDevelopment;
  bool referent = false;
  std::optional<AnchorPoles> anchor;
  std::size_t line = 0;
};

struct Manifest {
  std::string dataset_name;
  std::filesystem::path base_dir;
  std::vector<ManifestEntry> entries;
  std::array<std::size_t, kNumCategories> counts{};

  std::filesystem::path resolve(const ManifestEntry& e) const;
  std::size_t count(Category c, Split s) const;
  const ManifestEntry* find(std::string_view clip_id) const;
};

Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path, const Provenance* prov = nullptr);

enum class SegmentPolicy { kMaxRms, kFirst };
std::optional<SegmentPolicy> parse_segment_policy(std::string_view name);

// Downmix, resample to 22,050 Hz, quantize and pad/segment to exactly 4 s.
std::vector<std::int16_t> preprocess_samples(const DecodedAudio& raw, SegmentPolicy policy,
                                             Exec exec = Exec::kParallel);
AudioClip preprocess_clip(const DecodedAudio& raw, SegmentPolicy policy, Exec exec = Exec::kParallel);

// Start offset of the 4 s window chosen from an over-long 22,050 Hz signal.
std::size_t select_segment(std::span<const std::int16_t> samples, SegmentPolicy policy);

struct RecordingLeak {
  std::string recording_id;
  std::vector<std::string> development_clips;
  std::vector<std::string> evaluation_clips;
};

struct CountViolation {
  Category category;
  std::size_t found = 0;
  std::size_t expected = 0;
};

struct SplitOptions {
  std::size_t expected_evaluation_per_category = 100;
  // When false, categories absent from the manifest are not checked.
  bool require_all_categories = true;
};

struct SplitReport {
  std::vector<RecordingLeak> leaks;
  std::array<std::size_t, kNumCategories> evaluation_counts{};
  std::vector<CountViolation> count_violations;
  std::size_t development_total = 0;
  std::size_t expected_per_category = 0;

  bool ok() const { return leaks.empty() && count_violations.empty(); }
};

// Anchor-flagged rows are excluded from the per-category evaluation counts.
SplitReport validate_split(const Manifest& manifest, const SplitOptions& options = {});

// Missing or non-WAV paths, one message per offending row.
std::vector<std::string> check_manifest_audio(const Manifest& manifest);

struct SubmissionInfo {
  std::string system_id;
  Track track = Track::kA;
  std::string team_id;
  std::filesystem::path root;
};

// Reads <dir>/system.json ({"system_id", "track", "team_id"}).
SubmissionInfo load_submission_info(const std::filesystem::path& dir);
std::vector<SubmissionInfo> discover_submissions(const std::filesystem::path& dir);

struct SubmissionClip {
  std::string clip_id;  // <system_id>/<category>/<file stem>
  Category category;
  std::filesystem::path path;
};

// Clips under <root>/<category>/*.wav, sorted by clip_id.
std::vector<SubmissionClip> list_submission_clips(const SubmissionInfo& info);

std::string pcm_hash(std::span<const std::int16_t> samples);

// Content hash of preprocessed PCM -> clip_id for one split of a manifest.
using ContentIndex = std::unordered_map<std::string, std::string>;
ContentIndex build_content_index(const Manifest& manifest, Split split);

struct FormatViolation {
  std::string path;
  std::string reason;
};

struct DuplicateClip {
  std::string clip_id;
  std::string development_clip_id;
};

struct SubmissionReport {
  std::string system_id;
  std::array<std::size_t, kNumCategories> counts{};
  std::vector<CountViolation> count_violations;
  std::vector<FormatViolation> format_violations;
  std::vector<DuplicateClip> duplicates;
  std::vector<std::string> unexpected_entries;

  bool ok() const {
    return count_violations.empty() && format_violations.empty() && duplicates.empty() &&
           unexpected_entries.empty();
  }
};

SubmissionReport validate_submission(const SubmissionInfo& info, std::size_t expected_per_category,
                                     const ContentIndex& development);

}  // namespace foley

#endif  // FOLEY_CORPUS_HPP_
