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


#include "foley/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "foley/common.hpp"

namespace foley {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "dog_bark", "footstep", "gunshot", "keyboard", "moving_motor_vehicle", "rain", "sneeze_cough",
};

constexpr std::string_view kManifestHeader =
    "clip_id,path,category,source_recording_id,split,referent,anchor_quality,anchor_fit";

}  // namespace

std::string_view category_name(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

std::optional<Category> parse_category(std::string_view name) {
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (kCategoryNames[i] == name) return static_cast<Category>(i);
  }
  return std::nullopt;
}

std::string valid_category_list() {
  std::string out;
  for (auto n : kCategoryNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

Category category_from_string(std::string_view name) {
  if (auto c = parse_category(name)) return *c;
  throw Error(fmt::format("unknown category '{}' (valid: {})", name, valid_category_list()));
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kDevelopment: return "development";
    case Split::kEvaluation: return "evaluation";
    case Split::kSubmission: return "submission";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "development") return Split::kDevelopment;
  if (name == "evaluation") return Split::kEvaluation;
  if (name == "submission") return Split::kSubmission;
  return std::nullopt;
}

std::string_view pole_name(Pole p) { return p == Pole::kHigh ? "high" : "low"; }

std::optional<Pole> parse_pole(std::string_view name) {
  if (name == "high") return Pole::kHigh;
  if (name == "low") return Pole::kLow;
  return std::nullopt;
}

bool is_valid_anchor(const AnchorPoles& poles) {
  return !(poles.quality == Pole::kLow && poles.fit == Pole::kHigh);
}

std::string_view track_name(Track t) { return t == Track::kA ? "A" : "B"; }

std::optional<Track> parse_track(std::string_view name) {
  if (name == "A" || name == "a") return Track::kA;
  if (name == "B" || name == "b") return Track::kB;
  return std::nullopt;
}

fs::path Manifest::resolve(const ManifestEntry& e) const {
  const fs::path p(e.path);
  return p.is_absolute() ? p : base_dir / p;
}

std::size_t Manifest::count(Category c, Split s) const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) {
    return e.category == c && e.split == s;
  }));
}

const ManifestEntry* Manifest::find(std::string_view clip_id) const {
  for (const auto& e : entries) {
    if (e.clip_id == clip_id) return &e;
  }
  return nullptr;
}

Manifest load_manifest(const fs::path& path) {
  if (!fs::exists(path)) throw Error(fmt::format("manifest not found: {}", path.string()));
  const CsvTable table = read_csv(path);
  const std::vector<std::string> expected = split_csv_line(kManifestHeader);
  if (table.header != expected) {
    throw Error(fmt::format("{}: manifest header must be '{}'", path.string(), kManifestHeader));
  }
  Manifest m;
  m.dataset_name = path.stem().string();
  m.base_dir = path.parent_path();
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    const auto& f = row.fields;
    auto fail = [&](const std::string& msg) {
      return Error(fmt::format("{}: row at line {}: {}", path.string(), row.line, msg));
    };
    ManifestEntry e;
    e.line = row.line;
    e.clip_id = f[0];
    e.path = f[1];
    if (e.clip_id.empty()) throw fail("empty clip_id");
    if (e.path.empty()) throw fail("empty path");
    auto cat = parse_category(f[2]);
    if (!cat) throw fail(fmt::format("unknown category '{}' (valid: {})", f[2], valid_category_list()));
    e.category = *cat;
    e.source_recording_id = f[3];
    if (e.source_recording_id.empty()) throw fail("empty source_recording_id");
    auto split = parse_split(f[4]);
    if (!split) throw fail(fmt::format("unknown split '{}'", f[4]));
    e.split = *split;
    if (f[5] == "1") e.referent = true;
    else if (f[5] != "0" && !f[5].empty()) throw fail(fmt::format("referent must be 0 or 1, found '{}'", f[5]));
    if (!f[6].empty() || !f[7].empty()) {
      auto q = parse_pole(f[6]);
      auto fit = parse_pole(f[7]);
      if (!q || !fit) throw fail("anchor poles must both be 'high' or 'low'");
      AnchorPoles poles{*q, *fit};
      if (!is_valid_anchor(poles)) throw fail("anchor type (low quality, high fit) is not used");
      e.anchor = poles;
    }
    if (!seen.insert(e.clip_id).second) throw fail(fmt::format("duplicate clip_id '{}'", e.clip_id));
    ++m.counts[static_cast<std::size_t>(e.category)];
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const Manifest& manifest, const fs::path& path, const Provenance* prov) {
  std::ostringstream out;
  if (prov) out << prov->csv_comment();
  out << kManifestHeader << '\n';
  for (const auto& e : manifest.entries) {
    out << csv_escape(e.clip_id) << ',' << csv_escape(e.path) << ',' << category_name(e.category) << ','
        << csv_escape(e.source_recording_id) << ',' << split_name(e.split) << ',' << (e.referent ? 1 : 0)
        << ',' << (e.anchor ? pole_name(e.anchor->quality) : "") << ','
        << (e.anchor ? pole_name(e.anchor->fit) : "") << '\n';
  }
  write_file_atomic(path, out.str());
}

std::optional<SegmentPolicy> parse_segment_policy(std::string_view name) {
  if (name == "max-rms") return SegmentPolicy::kMaxRms;
  if (name == "first") return SegmentPolicy::kFirst;
  return std::nullopt;
}

std::size_t select_segment(std::span<const std::int16_t> samples, SegmentPolicy policy) {
  if (samples.size() <= kClipSamples || policy == SegmentPolicy::kFirst) return 0;
  std::vector<std::int64_t> prefix(samples.size() + 1, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::int64_t s = samples[i];
    prefix[i + 1] = prefix[i] + s * s;
  }
  std::size_t best = 0;
  std::int64_t best_energy = -1;
  for (std::size_t start = 0; start + kClipSamples <= samples.size(); start += kSegmentHop) {
    const std::int64_t energy = prefix[start + kClipSamples] - prefix[start];
    if (energy > best_energy) {
      best_energy = energy;
      best = start;
    }
  }
  return best;
}

std::vector<std::int16_t> preprocess_samples(const DecodedAudio& raw, SegmentPolicy policy, Exec exec) {
  if (raw.channels < 1) throw Error("audio declares no channels");
  if (raw.sample_rate < 8000 || raw.sample_rate > 192000) {
    throw Error(fmt::format("unsupported sample rate {} Hz (accepted 8000-192000)", raw.sample_rate));
  }
  const std::size_t frames = raw.frames();
  if (frames == 0) throw Error("zero-length audio");

  const auto channels = static_cast<std::size_t>(raw.channels);
  std::vector<double> mono(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) acc += raw.samples[i * channels + c];
    mono[i] = std::clamp(acc / static_cast<double>(channels), -1.0, 1.0);
  }

  std::vector<double> resampled(kernels::resampled_length(frames, raw.sample_rate, kClipRate));
  kernels::resample(exec, mono, raw.sample_rate, kClipRate, resampled);

  std::vector<std::int16_t> pcm(resampled.size());
  for (std::size_t i = 0; i < resampled.size(); ++i) {
    const double v = std::round(resampled[i] * 32768.0);
    pcm[i] = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
  }

  if (pcm.size() <= kClipSamples) {
    pcm.resize(kClipSamples, 0);
    return pcm;
  }
  const std::size_t start = select_segment(pcm, policy);
  return {pcm.begin() + static_cast<std::ptrdiff_t>(start),
          pcm.begin() + static_cast<std::ptrdiff_t>(start + kClipSamples)};
}

AudioClip preprocess_clip(const DecodedAudio& raw, SegmentPolicy policy, Exec exec) {
  AudioClip clip;
  clip.samples = preprocess_samples(raw, policy, exec);
  return clip;
}

SplitReport validate_split(const Manifest& manifest, const SplitOptions& options) {
  SplitReport report;
  report.expected_per_category = options.expected_evaluation_per_category;
  std::map<std::string, RecordingLeak> by_recording;
  std::array<bool, kNumCategories> present{};
  for (const auto& e : manifest.entries) {
    present[static_cast<std::size_t>(e.category)] = true;
    if (e.split == Split::kDevelopment) {
      ++report.development_total;
      by_recording[e.source_recording_id].development_clips.push_back(e.clip_id);
    } else if (e.split == Split::kEvaluation) {
      if (!e.anchor) ++report.evaluation_counts[static_cast<std::size_t>(e.category)];
      by_recording[e.source_recording_id].evaluation_clips.push_back(e.clip_id);
    }
  }
  for (auto& [id, leak] : by_recording) {
    if (!leak.development_clips.empty() && !leak.evaluation_clips.empty()) {
      leak.recording_id = id;
      report.leaks.push_back(std::move(leak));
    }
  }
  for (Category c : kCategories) {
    const auto i = static_cast<std::size_t>(c);
    if (!present[i] && !options.require_all_categories) continue;
    if (report.evaluation_counts[i] != options.expected_evaluation_per_category) {
      report.count_violations.push_back({c, report.evaluation_counts[i], options.expected_evaluation_per_category});
    }
  }
  return report;
}

std::vector<std::string> check_manifest_audio(const Manifest& manifest) {
  std::vector<std::string> problems;
  for (const auto& e : manifest.entries) {
    const fs::path p = manifest.resolve(e);
    if (!fs::exists(p)) {
      problems.push_back(fmt::format("line {}: {} does not exist", e.line, p.string()));
      continue;
    }
    try {
      read_wav_pcm16(p);
    } catch (const Error& err) {
      problems.push_back(fmt::format("line {}: {}", e.line, err.what()));
    }
  }
  return problems;
}

SubmissionInfo load_submission_info(const fs::path& dir) {
  const fs::path meta = dir / "system.json";
  if (!fs::is_directory(dir)) throw Error(fmt::format("submission directory unreadable: {}", dir.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(meta));
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("{}: {}", meta.string(), e.what()));
  }
  SubmissionInfo info;
  info.root = dir;
  info.system_id = j.value("system_id", dir.filename().string());
  info.team_id = j.value("team_id", "");
  auto track = parse_track(j.value("track", "A"));
  if (!track) throw Error(fmt::format("{}: track must be A or B", meta.string()));
  info.track = *track;
  return info;
}

std::vector<SubmissionInfo> discover_submissions(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(fmt::format("not a directory: {}", dir.string()));
  std::vector<SubmissionInfo> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "system.json")) {
      out.push_back(load_submission_info(entry.path()));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.system_id < b.system_id; });
  return out;
}

std::vector<SubmissionClip> list_submission_clips(const SubmissionInfo& info) {
  std::vector<SubmissionClip> clips;
  for (Category c : kCategories) {
    const fs::path dir = info.root / category_name(c);
    if (!fs::is_directory(dir)) continue;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".wav") continue;
      clips.push_back({fmt::format("{}/{}/{}", info.system_id, category_name(c), entry.path().stem().string()), c,
                       entry.path()});
    }
  }
  std::sort(clips.begin(), clips.end(), [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
  return clips;
}

std::string pcm_hash(std::span<const std::int16_t> samples) {
  std::vector<std::uint8_t> bytes(samples.size() * 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(samples[i]);
    bytes[2 * i] = static_cast<std::uint8_t>(u & 0xff);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(u >> 8);
  }
  return sha256_hex(bytes);
}

namespace {

std::vector<std::int16_t> load_preprocessed(const fs::path& p) {
  DecodedAudio raw = read_wav(p);
  return preprocess_samples(raw, SegmentPolicy::kMaxRms);
}

}  // namespace

ContentIndex build_content_index(const Manifest& manifest, Split split) {
  ContentIndex index;
  for (const auto& e : manifest.entries) {
    if (e.split != split) continue;
    index.emplace(pcm_hash(load_preprocessed(manifest.resolve(e))), e.clip_id);
  }
  return index;
}

SubmissionReport validate_submission(const SubmissionInfo& info, std::size_t expected_per_category,
                                     const ContentIndex& development) {
  if (!fs::is_directory(info.root)) {
    throw Error(fmt::format("submission directory unreadable: {}", info.root.string()));
  }
  SubmissionReport report;
  report.system_id = info.system_id;
  for (const auto& entry : fs::directory_iterator(info.root)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && !parse_category(name)) report.unexpected_entries.push_back(name);
  }
  std::sort(report.unexpected_entries.begin(), report.unexpected_entries.end());

  for (const auto& clip : list_submission_clips(info)) {
    ++report.counts[static_cast<std::size_t>(clip.category)];
    std::vector<std::int16_t> pcm;
    try {
      const Pcm16Audio wav = read_wav_pcm16(clip.path);
      if (wav.channels != 1 || wav.sample_rate != kClipRate || wav.samples.size() != kClipSamples) {
        report.format_violations.push_back(
            {clip.path.string(), fmt::format("expected mono 22050 Hz with 88200 samples, found {} ch {} Hz {} samples",
                                             wav.channels, wav.sample_rate, wav.samples.size() / std::max(1, wav.channels))});
        pcm = load_preprocessed(clip.path);
      } else {
        pcm = wav.samples;
      }
    } catch (const Error& e) {
      report.format_violations.push_back({clip.path.string(), e.what()});
      try {
        pcm = load_preprocessed(clip.path);
      } catch (const Error&) {
        continue;
      }
    }
    if (auto it = development.find(pcm_hash(pcm)); it != development.end()) {
      report.duplicates.push_back({clip.clip_id, it->second});
    }
  }
  for (Category c : kCategories) {
    const auto n = report.counts[static_cast<std::size_t>(c)];
    if (n != expected_per_category) report.count_violations.push_back({c, n, expected_per_category});
  }
  return report;
}

}  // namespace foley
