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


#ifndef FOLEY_FIXTURE_HPP_
#define FOLEY_FIXTURE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "foley/config.hpp"
#include "foley/corpus.hpp"
#include "foley/pipeline.hpp"

namespace foley {

// Small synthetic challenge: a raw dataset with anchors and referents, two
// Track A submissions (one clean and varied, one hissy and repetitive), a
// rater pool, a config and the expected ranking.
struct FixtureLayout {
  std::filesystem::path root;
  std::filesystem::path manifest;       // dataset/manifest.csv
  std::filesystem::path submissions;    // submissions/<system>/
  std::filesystem::path raters;         // raters.csv
  std::filesystem::path rater_scripts;  // rater_scripts.json
  std::filesystem::path config;         // config.toml
  std::filesystem::path expected_ranking;
};

inline constexpr std::size_t kFixtureClipsPerCategory = 10;

FixtureLayout make_fixture(const std::filesystem::path& out, std::uint64_t seed);

// One synthetic sound at `rate` Hz, in [-1, 1]. `variety` in [0, 1] scales
// how far parameters stray from the category's base recipe.
std::vector<double> synth_sound(Category category, int rate, double seconds, double variety, SeededRng& rng);
// Peak-normalized 4 s clip at 22,050 Hz; `hiss` adds white noise at that
// fraction of the signal power.
std::vector<std::int16_t> synth_clip(Category category, double variety, double hiss, SeededRng& rng);

// What a scripted rater hears.
namespace perception {
// Share of spectral energy between 7 and 11 kHz.
double high_band_fraction(std::span<const std::int16_t> samples);
int quality_score(std::span<const std::int16_t> samples);
// Built-in embedding averaged over windows, deviation dims weighted x2.
std::vector<double> profile(std::span<const std::int16_t> samples);
double distance(const std::vector<double>& a, const std::vector<double>& b);
struct Referents {
  std::vector<double> centroid;
  double spread = 1.0;  // mean referent distance to the centroid
};
Referents learn(const std::vector<std::vector<double>>& profiles);
int fit_score(const Referents& ref, const std::vector<double>& profile);
// Mean pairwise profile distance of the 4 s segments of a diversity sequence.
double segment_spread(std::span<const std::int16_t> samples, double gap_seconds);
int diversity_score(std::span<const std::int16_t> samples, double gap_seconds);
}  // namespace perception

enum class RaterBehaviour { kNormal, kConfused, kSelfRater };

struct ScriptedRater {
  std::string rater_id;
  RaterBehaviour behaviour = RaterBehaviour::kNormal;
  std::string team_id;
};

struct ScriptedRaterOptions {
  std::vector<ScriptedRater> raters;
  std::uint64_t seed = 0;
  double gap_seconds = kDefaultGapSeconds;
  // PCM hashes of each team's own submission clips, for self-raters.
  std::map<std::string, std::set<std::string>> team_clip_hashes;
};

ScriptedRaterOptions load_scripted_raters(const PipelineConfig& cfg);

// Drives every rater in the plan through the HTTP API, one after another.
// Only the rater-facing part of the plan (rater_id, category) is used.
void run_scripted_raters(const std::string& base_url, const ListeningPlan& plan, const ScriptedRaterOptions& options);

RaterHook scripted_rater_hook(const PipelineConfig& cfg);

}  // namespace foley

#endif  // FOLEY_FIXTURE_HPP_
