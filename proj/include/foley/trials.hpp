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


#ifndef FOLEY_TRIALS_HPP_
#define FOLEY_TRIALS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "foley/common.hpp"
#include "foley/corpus.hpp"
#include "foley/select.hpp"

namespace foley {

enum class TrialKind { kReferent, kRating, kDiversity };
std::string_view trial_kind_name(TrialKind k);
std::optional<TrialKind> parse_trial_kind(std::string_view name);

struct Finalist {
  std::string system_id;
  Track track = Track::kA;
  std::string team_id;

  bool operator==(const Finalist&) const = default;
};

struct AnchorSpec {
  std::string clip_id;
  AnchorPoles poles;
  Category category = Category::kDogBark;
};

// Only present in the sealed plan.
struct HiddenPayload {
  std::string system_id;  // empty for referents and anchors
  std::string team_id;
  std::optional<Track> track;
  std::string clip_id;
  Category category = Category::kDogBark;
  std::optional<AnchorPoles> anchor;

  bool operator==(const HiddenPayload&) const = default;
};

struct Trial {
  std::string trial_id;
  TrialKind kind = TrialKind::kRating;
  std::string clip_token;
  std::size_t position = 0;
  HiddenPayload hidden;

  bool operator==(const Trial&) const = default;
};

inline constexpr std::string_view kDiversitySession = "diversity";

struct SessionPlan {
  std::string session_id;
  std::string rater_id;
  std::string team_id;
  std::string category;  // category name, or "diversity"
  int instance = 0;
  std::uint64_t seed = 0;
  std::vector<Trial> trials;

  bool operator==(const SessionPlan&) const = default;

  std::size_t count(TrialKind k) const;
  std::size_t anchor_count() const;
  const Trial* find(std::string_view trial_id) const;
};

struct PlanShape {
  std::size_t referents = 6;
  std::size_t anchors_per_type = 4;
  std::size_t medoids_per_system = 20;

  bool operator==(const PlanShape&) const = default;
};

// The unordered content of one category session.
struct CategoryTemplate {
  Category category = Category::kDogBark;
  std::vector<std::string> referents;
  std::vector<Finalist> finalists;                  // sorted by system_id; tracks intermixed
  std::vector<std::vector<std::string>> blocks;     // per finalist, medoid clip ids
  std::vector<AnchorSpec> anchors;
  std::uint64_t seed = 0;
};

CategoryTemplate build_category_plan(Category category, std::span<const Finalist> finalists, const MedoidSet& medoids,
                                     std::span<const AnchorSpec> anchors, std::span<const std::string> referents,
                                     std::uint64_t seed, const PlanShape& shape = {});

// Rows of a balanced (Williams) Latin square over m symbols; 2m rows when m is odd.
std::vector<std::vector<std::size_t>> balanced_latin_square(std::size_t m);

// Orderings of the template: system blocks follow a seeded balanced Latin
// square, sounds are shuffled within blocks, anchors are scattered anew.
std::vector<SessionPlan> counterbalance(const CategoryTemplate& tmpl, std::size_t n_instances, std::uint64_t seed);

// Order of finalist blocks used by one instance, as indices into tmpl.finalists.
std::vector<std::size_t> block_order(const CategoryTemplate& tmpl, std::size_t instance, std::uint64_t seed);

enum class RaterRole { kRating, kDiversity };

struct RaterInfo {
  std::string rater_id;
  std::string team_id;
  std::size_t max_categories = kNumCategories;
  RaterRole role = RaterRole::kRating;

  bool operator==(const RaterInfo&) const = default;
};

std::vector<RaterInfo> read_raters_csv(const std::filesystem::path& path);

struct AssignmentOptions {
  std::size_t band_lo = 10;
  std::size_t band_hi = 15;
  std::size_t min_categories = 4;

  bool operator==(const AssignmentOptions&) const = default;
};

struct AssignmentPlan {
  std::map<std::string, std::vector<Category>> by_rater;
  std::array<std::size_t, kNumCategories> coverage{};
  std::vector<Category> shortfall;  // categories below band_lo
  AssignmentOptions options;

  bool operator==(const AssignmentPlan&) const = default;
};

AssignmentPlan assign_categories(std::span<const RaterInfo> raters, std::span<const Category> categories,
                                 const AssignmentOptions& options, std::uint64_t seed);

struct ListeningPlan {
  Provenance provenance;
  std::uint64_t seed = 0;
  PlanShape shape;
  std::vector<Finalist> finalists;
  std::vector<RaterInfo> raters;
  AssignmentPlan assignment;
  std::vector<SessionPlan> sessions;
  std::map<std::string, std::string> audio;  // token -> audio path, relative to the plan directory

  bool operator==(const ListeningPlan&) const = default;

  const SessionPlan* find_session(std::string_view session_id) const;
  const SessionPlan* find_session(std::string_view rater_id, std::string_view category) const;
};

struct PlanInputs {
  std::vector<Finalist> finalists;
  MedoidSet medoids;
  std::vector<AnchorSpec> anchors;
  std::map<Category, std::vector<std::string>> referents;
  std::vector<RaterInfo> raters;
  std::map<std::string, std::filesystem::path> clip_paths;  // clip_id -> audio file
  // (system_id, category) -> diversity file; empty disables diversity sessions.
  std::map<GroupKey, std::filesystem::path> diversity_files;
  AssignmentOptions assignment;
  PlanShape shape;
};

ListeningPlan build_listening_plan(const PlanInputs& inputs, std::uint64_t seed, const std::filesystem::path& plan_dir,
                                   const Provenance& provenance);

nlohmann::json plan_to_json(const ListeningPlan& plan, bool sealed);
ListeningPlan plan_from_json(const nlohmann::json& j);
void write_plan(const ListeningPlan& plan, const std::filesystem::path& dir);
ListeningPlan read_plan(const std::filesystem::path& sealed_path);

std::vector<Finalist> read_finalists_csv(const std::filesystem::path& path);
std::vector<AnchorSpec> read_anchors_csv(const std::filesystem::path& path,
                                         std::map<std::string, std::filesystem::path>* paths = nullptr);
std::map<Category, std::vector<std::string>> read_referents_csv(
    const std::filesystem::path& path, std::map<std::string, std::filesystem::path>* paths = nullptr);

}  // namespace foley

#endif  // FOLEY_TRIALS_HPP_
