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

#include <map>
#include <set>

#include "foley/trials.hpp"
#include "plan_fixtures.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

namespace fs = std::filesystem;
using testing::synthetic_inputs;

TEST(Plan, SessionCountsPerCategory) {
  const PlanInputs in = synthetic_inputs(8, 30);
  const ListeningPlan plan = build_listening_plan(in, 17, "/plans", {});
  for (const auto& s : plan.sessions) {
    EXPECT_EQ(s.count(TrialKind::kReferent), 6u);
    EXPECT_EQ(s.count(TrialKind::kRating), 8u * 20 + 12);
    EXPECT_EQ(s.anchor_count(), 12u);
    // Referents come first, positions are contiguous.
    for (std::size_t i = 0; i < s.trials.size(); ++i) {
      EXPECT_EQ(s.trials[i].position, i);
      EXPECT_EQ(s.trials[i].kind == TrialKind::kReferent, i < 6);
    }
    std::map<std::string, std::size_t> per_system;
    std::set<std::string> clips;
    for (const auto& t : s.trials) {
      if (!t.hidden.system_id.empty()) ++per_system[t.hidden.system_id];
      EXPECT_TRUE(clips.insert(t.hidden.clip_id).second);
    }
    EXPECT_EQ(per_system.size(), 8u);
    for (const auto& [id, n] : per_system) EXPECT_EQ(n, 20u);
  }
}

TEST(Plan, DeterministicForSeed) {
  const PlanInputs in = synthetic_inputs(5, 25, 2);
  const auto a = plan_to_json(build_listening_plan(in, 3, "/plans", {}), true);
  const auto b = plan_to_json(build_listening_plan(in, 3, "/plans", {}), true);
  const auto c = plan_to_json(build_listening_plan(in, 4, "/plans", {}), true);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_NE(a.dump(), c.dump());
}

TEST(Plan, TokensAreOpaqueAndUnique) {
  const ListeningPlan plan = build_listening_plan(synthetic_inputs(4, 20, 1), 9, "/plans", {});
  std::set<std::string> tokens;
  for (const auto& s : plan.sessions) {
    for (const auto& t : s.trials) {
      EXPECT_EQ(t.clip_token.size(), 32u);
      EXPECT_EQ(t.clip_token.find("sys"), std::string::npos);
      EXPECT_TRUE(tokens.insert(t.clip_token).second);
    }
  }
  EXPECT_EQ(plan.audio.size(), tokens.size());
  EXPECT_EQ(plan.audio.begin()->second.rfind("../audio/", 0), 0u);
}

TEST(LatinSquare, EvenIsRowColumnAndCarryoverBalanced) {
  for (std::size_t m : {2, 4, 6, 8}) {
    const auto sq = balanced_latin_square(m);
    ASSERT_EQ(sq.size(), m);
    std::map<std::pair<std::size_t, std::size_t>, int> adj;
    for (std::size_t col = 0; col < m; ++col) {
      std::set<std::size_t> seen;
      for (const auto& row : sq) seen.insert(row[col]);
      EXPECT_EQ(seen.size(), m);
    }
    for (const auto& row : sq) {
      EXPECT_EQ(std::set<std::size_t>(row.begin(), row.end()).size(), m);
      for (std::size_t j = 0; j + 1 < m; ++j) ++adj[{row[j], row[j + 1]}];
    }
    EXPECT_EQ(adj.size(), m * (m - 1));
    for (const auto& [p, n] : adj) EXPECT_EQ(n, 1);
  }
}

TEST(LatinSquare, OddUsesTwoSquares) {
  for (std::size_t m : {3, 5, 7}) {
    const auto sq = balanced_latin_square(m);
    ASSERT_EQ(sq.size(), 2 * m);
    std::map<std::pair<std::size_t, std::size_t>, int> adj;
    for (std::size_t col = 0; col < m; ++col) {
      std::map<std::size_t, int> count;
      for (const auto& row : sq) ++count[row[col]];
      for (const auto& [sym, n] : count) EXPECT_EQ(n, 2);
    }
    for (const auto& row : sq)
      for (std::size_t j = 0; j + 1 < m; ++j) ++adj[{row[j], row[j + 1]}];
    for (const auto& [p, n] : adj) EXPECT_EQ(n, 2);
  }
}

std::vector<AnchorSpec> anchors_of(const PlanInputs& in, Category c) {
  std::vector<AnchorSpec> out;
  for (const auto& a : in.anchors)
    if (a.category == c) out.push_back(a);
  return out;
}

TEST(Counterbalance, BlocksStayContiguousAndPositionsBalance) {
  const PlanInputs in = synthetic_inputs(4, 8);
  const auto tmpl = build_category_plan(Category::kRain, in.finalists, in.medoids, anchors_of(in, Category::kRain),
                                        in.referents.at(Category::kRain), 5);
  const auto sessions = counterbalance(tmpl, 8, 5);
  ASSERT_EQ(sessions.size(), 8u);
  std::map<std::pair<std::string, std::size_t>, int> block_position;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    std::vector<std::string> order;
    for (const auto& t : sessions[i].trials) {
      if (t.hidden.system_id.empty()) continue;
      if (order.empty() || order.back() != t.hidden.system_id) order.push_back(t.hidden.system_id);
    }
    ASSERT_EQ(order.size(), 4u) << "blocks interleaved in instance " << i;
    const auto expected = block_order(tmpl, i, 5);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(order[j], tmpl.finalists[expected[j]].system_id);
      ++block_position[{order[j], j}];
    }
  }
  // Eight instances cover the 4-row square twice.
  for (const auto& [k, n] : block_position) EXPECT_EQ(n, 2);
  EXPECT_NE(sessions[0].trials[10].clip_token, sessions[4].trials[10].clip_token);
}

TEST(Counterbalance, TemplateValidation) {
  PlanInputs in = synthetic_inputs(2, 4);
  auto anchors = anchors_of(in, Category::kRain);
  const auto& refs = in.referents.at(Category::kRain);
  EXPECT_NO_THROW(build_category_plan(Category::kRain, in.finalists, in.medoids, anchors, refs, 1));
  const std::vector<std::string> five(refs.begin(), refs.begin() + 5);
  EXPECT_THROW(build_category_plan(Category::kRain, in.finalists, in.medoids, anchors, five, 1), Error);
  auto fewer = anchors;
  fewer.pop_back();
  EXPECT_THROW(build_category_plan(Category::kRain, in.finalists, in.medoids, fewer, refs, 1), Error);
  in.medoids.entries[{"sys00", Category::kRain}].pop_back();
  EXPECT_THROW(build_category_plan(Category::kRain, in.finalists, in.medoids, anchors, refs, 1), Error);
  EXPECT_THROW(build_category_plan(Category::kRain, {}, in.medoids, anchors, refs, 1), Error);
}

TEST(Assignment, CoverageInBandAndMinimumPerRater) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeededRng rng(seed);
    std::vector<RaterInfo> raters;
    // Feasible pools: 7 x 10 <= 4n <= 7 x 15.
    const std::size_t n = 18 + rng.below(9);
    for (std::size_t r = 0; r < n; ++r) raters.push_back({fmt::format("r{}", r), "", 4 + rng.below(4), RaterRole::kRating});
    const std::vector<Category> cats(kCategories.begin(), kCategories.end());
    const AssignmentPlan plan = assign_categories(raters, cats, {}, seed);
    std::array<std::size_t, kNumCategories> cov{};
    for (const auto& r : raters) {
      const auto& v = plan.by_rater.at(r.rater_id);
      EXPECT_GE(v.size(), 4u);
      EXPECT_LE(v.size(), r.max_categories);
      EXPECT_EQ(std::set<Category>(v.begin(), v.end()).size(), v.size());
      for (Category c : v) ++cov[static_cast<std::size_t>(c)];
    }
    EXPECT_EQ(cov, plan.coverage);
    for (std::size_t c = 0; c < kNumCategories; ++c) {
      EXPECT_GE(cov[c], 10u) << seed;
      EXPECT_LE(cov[c], 15u) << seed;
    }
    EXPECT_TRUE(plan.shortfall.empty());
  }
}

TEST(Assignment, ShortfallWhenPoolTooSmall) {
  std::vector<RaterInfo> raters;
  for (int r = 0; r < 5; ++r) raters.push_back({fmt::format("r{}", r), "", 7, RaterRole::kRating});
  const std::vector<Category> cats(kCategories.begin(), kCategories.end());
  const AssignmentPlan plan = assign_categories(raters, cats, {}, 1);
  EXPECT_EQ(plan.shortfall.size(), kNumCategories);
  for (std::size_t c : plan.coverage) EXPECT_EQ(c, 5u);
}

TEST(Assignment, RejectsLowAvailabilityAndEmptyBand) {
  const std::vector<Category> cats(kCategories.begin(), kCategories.end());
  const std::vector<RaterInfo> raters = {{"r", "", 3, RaterRole::kRating}};
  EXPECT_THROW(assign_categories(raters, cats, {}, 1), Error);
  EXPECT_THROW(assign_categories({}, cats, {.band_lo = 5, .band_hi = 4}, 1), Error);
  const std::vector<RaterInfo> div = {{"d", "", 1, RaterRole::kDiversity}};
  EXPECT_NO_THROW(assign_categories(div, cats, {}, 1));
}

TEST(PlanJson, RaterPlanCarriesNoHiddenFields) {
  const ListeningPlan plan = build_listening_plan(synthetic_inputs(3, 12, 1), 21, "/plans", Provenance{"cfg", 21});
  const auto rater = plan_to_json(plan, false);
  const std::string text = rater.dump();
  for (const char* forbidden : {"hidden", "sys0", "team", "anchor", "ref-", "\"audio\"", "finalists"}) {
    EXPECT_EQ(text.find(forbidden), std::string::npos) << forbidden;
  }
  EXPECT_FALSE(rater["sealed"].get<bool>());
  EXPECT_THROW(plan_from_json(rater), Error);
}

TEST(PlanJson, SealedRoundTrip) {
  testing::TempDir dir;
  const ListeningPlan plan = build_listening_plan(synthetic_inputs(3, 12, 2), 22, dir.path(), Provenance{"cfg", 22});
  write_plan(plan, dir.path());
  EXPECT_TRUE(fs::exists(dir / "rater_plan.json"));
  const ListeningPlan back = read_plan(dir / "sealed_plan.json");
  EXPECT_EQ(plan_to_json(back, true).dump(), plan_to_json(plan, true).dump());
  const SessionPlan* s = back.find_session("d00-diversity");
  ASSERT_NE(s, nullptr);
  EXPECT_EQ(s->count(TrialKind::kDiversity), 3u * kNumCategories);
  EXPECT_EQ(back.find_session("nope"), nullptr);
}

TEST(RatersCsv, ParsesOptionalColumns) {
  testing::TempDir dir;
  write_file_atomic(dir / "r.csv", "rater_id,team_id,max_categories,role\na,t1,5,rating\nb,,,diversity\nc,,,\n");
  const auto r = read_raters_csv(dir / "r.csv");
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].max_categories, 5u);
  EXPECT_EQ(r[1].role, RaterRole::kDiversity);
  EXPECT_EQ(r[2].max_categories, kNumCategories);
  write_file_atomic(dir / "bad.csv", "rater_id,role\na,judge\n");
  EXPECT_THROW(read_raters_csv(dir / "bad.csv"), Error);
}

}  // namespace
}  // namespace foley
