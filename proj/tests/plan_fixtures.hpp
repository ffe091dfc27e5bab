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


#ifndef FOLEY_TESTS_PLAN_FIXTURES_HPP_
#define FOLEY_TESTS_PLAN_FIXTURES_HPP_

#include <fmt/format.h>

#include <functional>

#include "foley/ratings.hpp"
#include "foley/trials.hpp"

namespace foley::testing {

// Plan inputs with `n_finalists` systems (tracks alternate A/B), 20 medoids
// each, 6 referents and 12 anchors per category. Audio paths are fictitious.
inline PlanInputs synthetic_inputs(std::size_t n_finalists, std::size_t n_raters, std::size_t n_diversity = 0) {
  PlanInputs in;
  for (std::size_t f = 0; f < n_finalists; ++f) {
    in.finalists.push_back({fmt::format("sys{:02d}", f), f % 2 ? Track::kB : Track::kA, fmt::format("team{}", f)});
  }
  for (Category c : kCategories) {
    const std::string cat(category_name(c));
    for (const auto& f : in.finalists) {
      auto& v = in.medoids.entries[{f.system_id, c}];
      for (int i = 0; i < 20; ++i) {
        const std::string id = fmt::format("{}/{}/{:02d}", f.system_id, cat, i);
        v.push_back({i, id, 0.0});
        in.clip_paths[id] = "/audio/" + id + ".wav";
      }
      in.diversity_files[{f.system_id, c}] = fmt::format("/audio/div/{}_{}.wav", f.system_id, cat);
    }
    for (int r = 0; r < 6; ++r) {
      const std::string id = fmt::format("ref-{}-{}", cat, r);
      in.referents[c].push_back(id);
      in.clip_paths[id] = "/audio/" + id + ".wav";
    }
    const AnchorPoles types[] = {{Pole::kHigh, Pole::kLow}, {Pole::kHigh, Pole::kHigh}, {Pole::kLow, Pole::kLow}};
    for (const auto& p : types) {
      for (int j = 0; j < 4; ++j) {
        const std::string id = fmt::format("anchor-{}-{}{}-{}", cat, pole_name(p.quality), pole_name(p.fit), j);
        in.anchors.push_back({id, p, c});
        in.clip_paths[id] = "/audio/" + id + ".wav";
      }
    }
  }
  for (std::size_t r = 0; r < n_raters; ++r) in.raters.push_back({fmt::format("r{:03d}", r), "", kNumCategories, RaterRole::kRating});
  for (std::size_t r = 0; r < n_diversity; ++r) in.raters.push_back({fmt::format("d{:02d}", r), "", kNumCategories, RaterRole::kDiversity});
  if (n_diversity == 0) in.diversity_files.clear();
  return in;
}


struct Scores {
  int quality = 0;
  int fit = 0;
};

// One record per rating trial of `s`; `score` sees the trial's hidden payload.
inline std::vector<RatingRecord> rate_session(const SessionPlan& s, const std::function<Scores(const Trial&)>& score) {
  std::vector<RatingRecord> out;
  for (const auto& t : s.trials) {
    if (t.kind == TrialKind::kReferent) continue;
    RatingRecord r;
    r.session_id = s.session_id;
    r.rater_id = s.rater_id;
    r.team_id = s.team_id;
    r.category = s.category;
    r.trial_id = t.trial_id;
    r.clip_token = t.clip_token;
    const Scores sc = score(t);
    if (t.kind == TrialKind::kDiversity) {
      r.diversity = sc.quality;
    } else {
      r.quality = sc.quality;
      r.fit = sc.fit;
    }
    r.timestamp = "2026-01-01T00:00:00Z";
    out.push_back(std::move(r));
  }
  return out;
}

// Anchors rated at their poles (8 high, 2 low).
inline Scores faithful_anchor(const AnchorPoles& p) {
  return {p.quality == Pole::kHigh ? 8 : 2, p.fit == Pole::kHigh ? 8 : 2};
}

}  // namespace foley::testing

#endif  // FOLEY_TESTS_PLAN_FIXTURES_HPP_
