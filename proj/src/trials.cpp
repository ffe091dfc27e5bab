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


#include "foley/trials.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

namespace foley {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view trial_kind_name(TrialKind k) {
  switch (k) {
    case TrialKind::kReferent: return "referent";
    case TrialKind::kRating: return "rating";
    case TrialKind::kDiversity: return "diversity";
  }
  return "?";
}

std::optional<TrialKind> parse_trial_kind(std::string_view name) {
  if (name == "referent") return TrialKind::kReferent;
  if (name == "rating") return TrialKind::kRating;
  if (name == "diversity") return TrialKind::kDiversity;
  return std::nullopt;
}

std::size_t SessionPlan::count(TrialKind k) const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [k](const Trial& t) { return t.kind == k; }));
}

std::size_t SessionPlan::anchor_count() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const Trial& t) { return t.hidden.anchor.has_value(); }));
}

const Trial* SessionPlan::find(std::string_view trial_id) const {
  for (const auto& t : trials) {
    if (t.trial_id == trial_id) return &t;
  }
  return nullptr;
}

CategoryTemplate build_category_plan(Category category, std::span<const Finalist> finalists, const MedoidSet& medoids,
                                     std::span<const AnchorSpec> anchors, std::span<const std::string> referents,
                                     std::uint64_t seed, const PlanShape& shape) {
  const std::string cat(category_name(category));
  if (referents.size() != shape.referents) {
    throw Error(fmt::format("{}: expected {} referents, got {}", cat, shape.referents, referents.size()));
  }
  std::map<std::pair<Pole, Pole>, std::size_t> per_type;
  for (const auto& a : anchors) {
    if (!is_valid_anchor(a.poles)) throw Error(fmt::format("{}: anchor {} has an unused pole combination", cat, a.clip_id));
    ++per_type[{a.poles.quality, a.poles.fit}];
  }
  const std::size_t want = 3 * shape.anchors_per_type;
  if (anchors.size() != want || per_type.size() != 3 ||
      std::any_of(per_type.begin(), per_type.end(), [&](const auto& kv) { return kv.second != shape.anchors_per_type; })) {
    throw Error(fmt::format("{}: expected {} anchors ({} per type), got {}", cat, want, shape.anchors_per_type,
                            anchors.size()));
  }
  if (finalists.empty()) throw Error(fmt::format("{}: no finalists", cat));

  CategoryTemplate t;
  t.category = category;
  t.referents.assign(referents.begin(), referents.end());
  t.finalists.assign(finalists.begin(), finalists.end());
  std::sort(t.finalists.begin(), t.finalists.end(),
            [](const Finalist& a, const Finalist& b) { return a.system_id < b.system_id; });
  for (const auto& f : t.finalists) {
    auto it = medoids.entries.find({f.system_id, category});
    if (it == medoids.entries.end()) throw Error(fmt::format("{}: no medoids for finalist {}", cat, f.system_id));
    if (it->second.size() != shape.medoids_per_system) {
      throw Error(fmt::format("{}: finalist {} has {} medoids, expected {}", cat, f.system_id, it->second.size(),
                              shape.medoids_per_system));
    }
    std::vector<std::string> clips;
    for (const auto& m : it->second) clips.push_back(m.clip_id);
    t.blocks.push_back(std::move(clips));
  }
  t.anchors.assign(anchors.begin(), anchors.end());
  t.seed = seed;
  return t;
}

std::vector<std::vector<std::size_t>> balanced_latin_square(std::size_t m) {
  if (m == 0) throw Error("Latin square over zero symbols");
  std::vector<std::size_t> first(m);
  for (std::size_t j = 1; j < m; ++j) first[j] = (j % 2 == 1) ? (j + 1) / 2 : m - j / 2;
  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t r = 0; r < m; ++r) {
    std::vector<std::size_t> row(m);
    for (std::size_t j = 0; j < m; ++j) row[j] = (first[j] + r) % m;
    rows.push_back(std::move(row));
  }
  if (m % 2 == 1) {
    for (std::size_t r = 0; r < m; ++r) {
      rows.emplace_back(rows[r].rbegin(), rows[r].rend());
    }
  }
  return rows;
}

std::vector<std::size_t> block_order(const CategoryTemplate& tmpl, std::size_t instance, std::uint64_t seed) {
  const std::size_t m = tmpl.finalists.size();
  std::vector<std::size_t> perm(m);
  for (std::size_t i = 0; i < m; ++i) perm[i] = i;
  SeededRng rng(derive_seed(seed, fmt::format("{}/latin", category_name(tmpl.category))));
  rng.shuffle(perm);
  const auto square = balanced_latin_square(m);
  const auto& row = square[instance % square.size()];
  std::vector<std::size_t> order(m);
  for (std::size_t j = 0; j < m; ++j) order[j] = perm[row[j]];
  return order;
}

std::vector<SessionPlan> counterbalance(const CategoryTemplate& tmpl, std::size_t n_instances, std::uint64_t seed) {
  if (n_instances < 1) throw Error("counterbalance needs at least one instance");
  const std::string cat(category_name(tmpl.category));
  std::vector<SessionPlan> out;
  for (std::size_t i = 0; i < n_instances; ++i) {
    SeededRng rng(derive_seed(seed, fmt::format("{}/instance-{}", cat, i)));
    SeededRng tokens(derive_seed(seed, fmt::format("{}/instance-{}/tokens", cat, i)));

    std::vector<HiddenPayload> items;
    for (std::size_t b : block_order(tmpl, i, seed)) {
      std::vector<std::string> clips = tmpl.blocks[b];
      rng.shuffle(clips);
      const Finalist& f = tmpl.finalists[b];
      for (auto& c : clips) items.push_back({f.system_id, f.team_id, f.track, std::move(c), tmpl.category, std::nullopt});
    }
    std::vector<AnchorSpec> anchors = tmpl.anchors;
    rng.shuffle(anchors);
    const std::size_t total = items.size() + anchors.size();
    std::vector<std::size_t> slots(total);
    for (std::size_t s = 0; s < total; ++s) slots[s] = s;
    rng.shuffle(slots);
    std::vector<bool> is_anchor(total, false);
    for (std::size_t a = 0; a < anchors.size(); ++a) is_anchor[slots[a]] = true;

    SessionPlan plan;
    plan.category = cat;
    plan.instance = static_cast<int>(i);
    plan.seed = seed;
    auto push = [&](TrialKind kind, HiddenPayload hidden) {
      Trial t;
      t.position = plan.trials.size();
      t.trial_id = fmt::format("t{:03d}", t.position);
      t.kind = kind;
      t.clip_token = random_hex(tokens, 128);
      t.hidden = std::move(hidden);
      plan.trials.push_back(std::move(t));
    };
    for (const auto& r : tmpl.referents) push(TrialKind::kReferent, {"", "", std::nullopt, r, tmpl.category, std::nullopt});
    std::size_t next_item = 0, next_anchor = 0;
    for (std::size_t s = 0; s < total; ++s) {
      if (is_anchor[s]) {
        const AnchorSpec& a = anchors[next_anchor++];
        push(TrialKind::kRating, {"", "", std::nullopt, a.clip_id, tmpl.category, a.poles});
      } else {
        push(TrialKind::kRating, std::move(items[next_item++]));
      }
    }
    out.push_back(std::move(plan));
  }
  return out;
}

std::vector<RaterInfo> read_raters_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto ci = t.column("rater_id");
  std::optional<std::size_t> team, cap, role;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == "team_id") team = i;
    if (t.header[i] == "max_categories") cap = i;
    if (t.header[i] == "role") role = i;
  }
  std::vector<RaterInfo> out;
  for (const auto& row : t.rows) {
    RaterInfo r;
    r.rater_id = row.fields[ci];
    if (team) r.team_id = row.fields[*team];
    if (cap && !row.fields[*cap].empty()) r.max_categories = std::stoul(row.fields[*cap]);
    if (role && row.fields[*role] == "diversity") r.role = RaterRole::kDiversity;
    else if (role && !row.fields[*role].empty() && row.fields[*role] != "rating") {
      throw Error(fmt::format("{}:{}: unknown role '{}'", path.string(), row.line, row.fields[*role]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

AssignmentPlan assign_categories(std::span<const RaterInfo> raters, std::span<const Category> categories,
                                 const AssignmentOptions& options, std::uint64_t seed) {
  if (options.band_lo > options.band_hi) throw Error("rating band is empty");
  AssignmentPlan plan;
  plan.options = options;
  SeededRng rng(derive_seed(seed, "assignment"));
  std::vector<std::uint64_t> cat_prio(kNumCategories), rater_prio(raters.size());
  for (auto& p : cat_prio) p = rng.next();
  for (auto& p : rater_prio) p = rng.next();

  std::vector<std::size_t> rating;
  for (std::size_t r = 0; r < raters.size(); ++r) {
    if (raters[r].role != RaterRole::kRating) continue;
    if (raters[r].max_categories < options.min_categories) {
      throw Error(fmt::format("rater {} is available for {} categories, fewer than the required {}",
                              raters[r].rater_id, raters[r].max_categories, options.min_categories));
    }
    rating.push_back(r);
    plan.by_rater[raters[r].rater_id];
  }
  auto& cov = plan.coverage;
  auto has = [&](std::size_t r, Category c) {
    const auto& v = plan.by_rater[raters[r].rater_id];
    return std::find(v.begin(), v.end(), c) != v.end();
  };
  auto load = [&](std::size_t r) { return plan.by_rater[raters[r].rater_id].size(); };
  auto eligible = [&](std::size_t r, Category c) {
    return load(r) < raters[r].max_categories && !has(r, c) && cov[static_cast<std::size_t>(c)] < options.band_hi;
  };
  auto cat_less = [&](Category a, Category b) {
    const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
    return std::pair(cov[ia], cat_prio[ia]) < std::pair(cov[ib], cat_prio[ib]);
  };
  auto rater_less = [&](std::size_t a, std::size_t b) {
    return std::pair(load(a), rater_prio[a]) < std::pair(load(b), rater_prio[b]);
  };

  while (true) {
    std::optional<std::size_t> pick_r;
    std::optional<Category> pick_c;
    for (std::size_t r : rating) {
      if (load(r) >= std::min(options.min_categories, raters[r].max_categories)) continue;
      bool any = false;
      for (Category c : categories) any = any || eligible(r, c);
      if (any && (!pick_r || rater_less(r, *pick_r))) pick_r = r;
    }
    if (pick_r) {
      for (Category c : categories) {
        if (eligible(*pick_r, c) && (!pick_c || cat_less(c, *pick_c))) pick_c = c;
      }
    } else {
      for (Category c : categories) {
        if (cov[static_cast<std::size_t>(c)] >= options.band_lo) continue;
        bool any = false;
        for (std::size_t r : rating) any = any || eligible(r, c);
        if (any && (!pick_c || cat_less(c, *pick_c))) pick_c = c;
      }
      if (!pick_c) break;
      for (std::size_t r : rating) {
        if (eligible(r, *pick_c) && (!pick_r || rater_less(r, *pick_r))) pick_r = r;
      }
    }
    if (!pick_r || !pick_c) break;
    plan.by_rater[raters[*pick_r].rater_id].push_back(*pick_c);
    ++cov[static_cast<std::size_t>(*pick_c)];
  }
  for (Category c : categories) {
    if (cov[static_cast<std::size_t>(c)] < options.band_lo) plan.shortfall.push_back(c);
  }
  return plan;
}

const SessionPlan* ListeningPlan::find_session(std::string_view session_id) const {
  for (const auto& s : sessions) {
    if (s.session_id == session_id) return &s;
  }
  return nullptr;
}

const SessionPlan* ListeningPlan::find_session(std::string_view rater_id, std::string_view category) const {
  for (const auto& s : sessions) {
    if (s.rater_id == rater_id && s.category == category) return &s;
  }
  return nullptr;
}

namespace {

std::string diversity_clip_id(const std::string& system_id, Category c) {
  return fmt::format("diversity:{}/{}", system_id, category_name(c));
}

}  // namespace

ListeningPlan build_listening_plan(const PlanInputs& in, std::uint64_t seed, const fs::path& plan_dir,
                                   const Provenance& provenance) {
  ListeningPlan plan;
  plan.provenance = provenance;
  plan.seed = seed;
  plan.shape = in.shape;
  plan.finalists = in.finalists;
  std::sort(plan.finalists.begin(), plan.finalists.end(),
            [](const Finalist& a, const Finalist& b) { return a.system_id < b.system_id; });
  plan.raters = in.raters;

  std::vector<Category> categories;
  for (Category c : kCategories) {
    if (in.referents.count(c)) categories.push_back(c);
  }
  plan.assignment = assign_categories(in.raters, categories, in.assignment, seed);

  for (Category c : categories) {
    std::vector<AnchorSpec> anchors;
    for (const auto& a : in.anchors) {
      if (a.category == c) anchors.push_back(a);
    }
    const auto tmpl = build_category_plan(c, in.finalists, in.medoids, anchors, in.referents.at(c), seed, in.shape);
    std::vector<const RaterInfo*> assigned;
    for (const auto& r : in.raters) {
      const auto it = plan.assignment.by_rater.find(r.rater_id);
      if (it != plan.assignment.by_rater.end() && std::find(it->second.begin(), it->second.end(), c) != it->second.end()) {
        assigned.push_back(&r);
      }
    }
    if (assigned.empty()) continue;
    auto instances = counterbalance(tmpl, assigned.size(), seed);
    for (std::size_t i = 0; i < assigned.size(); ++i) {
      instances[i].rater_id = assigned[i]->rater_id;
      instances[i].team_id = assigned[i]->team_id;
      instances[i].session_id = fmt::format("{}-{}", assigned[i]->rater_id, category_name(c));
      plan.sessions.push_back(std::move(instances[i]));
    }
  }

  if (!in.diversity_files.empty()) {
    std::map<std::string, const Finalist*> by_id;
    for (const auto& f : plan.finalists) by_id[f.system_id] = &f;
    for (const auto& r : in.raters) {
      if (r.role != RaterRole::kDiversity) continue;
      SessionPlan s;
      s.session_id = fmt::format("{}-{}", r.rater_id, kDiversitySession);
      s.rater_id = r.rater_id;
      s.team_id = r.team_id;
      s.category = std::string(kDiversitySession);
      s.seed = seed;
      SeededRng rng(derive_seed(seed, "diversity/" + r.rater_id));
      SeededRng tokens(derive_seed(seed, "diversity/" + r.rater_id + "/tokens"));
      std::vector<GroupKey> keys;
      for (const auto& [key, path] : in.diversity_files) {
        if (by_id.count(key.first)) keys.push_back(key);
      }
      rng.shuffle(keys);
      for (const auto& key : keys) {
        const Finalist& f = *by_id[key.first];
        Trial t;
        t.position = s.trials.size();
        t.trial_id = fmt::format("t{:03d}", t.position);
        t.kind = TrialKind::kDiversity;
        t.clip_token = random_hex(tokens, 128);
        t.hidden = {f.system_id, f.team_id, f.track, diversity_clip_id(f.system_id, key.second), key.second, std::nullopt};
        s.trials.push_back(std::move(t));
      }
      plan.sessions.push_back(std::move(s));
    }
  }

  std::set<std::string> seen;
  const fs::path base = fs::absolute(plan_dir);
  std::unordered_map<std::string, std::string> relative;  // clips recur across sessions
  for (const auto& s : plan.sessions) {
    for (const auto& t : s.trials) {
      if (!seen.insert(t.clip_token).second) throw Error("audio token collision; choose another seed");
      fs::path src;
      if (t.kind == TrialKind::kDiversity) {
        src = in.diversity_files.at({t.hidden.system_id, t.hidden.category});
      } else {
        auto it = in.clip_paths.find(t.hidden.clip_id);
        if (it == in.clip_paths.end()) throw Error(fmt::format("no audio path for clip '{}'", t.hidden.clip_id));
        src = it->second;
      }
      auto [rel, fresh] = relative.try_emplace(src.native());
      if (fresh) rel->second = fs::absolute(src).lexically_relative(base).generic_string();
      plan.audio[t.clip_token] = rel->second;
    }
  }
  return plan;
}

namespace {

json hidden_to_json(const HiddenPayload& h) {
  json j;
  j["system_id"] = h.system_id;
  j["team_id"] = h.team_id;
  j["track"] = h.track ? json(std::string(track_name(*h.track))) : json(nullptr);
  j["clip_id"] = h.clip_id;
  j["category"] = std::string(category_name(h.category));
  j["anchor_quality"] = h.anchor ? json(std::string(pole_name(h.anchor->quality))) : json(nullptr);
  j["anchor_fit"] = h.anchor ? json(std::string(pole_name(h.anchor->fit))) : json(nullptr);
  return j;
}

HiddenPayload hidden_from_json(const json& j) {
  HiddenPayload h;
  h.system_id = j.at("system_id").get<std::string>();
  h.team_id = j.at("team_id").get<std::string>();
  if (!j.at("track").is_null()) h.track = parse_track(j["track"].get<std::string>());
  h.clip_id = j.at("clip_id").get<std::string>();
  h.category = category_from_string(j.at("category").get<std::string>());
  if (!j.at("anchor_quality").is_null()) {
    h.anchor = AnchorPoles{*parse_pole(j["anchor_quality"].get<std::string>()),
                           *parse_pole(j["anchor_fit"].get<std::string>())};
  }
  return h;
}

}  // namespace

json plan_to_json(const ListeningPlan& plan, bool sealed) {
  json j;
  j["provenance"] = {{"config_hash", plan.provenance.config_hash},
                     {"seed", plan.provenance.seed},
                     {"tool_version", plan.provenance.tool_version}};
  j["sealed"] = sealed;
  json sessions = json::array();
  for (const auto& s : plan.sessions) {
    json js;
    js["session_id"] = s.session_id;
    js["rater_id"] = s.rater_id;
    js["category"] = s.category;
    json trials = json::array();
    for (const auto& t : s.trials) {
      json jt;
      jt["trial_id"] = t.trial_id;
      jt["kind"] = std::string(trial_kind_name(t.kind));
      jt["clip_token"] = t.clip_token;
      jt["position"] = t.position;
      if (sealed) jt["hidden"] = hidden_to_json(t.hidden);
      trials.push_back(std::move(jt));
    }
    js["trials"] = std::move(trials);
    if (sealed) {
      js["team_id"] = s.team_id;
      js["instance"] = s.instance;
      js["seed"] = s.seed;
    }
    sessions.push_back(std::move(js));
  }
  j["sessions"] = std::move(sessions);
  if (!sealed) return j;

  j["seed"] = plan.seed;
  j["shape"] = {{"referents", plan.shape.referents},
                {"anchors_per_type", plan.shape.anchors_per_type},
                {"medoids_per_system", plan.shape.medoids_per_system}};
  json finalists = json::array();
  for (const auto& f : plan.finalists) {
    finalists.push_back({{"system_id", f.system_id}, {"track", std::string(track_name(f.track))}, {"team_id", f.team_id}});
  }
  j["finalists"] = std::move(finalists);
  json raters = json::array();
  for (const auto& r : plan.raters) {
    json jr = {{"rater_id", r.rater_id},
               {"team_id", r.team_id},
               {"max_categories", r.max_categories},
               {"role", r.role == RaterRole::kRating ? "rating" : "diversity"}};
    json cats = json::array();
    if (auto it = plan.assignment.by_rater.find(r.rater_id); it != plan.assignment.by_rater.end()) {
      for (Category c : it->second) cats.push_back(std::string(category_name(c)));
    }
    jr["categories"] = std::move(cats);
    raters.push_back(std::move(jr));
  }
  j["raters"] = std::move(raters);
  json coverage = json::object();
  for (Category c : kCategories) coverage[std::string(category_name(c))] = plan.assignment.coverage[static_cast<std::size_t>(c)];
  json shortfall = json::array();
  for (Category c : plan.assignment.shortfall) shortfall.push_back(std::string(category_name(c)));
  j["assignment"] = {{"coverage", coverage},
                     {"shortfall", shortfall},
                     {"band", {plan.assignment.options.band_lo, plan.assignment.options.band_hi}},
                     {"min_categories", plan.assignment.options.min_categories}};
  j["audio"] = plan.audio;
  return j;
}

ListeningPlan plan_from_json(const json& j) {
  if (!j.value("sealed", false)) throw Error("plan file is not sealed (hidden payloads stripped)");
  ListeningPlan plan;
  try {
    const auto& p = j.at("provenance");
    plan.provenance.config_hash = p.at("config_hash").get<std::string>();
    plan.provenance.seed = p.at("seed").get<std::uint64_t>();
    plan.provenance.tool_version = p.at("tool_version").get<std::string>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.shape.referents = j.at("shape").at("referents").get<std::size_t>();
    plan.shape.anchors_per_type = j.at("shape").at("anchors_per_type").get<std::size_t>();
    plan.shape.medoids_per_system = j.at("shape").at("medoids_per_system").get<std::size_t>();
    for (const auto& f : j.at("finalists")) {
      plan.finalists.push_back({f.at("system_id").get<std::string>(), *parse_track(f.at("track").get<std::string>()),
                                f.at("team_id").get<std::string>()});
    }
    for (const auto& r : j.at("raters")) {
      RaterInfo info{r.at("rater_id").get<std::string>(), r.at("team_id").get<std::string>(),
                     r.at("max_categories").get<std::size_t>(),
                     r.at("role").get<std::string>() == "diversity" ? RaterRole::kDiversity : RaterRole::kRating};
      auto& cats = plan.assignment.by_rater[info.rater_id];
      for (const auto& c : r.at("categories")) cats.push_back(category_from_string(c.get<std::string>()));
      if (info.role == RaterRole::kDiversity && cats.empty()) plan.assignment.by_rater.erase(info.rater_id);
      plan.raters.push_back(std::move(info));
    }
    const auto& a = j.at("assignment");
    for (Category c : kCategories) {
      plan.assignment.coverage[static_cast<std::size_t>(c)] = a.at("coverage").at(std::string(category_name(c))).get<std::size_t>();
    }
    for (const auto& c : a.at("shortfall")) plan.assignment.shortfall.push_back(category_from_string(c.get<std::string>()));
    plan.assignment.options.band_lo = a.at("band").at(0).get<std::size_t>();
    plan.assignment.options.band_hi = a.at("band").at(1).get<std::size_t>();
    plan.assignment.options.min_categories = a.at("min_categories").get<std::size_t>();
    for (const auto& js : j.at("sessions")) {
      SessionPlan s;
      s.session_id = js.at("session_id").get<std::string>();
      s.rater_id = js.at("rater_id").get<std::string>();
      s.team_id = js.at("team_id").get<std::string>();
      s.category = js.at("category").get<std::string>();
      s.instance = js.at("instance").get<int>();
      s.seed = js.at("seed").get<std::uint64_t>();
      for (const auto& jt : js.at("trials")) {
        Trial t;
        t.trial_id = jt.at("trial_id").get<std::string>();
        auto kind = parse_trial_kind(jt.at("kind").get<std::string>());
        if (!kind) throw Error("unknown trial kind");
        t.kind = *kind;
        t.clip_token = jt.at("clip_token").get<std::string>();
        t.position = jt.at("position").get<std::size_t>();
        t.hidden = hidden_from_json(jt.at("hidden"));
        s.trials.push_back(std::move(t));
      }
      plan.sessions.push_back(std::move(s));
    }
    plan.audio = j.at("audio").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(fmt::format("malformed plan: {}", e.what()));
  }
  return plan;
}

void write_plan(const ListeningPlan& plan, const fs::path& dir) {
  fs::create_directories(dir);
  write_file_atomic(dir / "sealed_plan.json", plan_to_json(plan, true).dump(1) + "\n");
  write_file_atomic(dir / "rater_plan.json", plan_to_json(plan, false).dump(1) + "\n");
}

ListeningPlan read_plan(const fs::path& sealed_path) {
  try {
    return plan_from_json(json::parse(read_file(sealed_path)));
  } catch (const json::exception& e) {
    throw Error(fmt::format("{}: {}", sealed_path.string(), e.what()));
  }
}

std::vector<Finalist> read_finalists_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto ci = t.column("system_id"), ct = t.column("track"), cm = t.column("team_id");
  std::vector<Finalist> out;
  for (const auto& row : t.rows) {
    auto track = parse_track(row.fields[ct]);
    if (!track) throw Error(fmt::format("{}:{}: bad track", path.string(), row.line));
    out.push_back({row.fields[ci], *track, row.fields[cm]});
  }
  return out;
}

std::vector<AnchorSpec> read_anchors_csv(const fs::path& path, std::map<std::string, fs::path>* paths) {
  const CsvTable t = read_csv(path);
  const auto cc = t.column("category"), ci = t.column("clip_id"), cq = t.column("quality_pole"),
             cf = t.column("fit_pole");
  std::optional<std::size_t> cp;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == "path") cp = i;
  }
  std::vector<AnchorSpec> out;
  for (const auto& row : t.rows) {
    auto q = parse_pole(row.fields[cq]);
    auto f = parse_pole(row.fields[cf]);
    if (!q || !f) throw Error(fmt::format("{}:{}: bad anchor poles", path.string(), row.line));
    AnchorSpec a{row.fields[ci], {*q, *f}, category_from_string(row.fields[cc])};
    if (!is_valid_anchor(a.poles)) throw Error(fmt::format("{}:{}: unused anchor type", path.string(), row.line));
    if (paths && cp) {
      const fs::path p(row.fields[*cp]);
      (*paths)[a.clip_id] = p.is_absolute() ? p : path.parent_path() / p;
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::map<Category, std::vector<std::string>> read_referents_csv(const fs::path& path,
                                                                std::map<std::string, fs::path>* paths) {
  const CsvTable t = read_csv(path);
  const auto cc = t.column("category"), ci = t.column("clip_id");
  std::optional<std::size_t> cp;
  for (std::size_t i = 0; i < t.header.size(); ++i) {
    if (t.header[i] == "path") cp = i;
  }
  std::map<Category, std::vector<std::string>> out;
  for (const auto& row : t.rows) {
    out[category_from_string(row.fields[cc])].push_back(row.fields[ci]);
    if (paths && cp) {
      const fs::path p(row.fields[*cp]);
      (*paths)[row.fields[ci]] = p.is_absolute() ? p : path.parent_path() / p;
    }
  }
  return out;
}

}  // namespace foley
