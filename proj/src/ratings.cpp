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


#include "foley/ratings.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace foley {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json provenance_json(const Provenance& p) {
  return {{"config_hash", p.config_hash}, {"seed", p.seed}, {"tool_version", p.tool_version}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string required_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) throw Error(fmt::format("field '{}' missing or not a string", key));
  return it->get<std::string>();
}

std::optional<int> optional_scale(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw Error(fmt::format("field '{}' is not an integer", key));
  const auto v = it->get<std::int64_t>();
  if (v < kScaleMin || v > kScaleMax) {
    throw Error(fmt::format("field '{}' = {} outside {}..{}", key, v, kScaleMin, kScaleMax));
  }
  return static_cast<int>(v);
}

using TrialIndex = std::map<std::pair<std::string, std::string>, std::pair<const SessionPlan*, const Trial*>>;

TrialIndex index_trials(const ListeningPlan& plan) {
  TrialIndex idx;
  for (const auto& s : plan.sessions) {
    for (const auto& t : s.trials) idx[{s.session_id, t.trial_id}] = {&s, &t};
  }
  return idx;
}

std::pair<const SessionPlan*, const Trial*> resolve(const TrialIndex& idx, const RatingRecord& r) {
  auto it = idx.find({r.session_id, r.trial_id});
  if (it == idx.end()) throw Error(fmt::format("unresolvable trial {}/{}", r.session_id, r.trial_id));
  return it->second;
}

// Rated categories: those with a category session in the plan.
std::vector<Category> rated_categories(const ListeningPlan& plan) {
  std::set<Category> cats;
  for (const auto& s : plan.sessions) {
    if (s.category != kDiversitySession) cats.insert(category_from_string(s.category));
  }
  return {cats.begin(), cats.end()};
}

ScaleMean mean_scale(const std::vector<double>& values) {
  if (values.empty()) return {};
  return {mean_of(values), values.size()};
}

Correlation safe_correlation(const std::vector<double>& x, const std::vector<double>& y, bool ranks) {
  Correlation c;
  c.n = x.size();
  try {
    c.value = ranks ? spearman(x, y).coefficient : pearson(x, y).coefficient;
  } catch (const Error& e) {
    c.note = e.what();
  }
  return c;
}

Correlation mean_correlation(const std::map<std::string, Correlation>& parts) {
  std::vector<double> values;
  for (const auto& [k, c] : parts) {
    if (c.value) values.push_back(*c.value);
  }
  Correlation out;
  out.n = values.size();
  if (values.empty()) {
    out.note = "no category had a defined correlation";
  } else {
    out.value = mean_of(values);
  }
  return out;
}

json correlation_to_json(const Correlation& c) {
  json j = {{"value", optional_number(c.value)}, {"n", c.n}};
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1));
}

}  // namespace

json record_to_json(const RatingRecord& r) {
  json j;
  j["session_id"] = r.session_id;
  j["rater_id"] = r.rater_id;
  j["team_id"] = r.team_id;
  j["category"] = r.category;
  j["trial_id"] = r.trial_id;
  j["clip_token"] = r.clip_token;
  if (r.quality) j["quality"] = *r.quality;
  if (r.fit) j["fit"] = *r.fit;
  if (r.diversity) j["diversity"] = *r.diversity;
  j["listen_count"] = r.listen_count;
  j["timestamp"] = r.timestamp;
  if (r.system_id) j["system_id"] = *r.system_id;
  if (r.anchor) {
    j["anchor_quality"] = std::string(pole_name(r.anchor->quality));
    j["anchor_fit"] = std::string(pole_name(r.anchor->fit));
  }
  return j;
}

RatingRecord record_from_json(const json& j) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  RatingRecord r;
  r.session_id = required_string(j, "session_id");
  r.rater_id = required_string(j, "rater_id");
  if (j.contains("team_id") && !j["team_id"].is_null()) r.team_id = required_string(j, "team_id");
  r.category = required_string(j, "category");
  r.trial_id = required_string(j, "trial_id");
  r.clip_token = required_string(j, "clip_token");
  r.quality = optional_scale(j, "quality");
  r.fit = optional_scale(j, "fit");
  r.diversity = optional_scale(j, "diversity");
  const bool qf = r.quality && r.fit && !r.diversity;
  const bool d = r.diversity && !r.quality && !r.fit;
  if (!qf && !d) throw Error("record must carry either quality and fit, or diversity alone");
  if (j.contains("listen_count")) {
    if (!j["listen_count"].is_number_integer() || j["listen_count"].get<std::int64_t>() < 1) {
      throw Error("listen_count must be an integer >= 1");
    }
    r.listen_count = j["listen_count"].get<int>();
  }
  if (j.contains("timestamp")) r.timestamp = required_string(j, "timestamp");
  if (j.contains("system_id")) r.system_id = required_string(j, "system_id");
  if (j.contains("anchor_quality")) {
    auto q = parse_pole(required_string(j, "anchor_quality"));
    auto f = parse_pole(required_string(j, "anchor_fit"));
    if (!q || !f) throw Error("bad anchor pole");
    r.anchor = AnchorPoles{*q, *f};
  }
  return r;
}

bool is_referent_ack(const json& j) { return j.is_object() && j.value("kind", "") == "referent"; }

IngestResult ingest_ratings_text(std::string_view text, const ListeningPlan* plan, std::string_view source) {
  IngestResult out;
  std::optional<TrialIndex> idx;
  if (plan) idx = index_trials(*plan);
  std::set<std::pair<std::string, std::string>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    RatingRecord r;
    try {
      const json j = json::parse(line);
      if (is_referent_ack(j)) {
        ++out.referent_acks;
        continue;
      }
      r = record_from_json(j);
      if (idx) {
        auto it = idx->find({r.session_id, r.trial_id});
        if (it == idx->end()) throw Error(fmt::format("unknown trial {}/{}", r.session_id, r.trial_id));
        const SessionPlan& s = *it->second.first;
        const Trial& t = *it->second.second;
        if (r.rater_id != s.rater_id) throw Error(fmt::format("rater '{}' does not own session {}", r.rater_id, s.session_id));
        if (r.clip_token != t.clip_token) throw Error(fmt::format("clip token does not match trial {}", t.trial_id));
        if (t.kind == TrialKind::kReferent) throw Error(fmt::format("trial {} is a referent and takes no rating", t.trial_id));
        if ((t.kind == TrialKind::kDiversity) != r.diversity.has_value()) {
          throw Error(fmt::format("scales do not match the {} trial {}", trial_kind_name(t.kind), t.trial_id));
        }
      }
    } catch (const json::exception& e) {
      throw Error(fmt::format("{}:{}: malformed record: {}", source, line_no, e.what()));
    } catch (const Error& e) {
      throw Error(fmt::format("{}:{}: {}", source, line_no, e.what()));
    }
    if (!seen.insert({r.session_id, r.trial_id}).second) {
      out.duplicates.push_back({line_no, r.session_id, r.trial_id});
      continue;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

IngestResult ingest_ratings(const fs::path& path, const ListeningPlan* plan) {
  return ingest_ratings_text(read_file(path), plan, path.string());
}

void write_records_jsonl(const std::vector<RatingRecord>& records, const fs::path& path) {
  std::string out;
  for (const auto& r : records) out += record_to_json(r).dump() + "\n";
  write_file_atomic(path, out);
}

bool pole_satisfied(Pole pole, int rating) { return pole == Pole::kHigh ? rating >= 6 : rating <= 4; }

std::vector<std::string> ExclusionReport::excluded_sessions() const {
  std::vector<std::string> out;
  for (const auto& s : sessions) {
    if (s.excluded) out.push_back(s.session_id);
  }
  return out;
}

ExclusionResult apply_exclusions(const std::vector<RatingRecord>& records, const ListeningPlan& plan,
                                 const std::map<std::string, std::string>& teams, const ExclusionOptions& options) {
  const TrialIndex idx = index_trials(plan);
  ExclusionResult out;
  out.report.options = options;
  std::map<std::string, SessionExclusion> sessions;
  for (const auto& r : records) {
    const auto [s, t] = resolve(idx, r);
    SessionExclusion& se = sessions[r.session_id];
    se.session_id = r.session_id;
    se.rater_id = s->rater_id;
    if (!t->hidden.anchor) continue;
    if (!r.quality || !r.fit) throw Error(fmt::format("anchor trial {}/{} lacks quality or fit", r.session_id, r.trial_id));
    const AnchorPoles p = *t->hidden.anchor;
    AnchorJudgement a;
    a.trial_id = r.trial_id;
    a.poles = p;
    a.quality = *r.quality;
    a.fit = *r.fit;
    a.misrated = !pole_satisfied(p.quality, a.quality) || !pole_satisfied(p.fit, a.fit);
    a.counted = options.strict || p.quality == Pole::kHigh;
    a.scale_confusion = p.quality == Pole::kHigh && p.fit == Pole::kLow && a.quality <= 4 && a.fit >= 6;
    se.counted_anchors += a.counted ? 1 : 0;
    se.misrated += (a.counted && a.misrated) ? 1 : 0;
    se.scale_confusions += a.scale_confusion ? 1 : 0;
    se.anchors.push_back(a);
  }
  for (auto& [id, se] : sessions) {
    se.excluded = se.misrated >= options.threshold;
    out.report.sessions.push_back(se);
  }
  for (const auto& r : records) {
    const auto [s, t] = resolve(idx, r);
    if (sessions.at(r.session_id).excluded) continue;
    if (t->hidden.anchor) {
      ++out.report.anchors_dropped;
      continue;
    }
    const std::string& rater_team = r.team_id.empty() ? s->team_id : r.team_id;
    auto it = teams.find(t->hidden.system_id);
    const std::string& system_team = it != teams.end() ? it->second : t->hidden.team_id;
    if (!rater_team.empty() && rater_team == system_team) {
      ++out.report.self_ratings_removed[rater_team];
      continue;
    }
    out.retained.push_back(r);
  }
  return out;
}

json exclusion_report_json(const ExclusionReport& report, const Provenance& prov) {
  json j;
  j["provenance"] = provenance_json(prov);
  j["threshold"] = report.options.threshold;
  j["strict"] = report.options.strict;
  j["excluded_sessions"] = report.excluded_sessions();
  j["self_ratings_removed"] = report.self_ratings_removed;
  j["anchors_dropped"] = report.anchors_dropped;
  json sessions = json::array();
  for (const auto& s : report.sessions) {
    json js = {{"session_id", s.session_id},
               {"rater_id", s.rater_id},
               {"misrated", s.misrated},
               {"counted_anchors", s.counted_anchors},
               {"scale_confusions", s.scale_confusions},
               {"excluded", s.excluded}};
    if (s.excluded) {
      js["reason"] = fmt::format("{} of {} counted anchors mis-rated ({} scale confusions)", s.misrated,
                                 s.counted_anchors, s.scale_confusions);
    }
    {
      json anchors = json::array();
      for (const auto& a : s.anchors) {
        anchors.push_back({{"trial_id", a.trial_id},
                           {"quality_pole", std::string(pole_name(a.poles.quality))},
                           {"fit_pole", std::string(pole_name(a.poles.fit))},
                           {"quality", a.quality},
                           {"fit", a.fit},
                           {"misrated", a.misrated},
                           {"counted", a.counted},
                           {"scale_confusion", a.scale_confusion}});
      }
      js["anchors"] = std::move(anchors);
    }
    sessions.push_back(std::move(js));
  }
  j["sessions"] = std::move(sessions);
  return j;
}

std::vector<AggregateScore> aggregate(const std::vector<RatingRecord>& retained, const ListeningPlan& plan) {
  const TrialIndex idx = index_trials(plan);
  struct Bucket {
    std::vector<double> q, f, d;
  };
  std::map<GroupKey, Bucket> buckets;
  for (const auto& r : retained) {
    const auto [s, t] = resolve(idx, r);
    if (t->hidden.anchor) throw Error(fmt::format("anchor trial {}/{} reached aggregation", r.session_id, r.trial_id));
    if (t->hidden.system_id.empty()) continue;
    Bucket& b = buckets[{t->hidden.system_id, t->hidden.category}];
    if (t->kind == TrialKind::kDiversity) {
      b.d.push_back(*r.diversity);
    } else {
      b.q.push_back(*r.quality);
      b.f.push_back(*r.fit);
    }
  }
  const auto cats = rated_categories(plan);
  std::vector<AggregateScore> out;
  for (const auto& f : plan.finalists) {
    AggregateScore a;
    a.system_id = f.system_id;
    a.track = f.track;
    std::vector<double> qs, fs_, ds;
    std::size_t nq = 0, nf = 0, nd = 0;
    for (Category c : cats) {
      CategoryScore& cs = a.per_category[static_cast<std::size_t>(c)];
      auto it = buckets.find({f.system_id, c});
      if (it != buckets.end()) {
        cs.quality = mean_scale(it->second.q);
        cs.fit = mean_scale(it->second.f);
        cs.diversity = mean_scale(it->second.d);
      }
      const std::string name(category_name(c));
      auto take = [&](const ScaleMean& m, std::vector<double>& acc, std::size_t& n, const char* scale) {
        if (m.mean) {
          acc.push_back(*m.mean);
          n += m.count;
        } else {
          a.missing.push_back(fmt::format("{}:{}", name, scale));
        }
      };
      take(cs.quality, qs, nq, "quality");
      take(cs.fit, fs_, nf, "fit");
      take(cs.diversity, ds, nd, "diversity");
    }
    if (!cats.empty() && qs.size() == cats.size()) a.quality = {mean_of(qs), nq};
    if (!cats.empty() && fs_.size() == cats.size()) a.fit = {mean_of(fs_), nf};
    if (!cats.empty() && ds.size() == cats.size()) a.diversity = {mean_of(ds), nd};
    out.push_back(std::move(a));
  }
  return out;
}

void write_aggregates_csv(const std::vector<AggregateScore>& scores, const fs::path& path, const Provenance& prov) {
  std::ostringstream out;
  out << prov.csv_comment();
  out << "system_id,track,category,quality,quality_n,fit,fit_n,diversity,diversity_n\n";
  auto cell = [](const ScaleMean& m) {
    return fmt::format("{},{}", m.mean ? format_double(*m.mean) : std::string(), m.count);
  };
  for (const auto& a : scores) {
    for (Category c : kCategories) {
      const CategoryScore& cs = a.per_category[static_cast<std::size_t>(c)];
      if (!cs.quality.mean && !cs.fit.mean && !cs.diversity.mean) continue;
      out << csv_escape(a.system_id) << ',' << track_name(a.track) << ',' << category_name(c) << ','
          << cell(cs.quality) << ',' << cell(cs.fit) << ',' << cell(cs.diversity) << '\n';
    }
    out << csv_escape(a.system_id) << ',' << track_name(a.track) << ",overall," << cell(a.quality) << ','
        << cell(a.fit) << ',' << cell(a.diversity) << '\n';
  }
  write_file_atomic(path, out.str());
}

Weights parse_weights(std::string_view text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw Error(fmt::format("weights must be three numbers 'q,f,d', got '{}'", text));
  Weights w;
  double* dst[3] = {&w.quality, &w.fit, &w.diversity};
  for (int i = 0; i < 3; ++i) {
    try {
      std::size_t used = 0;
      const std::string p = trim(parts[i]);
      *dst[i] = std::stod(p, &used);
      if (used != p.size()) throw std::invalid_argument(p);
    } catch (const std::exception&) {
      throw Error(fmt::format("bad weight '{}'", parts[i]));
    }
    if (!std::isfinite(*dst[i]) || *dst[i] < 0.0) throw Error("weights must be finite and non-negative");
  }
  if (w.quality + w.fit + w.diversity <= 0.0) throw Error("weights must not all be zero");
  return w;
}

std::optional<CombineMode> parse_combine_mode(std::string_view name) {
  if (name == "overall") return CombineMode::kOverall;
  if (name == "per-category") return CombineMode::kPerCategory;
  return std::nullopt;
}

double combined_score(double q, double f, double d, const Weights& w) {
  return (w.quality * q + w.fit * f + w.diversity * d) / (w.quality + w.fit + w.diversity);
}

FinalRanking final_rank(const std::vector<AggregateScore>& aggregates, const Weights& weights,
                        const std::map<std::string, double>& fad_eval, CombineMode mode) {
  FinalRanking out;
  out.weights = weights;
  out.mode = mode;
  std::vector<RankedSystem> all;
  for (const auto& a : aggregates) {
    RankedSystem r;
    r.system_id = a.system_id;
    r.track = a.track;
    if (auto it = fad_eval.find(a.system_id); it != fad_eval.end()) r.fad_eval = it->second;
    for (const auto& m : a.missing) {
      const bool needed = (m.ends_with(":quality") && weights.quality > 0.0) ||
                          (m.ends_with(":fit") && weights.fit > 0.0) ||
                          (m.ends_with(":diversity") && weights.diversity > 0.0);
      if (needed) r.missing.push_back(m);
    }
    const bool no_categories = !a.quality.mean && !a.fit.mean && !a.diversity.mean && a.missing.empty();
    if (no_categories) r.missing.push_back("no rated categories");
    if (r.missing.empty()) {
      if (mode == CombineMode::kOverall) {
        r.combined = combined_score(a.quality.mean.value_or(0.0), a.fit.mean.value_or(0.0),
                                    a.diversity.mean.value_or(0.0), weights);
      } else {
        std::vector<double> per;
        for (const auto& cs : a.per_category) {
          if (!cs.quality.mean && !cs.fit.mean && !cs.diversity.mean) continue;
          per.push_back(combined_score(cs.quality.mean.value_or(0.0), cs.fit.mean.value_or(0.0),
                                       cs.diversity.mean.value_or(0.0), weights));
        }
        r.combined = mean_of(per);
      }
    }
    all.push_back(std::move(r));
  }
  auto before = [](const RankedSystem& a, const RankedSystem& b) {
    if (a.combined.has_value() != b.combined.has_value()) return a.combined.has_value();
    if (a.combined && *a.combined != *b.combined) return *a.combined > *b.combined;
    if (a.fad_eval.has_value() != b.fad_eval.has_value()) return a.fad_eval.has_value();
    if (a.fad_eval && *a.fad_eval != *b.fad_eval) return *a.fad_eval < *b.fad_eval;
    return a.system_id < b.system_id;
  };
  std::sort(all.begin(), all.end(), before);
  for (std::size_t i = 0; i < all.size(); ++i) {
    all[i].overall_position = i + 1;
    if (!all[i].combined) {
      out.trace.push_back(fmt::format("{} ranked last: missing {}", all[i].system_id, fmt::join(all[i].missing, ", ")));
      continue;
    }
    if (i == 0 || !all[i - 1].combined || *all[i - 1].combined != *all[i].combined) continue;
    const auto& a = all[i - 1];
    const auto& b = all[i];
    if (a.fad_eval && b.fad_eval && *a.fad_eval != *b.fad_eval) {
      out.trace.push_back(fmt::format("{} before {}: tied at {}, lower FAD-Eval {} < {}", a.system_id, b.system_id,
                                      format_double(*a.combined), format_double(*a.fad_eval),
                                      format_double(*b.fad_eval)));
    } else if (a.fad_eval && !b.fad_eval) {
      out.trace.push_back(fmt::format("{} before {}: tied at {}, {} has no FAD-Eval", a.system_id, b.system_id,
                                      format_double(*a.combined), b.system_id));
    } else {
      out.trace.push_back(fmt::format("{} before {}: tied at {} and on FAD-Eval, by system_id", a.system_id,
                                      b.system_id, format_double(*a.combined)));
    }
  }
  for (const auto& r : all) out.tracks[r.track].push_back(r);
  for (auto& [track, list] : out.tracks) {
    for (std::size_t i = 0; i < list.size(); ++i) list[i].rank = i + 1;
  }
  for (auto& r : all) {
    for (const auto& t : out.tracks[r.track]) {
      if (t.system_id == r.system_id) r.rank = t.rank;
    }
  }
  out.overall = std::move(all);
  return out;
}

json ranking_json(const FinalRanking& ranking, const Provenance& prov) {
  json j;
  j["provenance"] = provenance_json(prov);
  j["weights"] = {{"quality", ranking.weights.quality},
                  {"fit", ranking.weights.fit},
                  {"diversity", ranking.weights.diversity}};
  j["combine"] = ranking.mode == CombineMode::kOverall ? "overall" : "per-category";
  auto entry = [](const RankedSystem& r) {
    return json{{"system_id", r.system_id},
                {"track", std::string(track_name(r.track))},
                {"rank", r.rank},
                {"overall_position", r.overall_position},
                {"combined", optional_number(r.combined)},
                {"fad_eval", optional_number(r.fad_eval)},
                {"missing", r.missing}};
  };
  json tracks = json::object();
  for (const auto& [track, list] : ranking.tracks) {
    json arr = json::array();
    for (const auto& r : list) arr.push_back(entry(r));
    tracks[std::string(track_name(track))] = std::move(arr);
  }
  j["tracks"] = std::move(tracks);
  json overall = json::array();
  for (const auto& r : ranking.overall) overall.push_back(entry(r));
  j["overall"] = std::move(overall);
  j["trace"] = ranking.trace;
  return j;
}

CorrelationReport correlation_report(const std::vector<AggregateScore>& aggregates,
                                     const std::vector<RatingRecord>& retained, const ListeningPlan& plan,
                                     const std::vector<FadResult>& fad_dev, const std::vector<FadResult>& fad_eval,
                                     const FinalRanking& ranking) {
  std::map<std::string, double> dev, eval;
  for (const auto& r : fad_dev) dev[r.system_id] = r.average;
  for (const auto& r : fad_eval) eval[r.system_id] = r.average;
  std::set<std::string> ranked;
  for (const auto& r : ranking.overall) ranked.insert(r.system_id);
  for (const auto& a : aggregates) {
    if (!ranked.count(a.system_id)) throw Error(fmt::format("system {} has scores but no final rank", a.system_id));
  }

  CorrelationReport rep;
  std::vector<double> pos, xe, xd;
  for (const auto& r : ranking.overall) {
    if (!dev.count(r.system_id)) throw Error(fmt::format("system {} missing from the FAD-Dev table", r.system_id));
    if (!eval.count(r.system_id)) throw Error(fmt::format("system {} missing from the FAD-Eval table", r.system_id));
    pos.push_back(static_cast<double>(r.overall_position));
    xe.push_back(eval[r.system_id]);
    xd.push_back(dev[r.system_id]);
  }
  rep.fad_eval_vs_final = safe_correlation(xe, pos, true);
  rep.fad_dev_vs_final = safe_correlation(xd, pos, true);

  for (Category c : rated_categories(plan)) {
    std::vector<double> q, f;
    for (const auto& a : aggregates) {
      const auto& cs = a.per_category[static_cast<std::size_t>(c)];
      if (cs.quality.mean && cs.fit.mean) {
        q.push_back(*cs.quality.mean);
        f.push_back(*cs.fit.mean);
      }
    }
    rep.system_quality_fit[std::string(category_name(c))] = safe_correlation(q, f, false);
  }
  rep.system_quality_fit_mean = mean_correlation(rep.system_quality_fit);

  const TrialIndex idx = index_trials(plan);
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> trials;
  for (const auto& r : retained) {
    const auto [s, t] = resolve(idx, r);
    if (t->kind != TrialKind::kRating || !r.quality || !r.fit) continue;
    auto& [q, f] = trials[std::string(category_name(t->hidden.category))];
    q.push_back(*r.quality);
    f.push_back(*r.fit);
  }
  for (const auto& [cat, qf] : trials) rep.trial_quality_fit[cat] = safe_correlation(qf.first, qf.second, false);
  rep.trial_quality_fit_mean = mean_correlation(rep.trial_quality_fit);

  std::vector<double> d, f;
  for (const auto& a : aggregates) {
    if (a.diversity.mean && a.fit.mean) {
      d.push_back(*a.diversity.mean);
      f.push_back(*a.fit.mean);
    }
  }
  rep.diversity_vs_fit = safe_correlation(d, f, false);
  return rep;
}

json correlation_json(const CorrelationReport& r) {
  json j;
  j["spearman_fad_eval_vs_final"] = correlation_to_json(r.fad_eval_vs_final);
  j["spearman_fad_dev_vs_final"] = correlation_to_json(r.fad_dev_vs_final);
  json sys = json::object(), tri = json::object();
  for (const auto& [k, c] : r.system_quality_fit) sys[k] = correlation_to_json(c);
  for (const auto& [k, c] : r.trial_quality_fit) tri[k] = correlation_to_json(c);
  j["pearson_system_quality_fit"] = {{"per_category", sys}, {"mean", correlation_to_json(r.system_quality_fit_mean)}};
  j["pearson_trial_quality_fit"] = {{"per_category", tri}, {"mean", correlation_to_json(r.trial_quality_fit_mean)}};
  j["pearson_diversity_vs_fit"] = correlation_to_json(r.diversity_vs_fit);
  return j;
}

ReleasedScores released_score_correlations(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const auto cd = t.column("fad_dev"), ce = t.column("fad_eval"), cr = t.column("final_rank");
  std::vector<double> dev, eval, rank;
  for (const auto& row : t.rows) {
    try {
      dev.push_back(std::stod(row.fields[cd]));
      eval.push_back(std::stod(row.fields[ce]));
      rank.push_back(std::stod(row.fields[cr]));
    } catch (const std::exception&) {
      throw Error(fmt::format("{}:{}: non-numeric score", path.string(), row.line));
    }
  }
  return {safe_correlation(eval, rank, true), safe_correlation(dev, rank, true)};
}

void write_fig1_csv(const std::vector<FadResult>& fad_dev, const std::vector<FadResult>& fad_eval,
                    const fs::path& path, const Provenance& prov) {
  std::map<std::string, const FadResult*> dev;
  for (const auto& r : fad_dev) dev[r.system_id] = &r;
  std::ostringstream out;
  out << prov.csv_comment();
  out << "system_id,track,fad_dev,fad_dev_std,fad_eval,fad_eval_std\n";
  for (const auto& e : fad_eval) {
    auto it = dev.find(e.system_id);
    if (it == dev.end()) throw Error(fmt::format("system {} missing from the FAD-Dev table", e.system_id));
    out << csv_escape(e.system_id) << ',' << track_name(e.track) << ',' << format_double(it->second->average) << ','
        << format_double(sample_std(it->second->per_category)) << ',' << format_double(e.average) << ','
        << format_double(sample_std(e.per_category)) << '\n';
  }
  write_file_atomic(path, out.str());
}

void write_fig2_csv(const FinalRanking& ranking, const std::vector<FadResult>& fad_dev,
                    const std::vector<FadResult>& fad_eval, const fs::path& path, const Provenance& prov) {
  std::map<std::string, double> dev, eval;
  for (const auto& r : fad_dev) dev[r.system_id] = r.average;
  for (const auto& r : fad_eval) eval[r.system_id] = r.average;
  std::ostringstream out;
  out << prov.csv_comment();
  out << "system_id,track,final_rank,overall_position,combined,fad_dev,fad_eval\n";
  for (const auto& r : ranking.overall) {
    auto fmt_opt = [](const std::map<std::string, double>& m, const std::string& k) {
      auto it = m.find(k);
      return it == m.end() ? std::string() : format_double(it->second);
    };
    out << csv_escape(r.system_id) << ',' << track_name(r.track) << ',' << r.rank << ',' << r.overall_position << ','
        << (r.combined ? format_double(*r.combined) : std::string()) << ',' << fmt_opt(dev, r.system_id) << ','
        << fmt_opt(eval, r.system_id) << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace foley
