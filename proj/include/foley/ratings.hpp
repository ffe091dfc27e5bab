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


#ifndef FOLEY_RATINGS_HPP_
#define FOLEY_RATINGS_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "foley/common.hpp"
#include "foley/corpus.hpp"
#include "foley/metrics.hpp"
#include "foley/trials.hpp"

namespace foley {

inline constexpr int kScaleMin = 0;
inline constexpr int kScaleMax = 10;

struct RatingRecord {
  std::string session_id;
  std::string rater_id;
  std::string team_id;
  std::string category;  // category name or "diversity"
  std::string trial_id;
  std::string clip_token;
  std::optional<int> quality;
  std::optional<int> fit;
  std::optional<int> diversity;
  int listen_count = 1;
  std::string timestamp;
  // Present only in unsealed exports.
  std::optional<std::string> system_id;
  std::optional<AnchorPoles> anchor;

  bool operator==(const RatingRecord&) const = default;
};

nlohmann::json record_to_json(const RatingRecord& r);
// Throws on missing fields, wrong types, out-of-range scales or a scale
// combination other than quality+fit or diversity alone.
RatingRecord record_from_json(const nlohmann::json& j);

// Referent acknowledgements share the log with ratings but carry no scales.
bool is_referent_ack(const nlohmann::json& j);

struct DuplicateRecord {
  std::size_t line = 0;
  std::string session_id;
  std::string trial_id;
};

struct IngestResult {
  std::vector<RatingRecord> records;
  std::vector<DuplicateRecord> duplicates;
  std::size_t referent_acks = 0;
};

// With a plan, every record must name a known rating or diversity trial
// whose token and required scales match.
IngestResult ingest_ratings(const std::filesystem::path& path, const ListeningPlan* plan = nullptr);
IngestResult ingest_ratings_text(std::string_view text, const ListeningPlan* plan = nullptr,
                                 std::string_view source = "<input>");

void write_records_jsonl(const std::vector<RatingRecord>& records, const std::filesystem::path& path);

// A pole rating passes when high >= 6 or low <= 4; 5 always fails.
bool pole_satisfied(Pole pole, int rating);

struct ExclusionOptions {
  std::size_t threshold = 5;
  bool strict = false;  // count low-quality anchors too
};

struct AnchorJudgement {
  std::string trial_id;
  AnchorPoles poles;
  int quality = 0;
  int fit = 0;
  bool misrated = false;
  bool counted = false;
  bool scale_confusion = false;  // (high, low) anchor rated low quality and high fit
};

struct SessionExclusion {
  std::string session_id;
  std::string rater_id;
  std::size_t misrated = 0;
  std::size_t counted_anchors = 0;
  std::size_t scale_confusions = 0;
  bool excluded = false;
  std::vector<AnchorJudgement> anchors;
};

struct ExclusionReport {
  ExclusionOptions options;
  std::vector<SessionExclusion> sessions;  // every session with ratings, in session_id order
  std::map<std::string, std::size_t> self_ratings_removed;  // team_id -> records
  std::size_t anchors_dropped = 0;

  std::vector<std::string> excluded_sessions() const;
};

struct ExclusionResult {
  std::vector<RatingRecord> retained;
  ExclusionReport report;
};

// `teams` maps system_id -> team_id; systems absent from it fall back to the
// team recorded in the sealed plan.
ExclusionResult apply_exclusions(const std::vector<RatingRecord>& records, const ListeningPlan& plan,
                                 const std::map<std::string, std::string>& teams = {},
                                 const ExclusionOptions& options = {});

nlohmann::json exclusion_report_json(const ExclusionReport& report, const Provenance& prov);

struct ScaleMean {
  std::optional<double> mean;
  std::size_t count = 0;
};

struct CategoryScore {
  ScaleMean quality;
  ScaleMean fit;
  ScaleMean diversity;
};

struct AggregateScore {
  std::string system_id;
  Track track = Track::kA;
  std::array<CategoryScore, kNumCategories> per_category;
  // Means of the category means; empty when any rated category lacks data.
  ScaleMean quality;
  ScaleMean fit;
  ScaleMean diversity;
  std::vector<std::string> missing;  // "<category>:<scale>"
};

// Categories are those with rating sessions in the plan; diversity is only
// required when the plan has diversity sessions.
std::vector<AggregateScore> aggregate(const std::vector<RatingRecord>& retained, const ListeningPlan& plan);

void write_aggregates_csv(const std::vector<AggregateScore>& scores, const std::filesystem::path& path,
                          const Provenance& prov);

struct Weights {
  double quality = 1.0;
  double fit = 1.0;
  double diversity = 0.5;
};

Weights parse_weights(std::string_view text);

enum class CombineMode { kOverall, kPerCategory };
std::optional<CombineMode> parse_combine_mode(std::string_view name);

// (wq*Q + wf*F + wd*D) / (wq + wf + wd)
double combined_score(double q, double f, double d, const Weights& w);

struct RankedSystem {
  std::string system_id;
  Track track = Track::kA;
  std::optional<double> combined;
  std::optional<double> fad_eval;
  std::size_t rank = 0;             // within track, 1-based
  std::size_t overall_position = 0;  // across all finalists, 1-based
  std::vector<std::string> missing;
};

struct FinalRanking {
  Weights weights;
  CombineMode mode = CombineMode::kOverall;
  std::map<Track, std::vector<RankedSystem>> tracks;
  std::vector<RankedSystem> overall;
  std::vector<std::string> trace;
};

// Descending by combined score; ties by lower FAD-Eval average, then system_id.
// Systems with a missing component are ranked last.
FinalRanking final_rank(const std::vector<AggregateScore>& aggregates, const Weights& weights = {},
                        const std::map<std::string, double>& fad_eval = {}, CombineMode mode = CombineMode::kOverall);

nlohmann::json ranking_json(const FinalRanking& ranking, const Provenance& prov);

struct Correlation {
  std::optional<double> value;
  std::size_t n = 0;
  std::string note;  // why the value is absent
};

struct CorrelationReport {
  Correlation fad_eval_vs_final;
  Correlation fad_dev_vs_final;
  std::map<std::string, Correlation> system_quality_fit;  // per category
  Correlation system_quality_fit_mean;
  std::map<std::string, Correlation> trial_quality_fit;
  Correlation trial_quality_fit_mean;
  Correlation diversity_vs_fit;
};

CorrelationReport correlation_report(const std::vector<AggregateScore>& aggregates,
                                     const std::vector<RatingRecord>& retained, const ListeningPlan& plan,
                                     const std::vector<FadResult>& fad_dev, const std::vector<FadResult>& fad_eval,
                                     const FinalRanking& ranking);

nlohmann::json correlation_json(const CorrelationReport& report);

// Released per-system scores: system_id,fad_dev,fad_eval,final_rank.
struct ReleasedScores {
  Correlation fad_eval_vs_final;
  Correlation fad_dev_vs_final;
};
ReleasedScores released_score_correlations(const std::filesystem::path& path);

// FAD-Dev vs FAD-Eval averages with per-category standard deviations.
void write_fig1_csv(const std::vector<FadResult>& fad_dev, const std::vector<FadResult>& fad_eval,
                    const std::filesystem::path& path, const Provenance& prov);
// Final rank against FAD averages for the finalists.
void write_fig2_csv(const FinalRanking& ranking, const std::vector<FadResult>& fad_dev,
                    const std::vector<FadResult>& fad_eval, const std::filesystem::path& path, const Provenance& prov);

}  // namespace foley

#endif  // FOLEY_RATINGS_HPP_
