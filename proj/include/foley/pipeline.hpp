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


#ifndef FOLEY_PIPELINE_HPP_
#define FOLEY_PIPELINE_HPP_

#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "foley/config.hpp"
#include "foley/corpus.hpp"
#include "foley/embed.hpp"
#include "foley/metrics.hpp"
#include "foley/ratings.hpp"
#include "foley/select.hpp"
#include "foley/trials.hpp"

namespace foley {

// Artifact locations inside a work directory.
struct WorkLayout {
  explicit WorkLayout(std::filesystem::path root);

  std::filesystem::path root;
  std::filesystem::path clips_dir, manifest, split_report, submission_report;
  std::filesystem::path reference_emb, submission_emb;
  std::filesystem::path fad_dev, fad_eval, finalists;
  std::filesystem::path medoids, diversity_dir, sealed_map;
  std::filesystem::path anchors, referents, plans_dir, sealed_plan, rater_plan;
  std::filesystem::path data_dir, ratings_log;
  std::filesystem::path ingested, ingest_report, retained, exclusions, aggregates, ranking, report, fig1, fig2;
};

const std::vector<std::string>& stage_names();
// Comma-separated stage list, or "all"; returned in pipeline order.
std::vector<std::string> parse_stages(std::string_view text);

// Throws naming the stage that produces `path` when it is missing.
void require_input(const std::filesystem::path& path, std::string_view producer);

// Decodes, normalizes and writes every manifest clip to `out_dir/clips`, and
// writes `out_dir/manifest.csv` pointing at the results.
Manifest preprocess_manifest(const Manifest& raw, const std::filesystem::path& out_dir, SegmentPolicy policy,
                             Exec exec);

nlohmann::json split_report_json(const SplitReport& r, const Provenance& prov);
nlohmann::json submission_reports_json(const std::vector<SubmissionReport>& reports, const Provenance& prov);

// Non-anchor development and evaluation clips, grouped by split name.
EmbeddingMatrix embed_reference(const Manifest& m, const PipelineConfig& cfg);
// Submission clips grouped by system_id; track and team recorded as attributes.
EmbeddingMatrix embed_submissions(const std::vector<SubmissionInfo>& systems, const PipelineConfig& cfg);
std::vector<SubmissionInfo> systems_from_embeddings(const EmbeddingMatrix& m);

std::vector<FadResult> compute_fad(const EmbeddingMatrix& systems, const EmbeddingMatrix& reference, Split split,
                                   Exec exec);

struct FinalistRow {
  Finalist finalist;
  std::size_t rank = 0;
  double average_fad = 0.0;
};
// Top k per track by FAD-Eval average.
std::vector<FinalistRow> screen_finalists(const std::vector<FadResult>& fad_eval,
                                          const std::vector<SubmissionInfo>& systems, std::size_t top_k);
void write_finalists_csv(const std::vector<FinalistRow>& rows, const std::filesystem::path& path,
                         const Provenance& prov);

// clip_id -> path for every submission clip.
std::map<std::string, std::filesystem::path> submission_clip_paths(const std::vector<SubmissionInfo>& systems);

struct DiversityFile {
  std::string system_id;
  Category category;
  std::string token;
  std::filesystem::path file;
};
std::vector<DiversityFile> write_diversity_files(const MedoidSet& medoids,
                                                 const std::map<std::string, std::filesystem::path>& clip_paths,
                                                 const std::filesystem::path& out_dir, double gap_seconds,
                                                 std::uint64_t seed, const std::filesystem::path& map_path,
                                                 const Provenance& prov);
std::vector<DiversityFile> read_sealed_map(const std::filesystem::path& path);

// anchors.csv / referents.csv with paths relative to their own directory.
void write_listening_inputs(const Manifest& processed, const std::filesystem::path& anchors_csv,
                            const std::filesystem::path& referents_csv);

// Called while the server runs when ratings are collected automatically.
using RaterHook = std::function<void(const std::string& base_url, const ListeningPlan& plan)>;

struct RunOptions {
  RaterHook raters;          // empty: serve until interrupted
  std::string admin_token;   // overrides the environment
  std::ostream* log = nullptr;
};

// Runs the requested stages in order; returns 0, or 1 when validation
// violations were found. Operational failures throw.
int run_pipeline(const PipelineConfig& cfg, const std::vector<std::string>& stages, const RunOptions& options = {});

// Individual stages over a work layout.
int stage_preprocess(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_embed(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_fad(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_screen(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_medoids(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_diversity(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_plan(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_serve(const PipelineConfig& cfg, const WorkLayout& w, const RunOptions& options, std::ostream& log);
int stage_ingest(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_exclude(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_aggregate(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_rank(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);
int stage_report(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log);

// Final report as JSON (also used by the report stage).
nlohmann::json build_report(const PipelineConfig& cfg, const ListeningPlan& plan,
                            const std::vector<FadResult>& fad_dev, const std::vector<FadResult>& fad_eval,
                            const ExclusionResult& exclusions, const std::vector<AggregateScore>& aggregates,
                            const FinalRanking& ranking, const CorrelationReport& correlations);

}  // namespace foley

#endif  // FOLEY_PIPELINE_HPP_
