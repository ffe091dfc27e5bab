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


// foley: command-line driver for the evaluation harness.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "foley/config.hpp"
#include "foley/fixture.hpp"
#include "foley/pipeline.hpp"
#include "foley/server.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace foley;

namespace {

// Options shared by every subcommand that reads a pipeline config.
struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string work_dir;
  std::string exec;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "TOML config; explicit flags take precedence")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "seed for every seeded stage");
  app->add_option("--work-dir", c.work_dir, "artifact directory");
  app->add_option("--exec", c.exec, "serial or parallel kernels")->check(CLI::IsMember({"serial", "parallel"}));
}

PipelineConfig make_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.work_dir.empty()) cfg.work_dir = c.work_dir;
  if (c.exec == "serial") cfg.exec = Exec::kSerial;
  if (c.exec == "parallel") cfg.exec = Exec::kParallel;
  return cfg;
}

fs::path pick(const std::string& flag, const fs::path& fallback) { return flag.empty() ? fallback : fs::path(flag); }

template <typename T>
void override(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

EmbeddingMatrix read_embedding_source(const fs::path& path) {
  if (!fs::is_directory(path)) return read_embeddings(path);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.path().extension() == ".femb") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(fmt::format("no .femb files in {}", path.string()));
  std::vector<EmbeddingMatrix> parts;
  for (const auto& f : files) parts.push_back(read_embeddings(f));
  return concat(parts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation harness for category-to-sound generation challenges"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  int status = 0;

  // preprocess
  Common pre_c;
  std::string pre_manifest, pre_in, pre_out, pre_policy;
  auto* pre = app.add_subcommand("preprocess", "Normalize every manifest clip to the 4 s mono 22,050 Hz format");
  add_common(pre, pre_c);
  pre->add_option("--manifest", pre_manifest, "raw manifest CSV");
  pre->add_option("--in", pre_in, "directory that relative manifest paths resolve against");
  pre->add_option("--out", pre_out, "output directory (clips/ and manifest.csv)");
  pre->add_option("--policy", pre_policy, "handling of clips longer than 4 s")->check(CLI::IsMember({"max-rms", "first"}));
  pre->callback([&] {
    PipelineConfig cfg = make_config(pre_c);
    if (!pre_manifest.empty()) cfg.manifest = pre_manifest;
    if (!pre_out.empty()) cfg.work_dir = pre_out;
    if (!pre_policy.empty()) cfg.policy = *parse_segment_policy(pre_policy);
    if (cfg.manifest.empty()) throw Error("--manifest is required");
    Manifest raw = load_manifest(cfg.manifest);
    if (!pre_in.empty()) raw.base_dir = pre_in;
    const WorkLayout w(cfg.work_dir);
    const Provenance prov = cfg.provenance();
    const Manifest processed = preprocess_manifest(raw, w.root, cfg.policy, cfg.exec);
    write_manifest(processed, w.manifest, &prov);
    std::cerr << fmt::format("{} clips written to {}\n", processed.entries.size(), w.clips_dir.string());
  });

  // validate
  std::string val_manifest;
  std::optional<std::size_t> val_expected;
  auto* val = app.add_subcommand("validate", "Check split disjointness and per-category evaluation counts");
  val->add_option("--manifest", val_manifest, "manifest CSV")->required();
  val->add_option("--expected", val_expected, "evaluation clips expected per category (default 100)");
  val->callback([&] {
    const Manifest m = load_manifest(val_manifest);
    const SplitReport r = validate_split(m, {val_expected.value_or(100), true});
    print_json(split_report_json(r, Provenance{}));
    for (const auto& problem : check_manifest_audio(m)) std::cerr << "audio: " << problem << '\n';
    if (!r.ok()) status = 1;
  });

  // validate-submission
  std::string vs_dir, vs_dev;
  std::size_t vs_expected = 100;
  auto* vs = app.add_subcommand("validate-submission", "Check a submission's counts, formats and duplicates");
  vs->add_option("--dir", vs_dir, "submission directory (holds system.json)")->required();
  vs->add_option("--expected", vs_expected, "clips expected per category");
  vs->add_option("--dev-manifest", vs_dev, "preprocessed manifest used for duplicate detection");
  vs->callback([&] {
    ContentIndex dev;
    if (!vs_dev.empty()) dev = build_content_index(load_manifest(vs_dev), Split::kDevelopment);
    const auto report = validate_submission(load_submission_info(vs_dir), vs_expected, dev);
    print_json(submission_reports_json({report}, Provenance{}));
    if (!report.ok()) status = 1;
  });

  // embed
  Common emb_c;
  std::string emb_manifest, emb_submissions, emb_backend, emb_import_dir, emb_model, emb_out;
  std::optional<std::size_t> emb_dim, emb_frames;
  auto* emb = app.add_subcommand("embed", "Embed reference clips or submissions");
  add_common(emb, emb_c);
  emb->add_option("--manifest", emb_manifest, "preprocessed manifest (reference embeddings)");
  emb->add_option("--submissions", emb_submissions, "submissions directory (system embeddings)");
  emb->add_option("--backend", emb_backend, "builtin or import")->check(CLI::IsMember({"builtin", "import"}));
  emb->add_option("--import-dir", emb_import_dir, "directory of <clip_id>.femb files");
  emb->add_option("--model-id", emb_model, "model id of imported embeddings");
  emb->add_option("--dim", emb_dim, "dimension of imported embeddings");
  emb->add_option("--frames", emb_frames, "vectors per clip of imported embeddings");
  emb->add_option("--out", emb_out, "output .femb file");
  emb->callback([&] {
    PipelineConfig cfg = make_config(emb_c);
    if (!emb_backend.empty()) cfg.embed_backend = emb_backend;
    if (!emb_import_dir.empty()) cfg.import_dir = emb_import_dir;
    if (!emb_model.empty()) cfg.import_model_id = emb_model;
    override(emb_dim, cfg.import_dim);
    override(emb_frames, cfg.import_frames);
    if (!emb_manifest.empty() && !emb_submissions.empty()) throw Error("give either --manifest or --submissions");
    if (emb_manifest.empty() && emb_submissions.empty()) {
      if (emb_c.config.empty()) throw Error("--manifest, --submissions or --config is required");
      status = stage_embed(cfg, WorkLayout(cfg.work_dir), std::cerr);
      return;
    }
    if (emb_out.empty()) throw Error("--out is required");
    const EmbeddingMatrix m = emb_manifest.empty() ? embed_submissions(discover_submissions(emb_submissions), cfg)
                                                   : embed_reference(load_manifest(emb_manifest), cfg);
    if (fs::path(emb_out).has_parent_path()) fs::create_directories(fs::path(emb_out).parent_path());
    write_embeddings(m, emb_out);
    std::cerr << fmt::format("{} clips, {} rows of dim {}\n", m.clip_count(), m.rows(), m.dim);
  });

  // fad
  Common fad_c;
  std::string fad_systems, fad_reference, fad_tag, fad_out;
  auto* fad = app.add_subcommand("fad", "Per-category FAD of every system against a reference split");
  add_common(fad, fad_c);
  fad->add_option("--systems", fad_systems, "system embeddings (.femb file or directory)");
  fad->add_option("--reference", fad_reference, "reference embeddings (.femb)");
  fad->add_option("--tag", fad_tag, "reference split")->check(CLI::IsMember({"dev", "eval"}));
  fad->add_option("--out", fad_out, "output CSV");
  fad->callback([&] {
    PipelineConfig cfg = make_config(fad_c);
    const WorkLayout w(cfg.work_dir);
    if (fad_tag.empty()) {
      status = stage_fad(cfg, w, std::cerr);
      return;
    }
    const Split split = fad_tag == "dev" ? Split::kDevelopment : Split::kEvaluation;
    const auto rows = compute_fad(read_embedding_source(pick(fad_systems, w.submission_emb)),
                                  read_embeddings(pick(fad_reference, w.reference_emb)), split, cfg.exec);
    write_fad_csv(rows, pick(fad_out, split == Split::kDevelopment ? w.fad_dev : w.fad_eval), cfg.provenance());
  });

  // screen
  Common scr_c;
  std::string scr_fad, scr_out, scr_embeddings;
  std::optional<std::size_t> scr_k;
  auto* scr = app.add_subcommand("screen", "Top-k systems per track by FAD-Eval average");
  add_common(scr, scr_c);
  scr->add_option("--fad", scr_fad, "FAD-Eval CSV");
  scr->add_option("--k", scr_k, "finalists per track (default 4)");
  scr->add_option("--embeddings", scr_embeddings, "system embeddings, for team ids");
  scr->add_option("--out", scr_out, "finalists CSV");
  scr->callback([&] {
    PipelineConfig cfg = make_config(scr_c);
    override(scr_k, cfg.top_k);
    const WorkLayout w(cfg.work_dir);
    const auto fad_rows = read_fad_csv(pick(scr_fad, w.fad_eval));
    std::vector<SubmissionInfo> systems;
    const fs::path emb_path = pick(scr_embeddings, w.submission_emb);
    if (fs::exists(emb_path)) systems = systems_from_embeddings(read_embedding_source(emb_path));
    const auto rows = screen_finalists(fad_rows, systems, cfg.top_k);
    write_finalists_csv(rows, pick(scr_out, w.finalists), cfg.provenance());
    for (const auto& r : rows) {
      std::cerr << fmt::format("{} {} #{} {:.4f}\n", track_name(r.finalist.track), r.finalist.system_id, r.rank,
                               r.average_fad);
    }
  });

  // medoids
  Common med_c;
  std::string med_embeddings, med_finalists, med_out;
  std::optional<std::size_t> med_k;
  std::optional<int> med_restarts;
  auto* med = app.add_subcommand("medoids", "k-means medoids per (system, category)");
  add_common(med, med_c);
  med->add_option("--embeddings", med_embeddings, "system embeddings");
  med->add_option("--finalists", med_finalists, "limit to these systems");
  med->add_option("--k", med_k, "clusters per (system, category) (default 20)");
  med->add_option("--restarts", med_restarts, "seeded k-means restarts (default 10)");
  med->add_option("--out", med_out, "medoids CSV");
  med->callback([&] {
    PipelineConfig cfg = make_config(med_c);
    override(med_k, cfg.k);
    override(med_restarts, cfg.kmeans_restarts);
    const WorkLayout w(cfg.work_dir);
    const std::uint64_t seed = cfg.require_seed("medoids");
    std::vector<std::string> only;
    const fs::path fin = pick(med_finalists, med_embeddings.empty() ? w.finalists : fs::path());
    if (!fin.empty() && fs::exists(fin)) {
      for (const auto& f : read_finalists_csv(fin)) only.push_back(f.system_id);
    }
    KMeansOptions opts;
    opts.restarts = cfg.kmeans_restarts;
    opts.exec = cfg.exec;
    const auto set = compute_medoids(read_embedding_source(pick(med_embeddings, w.submission_emb)), cfg.k, seed, opts, only);
    write_medoids_csv(set, pick(med_out, w.medoids), cfg.provenance());
  });

  // diversity-files
  Common div_c;
  std::string div_medoids, div_audio, div_out, div_map;
  std::optional<double> div_gap;
  auto* div = app.add_subcommand("diversity-files", "Concatenate each system's medoids into obfuscated sequence files");
  add_common(div, div_c);
  div->add_option("--medoids", div_medoids, "medoids CSV");
  div->add_option("--audio", div_audio, "submissions directory");
  div->add_option("--out", div_out, "output directory");
  div->add_option("--map", div_map, "sealed token map (JSON)");
  div->add_option("--gap", div_gap, "seconds of silence between sounds (default 0.5)");
  div->callback([&] {
    PipelineConfig cfg = make_config(div_c);
    override(div_gap, cfg.gap_seconds);
    const WorkLayout w(cfg.work_dir);
    const std::uint64_t seed = cfg.require_seed("diversity");
    const fs::path audio = pick(div_audio, cfg.submissions);
    if (audio.empty()) throw Error("--audio is required");
    const auto files = write_diversity_files(read_medoids_csv(pick(div_medoids, w.medoids)),
                                             submission_clip_paths(discover_submissions(audio)),
                                             pick(div_out, w.diversity_dir), cfg.gap_seconds, seed,
                                             pick(div_map, w.sealed_map), cfg.provenance());
    std::cerr << fmt::format("{} sequence files\n", files.size());
  });

  // plan
  Common plan_c;
  std::string plan_finalists, plan_medoids, plan_anchors, plan_referents, plan_raters, plan_out, plan_audio,
      plan_map;
  std::vector<std::size_t> plan_band;
  std::optional<std::size_t> plan_min_cat, plan_k;
  auto* plan = app.add_subcommand("plan", "Build the counterbalanced, sealed listening-test plan");
  add_common(plan, plan_c);
  plan->add_option("--finalists", plan_finalists, "finalists CSV");
  plan->add_option("--medoids", plan_medoids, "medoids CSV");
  plan->add_option("--anchors", plan_anchors, "anchors CSV (category,clip_id,quality_pole,fit_pole,path)");
  plan->add_option("--referents", plan_referents, "referents CSV (category,clip_id,path)");
  plan->add_option("--raters", plan_raters, "raters CSV");
  plan->add_option("--audio", plan_audio, "submissions directory");
  plan->add_option("--diversity-map", plan_map, "sealed map from diversity-files");
  plan->add_option("--band", plan_band, "target ratings per category: lo hi")->expected(2);
  plan->add_option("--min-categories", plan_min_cat, "categories per rating rater");
  plan->add_option("--k", plan_k, "medoids per finalist");
  plan->add_option("--out", plan_out, "plan directory");
  plan->callback([&] {
    PipelineConfig cfg = make_config(plan_c);
    if (!plan_raters.empty()) cfg.raters = plan_raters;
    if (!plan_audio.empty()) cfg.submissions = plan_audio;
    if (plan_band.size() == 2) {
      cfg.band.band_lo = plan_band[0];
      cfg.band.band_hi = plan_band[1];
    }
    override(plan_min_cat, cfg.band.min_categories);
    override(plan_k, cfg.k);
    const bool explicit_inputs = !plan_anchors.empty() || !plan_referents.empty();
    WorkLayout w(cfg.work_dir);
    if (!explicit_inputs && plan_finalists.empty() && plan_medoids.empty() && plan_out.empty()) {
      status = stage_plan(cfg, w, std::cerr);
      return;
    }
    const std::uint64_t seed = cfg.require_seed("plan");
    PlanInputs in;
    in.finalists = read_finalists_csv(pick(plan_finalists, w.finalists));
    in.medoids = read_medoids_csv(pick(plan_medoids, w.medoids));
    in.anchors = read_anchors_csv(pick(plan_anchors, w.anchors), &in.clip_paths);
    in.referents = read_referents_csv(pick(plan_referents, w.referents), &in.clip_paths);
    if (cfg.raters.empty()) throw Error("--raters is required");
    in.raters = read_raters_csv(cfg.raters);
    if (cfg.submissions.empty()) throw Error("--audio is required");
    for (auto& [id, p] : submission_clip_paths(discover_submissions(cfg.submissions))) in.clip_paths[id] = p;
    const fs::path map = pick(plan_map, w.sealed_map);
    if (fs::exists(map)) {
      for (const auto& d : read_sealed_map(map)) in.diversity_files[{d.system_id, d.category}] = d.file;
    }
    in.assignment = cfg.band;
    in.shape = cfg.shape();
    const fs::path out = pick(plan_out, w.plans_dir);
    const ListeningPlan lp = build_listening_plan(in, seed, out, cfg.provenance());
    write_plan(lp, out);
    std::cerr << fmt::format("{} sessions written to {}\n", lp.sessions.size(), out.string());
  });

  // serve
  Common srv_c;
  std::string srv_plan_dir, srv_data_dir, srv_listen, srv_static, srv_token_env;
  bool srv_scripted = false, srv_no_fsync = false;
  auto* srv = app.add_subcommand("serve", "Run the rating collection HTTP service");
  add_common(srv, srv_c);
  srv->add_option("--plan-dir", srv_plan_dir, "directory holding sealed_plan.json");
  srv->add_option("--data-dir", srv_data_dir, "ratings log and session snapshot directory");
  srv->add_option("--listen", srv_listen, "host:port");
  srv->add_option("--static-dir", srv_static, "serve a rater UI from this directory");
  srv->add_option("--admin-token-env", srv_token_env, "environment variable holding the export token");
  srv->add_flag("--no-fsync", srv_no_fsync, "skip fsync after each record");
  srv->add_flag("--scripted-raters", srv_scripted, "run the fixture's scripted raters, then exit");
  srv->callback([&] {
    PipelineConfig cfg = make_config(srv_c);
    if (!srv_listen.empty()) cfg.listen = srv_listen;
    if (!srv_static.empty()) cfg.static_dir = srv_static;
    if (!srv_token_env.empty()) cfg.admin_token_env = srv_token_env;
    if (srv_no_fsync) cfg.fsync = false;
    WorkLayout w(cfg.work_dir);
    if (!srv_plan_dir.empty()) {
      w.plans_dir = srv_plan_dir;
      w.sealed_plan = w.plans_dir / "sealed_plan.json";
    }
    if (!srv_data_dir.empty()) {
      w.data_dir = srv_data_dir;
      w.ratings_log = w.data_dir / "ratings.jsonl";
    }
    RunOptions options;
    if (srv_scripted) options.raters = scripted_rater_hook(cfg);
    status = stage_serve(cfg, w, options, std::cerr);
  });

  // ingest
  Common ing_c;
  std::string ing_ratings, ing_plan, ing_out;
  auto* ing = app.add_subcommand("ingest", "Validate a ratings log against the sealed plan");
  add_common(ing, ing_c);
  ing->add_option("--ratings", ing_ratings, "ratings JSONL");
  ing->add_option("--plan", ing_plan, "sealed_plan.json");
  ing->add_option("--out", ing_out, "validated records JSONL");
  ing->callback([&] {
    PipelineConfig cfg = make_config(ing_c);
    WorkLayout w(cfg.work_dir);
    w.ratings_log = pick(ing_ratings, w.ratings_log);
    w.sealed_plan = pick(ing_plan, w.sealed_plan);
    w.ingested = pick(ing_out, w.ingested);
    status = stage_ingest(cfg, w, std::cerr);
  });

  // exclude
  Common exc_c;
  std::string exc_ratings, exc_plan, exc_finalists, exc_out, exc_report;
  std::optional<std::size_t> exc_threshold;
  bool exc_strict = false;
  auto* exc = app.add_subcommand("exclude", "Drop unreliable sessions, self-ratings and anchor trials");
  add_common(exc, exc_c);
  exc->add_option("--ratings", exc_ratings, "ingested records JSONL");
  exc->add_option("--plan", exc_plan, "sealed_plan.json");
  exc->add_option("--finalists", exc_finalists, "finalists CSV (system teams)");
  exc->add_option("--threshold", exc_threshold, "mis-rated anchors that exclude a session (default 5)");
  exc->add_flag("--strict", exc_strict, "count low-quality anchors as well");
  exc->add_option("--out", exc_out, "retained records JSONL");
  exc->add_option("--report", exc_report, "exclusion report JSON");
  exc->callback([&] {
    PipelineConfig cfg = make_config(exc_c);
    override(exc_threshold, cfg.exclusion.threshold);
    if (exc_strict) cfg.exclusion.strict = true;
    WorkLayout w(cfg.work_dir);
    w.ingested = pick(exc_ratings, w.ingested);
    w.sealed_plan = pick(exc_plan, w.sealed_plan);
    w.finalists = pick(exc_finalists, w.finalists);
    w.retained = pick(exc_out, w.retained);
    w.exclusions = pick(exc_report, w.exclusions);
    status = stage_exclude(cfg, w, std::cerr);
  });

  // aggregate
  Common agg_c;
  std::string agg_ratings, agg_plan, agg_out;
  auto* agg = app.add_subcommand("aggregate", "Per-system, per-category mean scores");
  add_common(agg, agg_c);
  agg->add_option("--ratings", agg_ratings, "retained records JSONL");
  agg->add_option("--plan", agg_plan, "sealed_plan.json");
  agg->add_option("--out", agg_out, "aggregates CSV");
  agg->callback([&] {
    PipelineConfig cfg = make_config(agg_c);
    WorkLayout w(cfg.work_dir);
    w.retained = pick(agg_ratings, w.retained);
    w.sealed_plan = pick(agg_plan, w.sealed_plan);
    w.aggregates = pick(agg_out, w.aggregates);
    status = stage_aggregate(cfg, w, std::cerr);
  });

  // rank
  Common rank_c;
  std::string rank_ratings, rank_plan, rank_fad, rank_weights, rank_combine, rank_out;
  auto* rank = app.add_subcommand("rank", "Weighted final ranking per track");
  add_common(rank, rank_c);
  rank->add_option("--ratings", rank_ratings, "retained records JSONL");
  rank->add_option("--plan", rank_plan, "sealed_plan.json");
  rank->add_option("--fad", rank_fad, "FAD-Eval CSV (tie-break)");
  rank->add_option("--weights", rank_weights, "quality,fit,diversity weights (default 1,1,0.5)");
  rank->add_option("--combine", rank_combine, "overall or per-category")->check(CLI::IsMember({"overall", "per-category"}));
  rank->add_option("--out", rank_out, "ranking JSON");
  rank->callback([&] {
    PipelineConfig cfg = make_config(rank_c);
    if (!rank_weights.empty()) cfg.weights = parse_weights(rank_weights);
    if (!rank_combine.empty()) cfg.combine = *parse_combine_mode(rank_combine);
    WorkLayout w(cfg.work_dir);
    w.retained = pick(rank_ratings, w.retained);
    w.sealed_plan = pick(rank_plan, w.sealed_plan);
    w.fad_eval = pick(rank_fad, w.fad_eval);
    w.ranking = pick(rank_out, w.ranking);
    status = stage_rank(cfg, w, std::cerr);
  });

  // report
  Common rep_c;
  std::string rep_out, rep_released;
  auto* rep = app.add_subcommand("report", "Final report with correlations, plus fig1.csv and fig2.csv");
  add_common(rep, rep_c);
  rep->add_option("--out", rep_out, "report JSON; figure CSVs are written beside it");
  rep->add_option("--released-scores", rep_released, "released per-system scores CSV");
  rep->callback([&] {
    PipelineConfig cfg = make_config(rep_c);
    if (!rep_released.empty()) cfg.released_scores = rep_released;
    WorkLayout w(cfg.work_dir);
    if (!rep_out.empty()) {
      w.report = rep_out;
      w.fig1 = w.report.parent_path() / "fig1.csv";
      w.fig2 = w.report.parent_path() / "fig2.csv";
    }
    status = stage_report(cfg, w, std::cerr);
  });

  // run
  Common run_c;
  std::string run_stages = "all";
  bool run_scripted = false;
  auto* run = app.add_subcommand("run", "Run pipeline stages in order");
  add_common(run, run_c);
  run->add_option("--stages", run_stages, "comma-separated stages or 'all'");
  run->add_flag("--scripted-raters", run_scripted, "serve stage: run the fixture's scripted raters");
  run->callback([&] {
    if (run_c.config.empty()) throw Error("--config is required");
    const auto stages = parse_stages(run_stages);
    PipelineConfig cfg = make_config(run_c);
    RunOptions options;
    if (run_scripted) options.raters = scripted_rater_hook(cfg);
    status = run_pipeline(cfg, stages, options);
  });

  // make-fixture
  std::string fx_out;
  std::uint64_t fx_seed = 20230601;
  auto* fx = app.add_subcommand("make-fixture", "Write the synthetic mock challenge");
  fx->add_option("--out", fx_out, "output directory")->required();
  fx->add_option("--seed", fx_seed, "fixture seed");
  fx->callback([&] {
    const FixtureLayout f = make_fixture(fx_out, fx_seed);
    std::cerr << fmt::format("fixture written; run: foley run --config {} --scripted-raters\n", f.config.string());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return status;
}
