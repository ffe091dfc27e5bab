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


#include "foley/pipeline.hpp"

#include <algorithm>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "foley/server.hpp"
#include "foley/wav.hpp"

namespace foley {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

json provenance_json(const Provenance& p) {
  return {{"config_hash", p.config_hash}, {"seed", p.seed}, {"tool_version", p.tool_version}};
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(1) + "\n"); }

std::string file_safe(std::string_view id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out;
}

std::string rel(const fs::path& target, const fs::path& base) {
  return fs::absolute(target).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal()).generic_string();
}

void add_provenance(EmbeddingMatrix& m, const Provenance& prov) {
  m.attributes["config_hash"] = prov.config_hash;
  m.attributes["seed"] = std::to_string(prov.seed);
  m.attributes["tool_version"] = prov.tool_version;
}

EmbeddingMatrix embed_clips(const std::vector<AudioClip>& clips, const std::vector<std::string>& groups,
                            const PipelineConfig& cfg) {
  EmbeddingMatrix m;
  if (cfg.embed_backend == "import") {
    if (!cfg.import_dir) throw Error("embed backend 'import' needs embed.import_dir");
    std::vector<ClipRef> refs;
    for (std::size_t i = 0; i < clips.size(); ++i) refs.push_back({clips[i].clip_id, groups[i], clips[i].category});
    return import_external_embeddings(*cfg.import_dir, refs,
                                      EmbedderSpec{cfg.import_model_id, cfg.import_dim, cfg.import_frames});
  }
  const auto vectors = builtin_embed_batch(clips, cfg.exec);
  m.model_id = builtin::kModelId;
  m.dim = builtin::kDim;
  for (std::size_t i = 0; i < clips.size(); ++i) m.append(clips[i].clip_id, groups[i], clips[i].category, vectors[i]);
  return m;
}

AudioClip load_clip(const fs::path& path, const std::string& clip_id, Category category) {
  const Pcm16Audio pcm = read_wav_pcm16(path);
  AudioClip clip;
  clip.samples = pcm.samples;
  clip.sample_rate = pcm.sample_rate;
  clip.channels = pcm.channels;
  clip.clip_id = clip_id;
  clip.category = category;
  if (!clip.conforms()) throw Error(fmt::format("{}: clip does not conform to the 4 s mono 22,050 Hz format", path.string()));
  return clip;
}

std::map<std::string, double> fad_averages(const std::vector<FadResult>& rows) {
  std::map<std::string, double> out;
  for (const auto& r : rows) out[r.system_id] = r.average;
  return out;
}

std::string admin_token_for(const PipelineConfig& cfg, const RunOptions& options) {
  if (!options.admin_token.empty()) return options.admin_token;
  const char* env = std::getenv(cfg.admin_token_env.c_str());
  return env ? env : "";
}

HttpServer* g_running_server = nullptr;

void stop_on_signal(int) {
  if (g_running_server) g_running_server->stop();
}

std::vector<RatingRecord> read_records(const fs::path& path) { return ingest_ratings(path).records; }

std::map<std::string, std::string> finalist_teams(const fs::path& finalists) {
  std::map<std::string, std::string> out;
  for (const auto& f : read_finalists_csv(finalists)) out[f.system_id] = f.team_id;
  return out;
}

}  // namespace

WorkLayout::WorkLayout(fs::path r) : root(std::move(r)) {
  clips_dir = root / "clips";
  manifest = root / "manifest.csv";
  split_report = root / "split_report.json";
  submission_report = root / "submission_report.json";
  reference_emb = root / "embeddings" / "reference.femb";
  submission_emb = root / "embeddings" / "submissions.femb";
  fad_dev = root / "fad_dev.csv";
  fad_eval = root / "fad_eval.csv";
  finalists = root / "finalists.csv";
  medoids = root / "medoids.csv";
  diversity_dir = root / "diversity";
  sealed_map = root / "sealed_map.json";
  anchors = root / "anchors.csv";
  referents = root / "referents.csv";
  plans_dir = root / "plans";
  sealed_plan = plans_dir / "sealed_plan.json";
  rater_plan = plans_dir / "rater_plan.json";
  data_dir = root / "data";
  ratings_log = data_dir / "ratings.jsonl";
  ingested = root / "ingested.jsonl";
  ingest_report = root / "ingest_report.json";
  retained = root / "retained.jsonl";
  exclusions = root / "exclusions.json";
  aggregates = root / "aggregates.csv";
  ranking = root / "ranking.json";
  report = root / "report.json";
  fig1 = root / "fig1.csv";
  fig2 = root / "fig2.csv";
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"preprocess", "embed",  "fad",     "screen",    "medoids",
                                                 "diversity",  "plan",   "serve",   "ingest",    "exclude",
                                                 "aggregate",  "rank",   "report"};
  return names;
}

std::vector<std::string> parse_stages(std::string_view text) {
  const auto& names = stage_names();
  if (trim(text) == "all") return names;
  std::set<std::string> wanted;
  for (const auto& part : split(text, ',')) {
    const std::string s = trim(part);
    if (s.empty()) continue;
    if (std::find(names.begin(), names.end(), s) == names.end()) {
      std::string list;
      for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
      throw Error(fmt::format("unknown stage '{}' (valid stages: {})", s, list));
    }
    wanted.insert(s);
  }
  if (wanted.empty()) throw Error("no stages given");
  std::vector<std::string> out;
  for (const auto& n : names) {
    if (wanted.count(n)) out.push_back(n);
  }
  return out;
}

void require_input(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw Error(fmt::format("missing input {} (produced by stage '{}')", path.string(), producer));
  }
}

Manifest preprocess_manifest(const Manifest& raw, const fs::path& out_dir, SegmentPolicy policy, Exec exec) {
  return [&] {
    Manifest out;
    out.dataset_name = raw.dataset_name;
    out.base_dir = out_dir;
    std::set<std::string> names;
    fs::create_directories(out_dir / "clips");
    for (const auto& e : raw.entries) {
      const std::string name = file_safe(e.clip_id) + ".wav";
      if (!names.insert(name).second) throw Error(fmt::format("clip ids collide on file name '{}'", name));
      const DecodedAudio audio = read_wav(raw.resolve(e));
      const auto samples = preprocess_samples(audio, policy, exec);
      write_wav_pcm16(out_dir / "clips" / name, samples, kClipRate, 1);
      ManifestEntry p = e;
      p.path = "clips/" + name;
      out.entries.push_back(std::move(p));
      ++out.counts[static_cast<std::size_t>(e.category)];
    }
    return out;
  }();
}

json split_report_json(const SplitReport& r, const Provenance& prov) {
  json leaks = json::array();
  for (const auto& l : r.leaks) {
    leaks.push_back({{"recording_id", l.recording_id},
                     {"development_clips", l.development_clips},
                     {"evaluation_clips", l.evaluation_clips}});
  }
  json counts = json::object();
  for (Category c : kCategories) counts[std::string(category_name(c))] = r.evaluation_counts[static_cast<std::size_t>(c)];
  json violations = json::array();
  for (const auto& v : r.count_violations) {
    violations.push_back({{"category", std::string(category_name(v.category))}, {"found", v.found}, {"expected", v.expected}});
  }
  return {{"provenance", provenance_json(prov)},
          {"ok", r.ok()},
          {"leaks", leaks},
          {"evaluation_counts", counts},
          {"count_violations", violations},
          {"development_total", r.development_total},
          {"expected_per_category", r.expected_per_category}};
}

json submission_reports_json(const std::vector<SubmissionReport>& reports, const Provenance& prov) {
  json arr = json::array();
  bool ok = true;
  for (const auto& r : reports) {
    ok = ok && r.ok();
    json counts = json::object();
    for (Category c : kCategories) counts[std::string(category_name(c))] = r.counts[static_cast<std::size_t>(c)];
    json violations = json::array();
    for (const auto& v : r.count_violations) {
      violations.push_back({{"category", std::string(category_name(v.category))}, {"found", v.found}, {"expected", v.expected}});
    }
    json formats = json::array();
    for (const auto& f : r.format_violations) formats.push_back({{"path", f.path}, {"reason", f.reason}});
    json dups = json::array();
    for (const auto& d : r.duplicates) dups.push_back({{"clip_id", d.clip_id}, {"development_clip_id", d.development_clip_id}});
    arr.push_back({{"system_id", r.system_id},
                   {"ok", r.ok()},
                   {"counts", counts},
                   {"count_violations", violations},
                   {"format_violations", formats},
                   {"duplicates", dups},
                   {"unexpected_entries", r.unexpected_entries}});
  }
  return {{"provenance", provenance_json(prov)}, {"ok", ok}, {"systems", arr}};
}

EmbeddingMatrix embed_reference(const Manifest& m, const PipelineConfig& cfg) {
  std::vector<AudioClip> clips;
  std::vector<std::string> groups;
  for (const auto& e : m.entries) {
    if (e.anchor || (e.split != Split::kDevelopment && e.split != Split::kEvaluation)) continue;
    clips.push_back(load_clip(m.resolve(e), e.clip_id, e.category));
    groups.emplace_back(split_name(e.split));
  }
  EmbeddingMatrix out = embed_clips(clips, groups, cfg);
  add_provenance(out, cfg.provenance());
  return out;
}

EmbeddingMatrix embed_submissions(const std::vector<SubmissionInfo>& systems, const PipelineConfig& cfg) {
  std::vector<AudioClip> clips;
  std::vector<std::string> groups;
  for (const auto& s : systems) {
    for (const auto& c : list_submission_clips(s)) {
      clips.push_back(load_clip(c.path, c.clip_id, c.category));
      groups.push_back(s.system_id);
    }
  }
  EmbeddingMatrix out = embed_clips(clips, groups, cfg);
  for (const auto& s : systems) {
    out.attributes["track." + s.system_id] = std::string(track_name(s.track));
    out.attributes["team." + s.system_id] = s.team_id;
  }
  add_provenance(out, cfg.provenance());
  return out;
}

std::vector<SubmissionInfo> systems_from_embeddings(const EmbeddingMatrix& m) {
  std::vector<SubmissionInfo> out;
  std::set<std::string> seen;
  for (const auto& g : m.groups) {
    if (!seen.insert(g).second) continue;
    SubmissionInfo info;
    info.system_id = g;
    auto t = m.attributes.find("track." + g);
    if (t != m.attributes.end()) {
      auto track = parse_track(t->second);
      if (!track) throw Error(fmt::format("bad track attribute for {}", g));
      info.track = *track;
    }
    auto team = m.attributes.find("team." + g);
    if (team != m.attributes.end()) info.team_id = team->second;
    out.push_back(std::move(info));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.system_id < b.system_id; });
  return out;
}

std::vector<FadResult> compute_fad(const EmbeddingMatrix& systems, const EmbeddingMatrix& reference, Split split,
                                   Exec exec) {
  if (systems.model_id != reference.model_id) {
    throw Error(fmt::format("embedding models differ: {} vs {}", systems.model_id, reference.model_id));
  }
  const CategoryRows ref = category_rows(reference, split_name(split));
  std::vector<SystemRows> rows;
  for (const auto& s : systems_from_embeddings(systems)) {
    rows.push_back({s.system_id, s.track, category_rows(systems, s.system_id)});
  }
  return fad_table(rows, ref, split == Split::kDevelopment ? "dev" : "eval", exec);
}

std::vector<FinalistRow> screen_finalists(const std::vector<FadResult>& fad_eval,
                                          const std::vector<SubmissionInfo>& systems, std::size_t top_k) {
  std::map<std::string, const SubmissionInfo*> by_id;
  for (const auto& s : systems) by_id[s.system_id] = &s;
  std::vector<FinalistRow> out;
  for (Track t : {Track::kA, Track::kB}) {
    std::vector<FadResult> track;
    for (const auto& r : fad_eval) {
      if (r.track == t) track.push_back(r);
    }
    if (track.empty()) continue;
    const auto top = top_k_by_average(track, top_k);
    for (std::size_t i = 0; i < top.size(); ++i) {
      auto it = std::find_if(track.begin(), track.end(), [&](const FadResult& r) { return r.system_id == top[i]; });
      FinalistRow row;
      row.finalist.system_id = top[i];
      row.finalist.track = t;
      if (auto s = by_id.find(top[i]); s != by_id.end()) row.finalist.team_id = s->second->team_id;
      row.rank = i + 1;
      row.average_fad = it->average;
      out.push_back(std::move(row));
    }
  }
  return out;
}

void write_finalists_csv(const std::vector<FinalistRow>& rows, const fs::path& path, const Provenance& prov) {
  std::ostringstream out;
  out << prov.csv_comment();
  out << "system_id,track,team_id,rank,average_fad\n";
  for (const auto& r : rows) {
    out << csv_escape(r.finalist.system_id) << ',' << track_name(r.finalist.track) << ','
        << csv_escape(r.finalist.team_id) << ',' << r.rank << ',' << format_double(r.average_fad) << '\n';
  }
  write_file_atomic(path, out.str());
}

std::map<std::string, fs::path> submission_clip_paths(const std::vector<SubmissionInfo>& systems) {
  std::map<std::string, fs::path> out;
  for (const auto& s : systems) {
    for (const auto& c : list_submission_clips(s)) out[c.clip_id] = c.path;
  }
  return out;
}

std::vector<DiversityFile> write_diversity_files(const MedoidSet& medoids, const std::map<std::string, fs::path>& clip_paths,
                                                 const fs::path& out_dir, double gap_seconds, std::uint64_t seed,
                                                 const fs::path& map_path, const Provenance& prov) {
  std::vector<std::string> ids;
  for (const auto& [key, m] : medoids.entries) ids.push_back(key.first);
  const auto tokens = obfuscation_tokens(ids, seed);
  fs::create_directories(out_dir);
  std::vector<DiversityFile> out;
  json files = json::array();
  for (const auto& [key, list] : medoids.entries) {
    std::map<std::string, std::vector<std::int16_t>> clips;
    for (const auto& md : list) {
      auto it = clip_paths.find(md.clip_id);
      if (it == clip_paths.end()) throw Error(fmt::format("missing clip '{}' for diversity file", md.clip_id));
      clips[md.clip_id] = read_wav_pcm16(it->second).samples;
    }
    const auto seq = assemble_diversity_sequence(list, clips, key.first, key.second, gap_seconds, tokens.at(key.first));
    const fs::path file = out_dir / seq.file_name;
    write_wav_pcm16(file, seq.samples, kClipRate, 1);
    out.push_back({key.first, key.second, seq.token, file});
    files.push_back({{"system_id", key.first},
                     {"category", std::string(category_name(key.second))},
                     {"token", seq.token},
                     {"file", rel(file, map_path.parent_path())}});
  }
  write_json(map_path, {{"provenance", provenance_json(prov)}, {"gap_seconds", gap_seconds}, {"files", files}});
  return out;
}

std::vector<DiversityFile> read_sealed_map(const fs::path& path) {
  const json j = json::parse(read_file(path));
  std::vector<DiversityFile> out;
  for (const auto& f : j.at("files")) {
    const fs::path p(f.at("file").get<std::string>());
    out.push_back({f.at("system_id").get<std::string>(), category_from_string(f.at("category").get<std::string>()),
                   f.at("token").get<std::string>(), p.is_absolute() ? p : path.parent_path() / p});
  }
  return out;
}

void write_listening_inputs(const Manifest& processed, const fs::path& anchors_csv, const fs::path& referents_csv) {
  std::ostringstream a, r;
  a << "category,clip_id,quality_pole,fit_pole,path\n";
  r << "category,clip_id,path\n";
  for (const auto& e : processed.entries) {
    if (e.anchor) {
      a << category_name(e.category) << ',' << csv_escape(e.clip_id) << ',' << pole_name(e.anchor->quality) << ','
        << pole_name(e.anchor->fit) << ',' << csv_escape(rel(processed.resolve(e), anchors_csv.parent_path())) << '\n';
    } else if (e.referent) {
      r << category_name(e.category) << ',' << csv_escape(e.clip_id) << ','
        << csv_escape(rel(processed.resolve(e), referents_csv.parent_path())) << '\n';
    }
  }
  write_file_atomic(anchors_csv, a.str());
  write_file_atomic(referents_csv, r.str());
}

int stage_preprocess(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  const Provenance prov = cfg.provenance();
  const Manifest raw = load_manifest(cfg.manifest);
  const Manifest processed = preprocess_manifest(raw, w.root, cfg.policy, cfg.exec);
  write_manifest(processed, w.manifest, &prov);
  log << fmt::format("[preprocess] {} clips normalized\n", processed.entries.size());

  int status = 0;
  const SplitReport split = validate_split(processed, {cfg.expected_eval, true});
  write_json(w.split_report, split_report_json(split, prov));
  if (!split.ok()) {
    log << fmt::format("[preprocess] split violations: {} leaks, {} count violations\n", split.leaks.size(),
                       split.count_violations.size());
    status = 1;
  }
  if (!cfg.submissions.empty()) {
    const ContentIndex dev = build_content_index(processed, Split::kDevelopment);
    std::vector<SubmissionReport> reports;
    for (const auto& s : discover_submissions(cfg.submissions)) {
      reports.push_back(validate_submission(s, cfg.expected_eval, dev));
      if (!reports.back().ok()) {
        log << fmt::format("[preprocess] submission {} has violations\n", s.system_id);
        status = 1;
      }
    }
    write_json(w.submission_report, submission_reports_json(reports, prov));
  }
  return status;
}

int stage_embed(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.manifest, "preprocess");
  fs::create_directories(w.reference_emb.parent_path());
  const EmbeddingMatrix ref = embed_reference(load_manifest(w.manifest), cfg);
  write_embeddings(ref, w.reference_emb);
  if (cfg.submissions.empty()) throw Error("no submissions directory configured");
  const EmbeddingMatrix sub = embed_submissions(discover_submissions(cfg.submissions), cfg);
  write_embeddings(sub, w.submission_emb);
  log << fmt::format("[embed] {} reference clips, {} submission clips ({})\n", ref.clip_count(), sub.clip_count(),
                     ref.model_id);
  return 0;
}

int stage_fad(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.reference_emb, "embed");
  require_input(w.submission_emb, "embed");
  const EmbeddingMatrix ref = read_embeddings(w.reference_emb);
  const EmbeddingMatrix sub = read_embeddings(w.submission_emb);
  const Provenance prov = cfg.provenance();
  write_fad_csv(compute_fad(sub, ref, Split::kDevelopment, cfg.exec), w.fad_dev, prov);
  write_fad_csv(compute_fad(sub, ref, Split::kEvaluation, cfg.exec), w.fad_eval, prov);
  log << fmt::format("[fad] wrote {} and {}\n", w.fad_dev.filename().string(), w.fad_eval.filename().string());
  return 0;
}

int stage_screen(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.fad_eval, "fad");
  require_input(w.submission_emb, "embed");
  const auto systems = systems_from_embeddings(read_embeddings(w.submission_emb));
  const auto rows = screen_finalists(read_fad_csv(w.fad_eval), systems, cfg.top_k);
  write_finalists_csv(rows, w.finalists, cfg.provenance());
  log << fmt::format("[screen] {} finalists\n", rows.size());
  return 0;
}

int stage_medoids(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.finalists, "screen");
  require_input(w.submission_emb, "embed");
  const std::uint64_t seed = cfg.require_seed("medoids");
  std::vector<std::string> ids;
  for (const auto& f : read_finalists_csv(w.finalists)) ids.push_back(f.system_id);
  KMeansOptions opts;
  opts.restarts = cfg.kmeans_restarts;
  opts.exec = cfg.exec;
  const MedoidSet set = compute_medoids(read_embeddings(w.submission_emb), cfg.k, seed, opts, ids);
  write_medoids_csv(set, w.medoids, cfg.provenance());
  log << fmt::format("[medoids] {} (system, category) groups, k={}\n", set.entries.size(), cfg.k);
  return 0;
}

int stage_diversity(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.medoids, "medoids");
  const std::uint64_t seed = cfg.require_seed("diversity");
  const auto files = write_diversity_files(read_medoids_csv(w.medoids), submission_clip_paths(discover_submissions(cfg.submissions)),
                                           w.diversity_dir, cfg.gap_seconds, seed, w.sealed_map, cfg.provenance());
  log << fmt::format("[diversity] {} sequence files\n", files.size());
  return 0;
}

int stage_plan(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.finalists, "screen");
  require_input(w.medoids, "medoids");
  require_input(w.manifest, "preprocess");
  const std::uint64_t seed = cfg.require_seed("plan");
  if (cfg.raters.empty()) throw Error("no raters file configured");
  write_listening_inputs(load_manifest(w.manifest), w.anchors, w.referents);

  PlanInputs in;
  in.finalists = read_finalists_csv(w.finalists);
  in.medoids = read_medoids_csv(w.medoids);
  in.anchors = read_anchors_csv(w.anchors, &in.clip_paths);
  in.referents = read_referents_csv(w.referents, &in.clip_paths);
  in.raters = read_raters_csv(cfg.raters);
  for (auto& [id, p] : submission_clip_paths(discover_submissions(cfg.submissions))) in.clip_paths[id] = p;
  if (fs::exists(w.sealed_map)) {
    for (const auto& d : read_sealed_map(w.sealed_map)) in.diversity_files[{d.system_id, d.category}] = d.file;
  }
  in.assignment = cfg.band;
  in.shape = cfg.shape();
  const ListeningPlan plan = build_listening_plan(in, seed, w.plans_dir, cfg.provenance());
  write_plan(plan, w.plans_dir);
  log << fmt::format("[plan] {} sessions", plan.sessions.size());
  if (!plan.assignment.shortfall.empty()) {
    std::vector<std::string> names;
    for (Category c : plan.assignment.shortfall) names.emplace_back(category_name(c));
    log << fmt::format("; coverage below {} for: {}", cfg.band.band_lo, fmt::join(names, ", "));
  }
  log << "\n";
  return 0;
}

int stage_serve(const PipelineConfig& cfg, const WorkLayout& w, const RunOptions& options, std::ostream& log) {
  require_input(w.sealed_plan, "plan");
  ServiceOptions so;
  so.plan_dir = w.plans_dir;
  so.data_dir = w.data_dir;
  so.admin_token = admin_token_for(cfg, options);
  so.fsync = cfg.fsync;
  SessionService service(so);
  auto [host, port] = parse_listen(cfg.listen);
  ServerOptions sopts;
  sopts.host = host;
  sopts.port = options.raters ? 0 : port;
  sopts.static_dir = cfg.static_dir;
  HttpServer server(service, sopts);
  const int bound = server.bind();
  const std::string base = fmt::format("http://{}:{}", host, bound);
  if (options.raters) {
    server.start();
    log << fmt::format("[serve] scripted raters against {}\n", base);
    try {
      options.raters(base, service.plan());
    } catch (...) {
      server.stop();
      throw;
    }
    server.stop();
    return 0;
  }
  log << fmt::format("[serve] listening on {} (Ctrl-C to stop)\n", base);
  log.flush();
  g_running_server = &server;
  auto prev_int = std::signal(SIGINT, stop_on_signal);
  auto prev_term = std::signal(SIGTERM, stop_on_signal);
  server.serve();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  g_running_server = nullptr;
  return 0;
}

int stage_ingest(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.sealed_plan, "plan");
  require_input(w.ratings_log, "serve");
  const ListeningPlan plan = read_plan(w.sealed_plan);
  const IngestResult in = ingest_ratings(w.ratings_log, &plan);
  write_records_jsonl(in.records, w.ingested);
  json dups = json::array();
  for (const auto& d : in.duplicates) dups.push_back({{"line", d.line}, {"session_id", d.session_id}, {"trial_id", d.trial_id}});
  write_json(w.ingest_report, {{"provenance", provenance_json(cfg.provenance())},
                               {"records", in.records.size()},
                               {"referent_acks", in.referent_acks},
                               {"duplicates", dups}});
  log << fmt::format("[ingest] {} records, {} duplicates\n", in.records.size(), in.duplicates.size());
  return in.duplicates.empty() ? 0 : 1;
}

int stage_exclude(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.ingested, "ingest");
  require_input(w.finalists, "screen");
  const ListeningPlan plan = read_plan(w.sealed_plan);
  const auto result = apply_exclusions(read_records(w.ingested), plan, finalist_teams(w.finalists), cfg.exclusion);
  write_records_jsonl(result.retained, w.retained);
  write_json(w.exclusions, exclusion_report_json(result.report, cfg.provenance()));
  log << fmt::format("[exclude] {} sessions excluded, {} records retained\n", result.report.excluded_sessions().size(),
                     result.retained.size());
  return 0;
}

int stage_aggregate(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.retained, "exclude");
  const ListeningPlan plan = read_plan(w.sealed_plan);
  const auto scores = aggregate(read_records(w.retained), plan);
  write_aggregates_csv(scores, w.aggregates, cfg.provenance());
  std::size_t missing = 0;
  for (const auto& s : scores) missing += s.missing.empty() ? 0 : 1;
  log << fmt::format("[aggregate] {} systems, {} with missing scores\n", scores.size(), missing);
  return 0;
}

int stage_rank(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.retained, "exclude");
  require_input(w.fad_eval, "fad");
  const ListeningPlan plan = read_plan(w.sealed_plan);
  const auto scores = aggregate(read_records(w.retained), plan);
  const auto ranking = final_rank(scores, cfg.weights, fad_averages(read_fad_csv(w.fad_eval)), cfg.combine);
  write_json(w.ranking, ranking_json(ranking, cfg.provenance()));
  for (const auto& [track, list] : ranking.tracks) {
    std::vector<std::string> ids;
    for (const auto& r : list) ids.push_back(r.system_id);
    log << fmt::format("[rank] track {}: {}\n", track_name(track), fmt::join(ids, " > "));
  }
  return 0;
}

json build_report(const PipelineConfig& cfg, const ListeningPlan& plan, const std::vector<FadResult>& fad_dev,
                  const std::vector<FadResult>& fad_eval, const ExclusionResult& exclusions,
                  const std::vector<AggregateScore>& aggregates, const FinalRanking& ranking,
                  const CorrelationReport& correlations) {
  auto fad_rows = [](const std::vector<FadResult>& rows) {
    json arr = json::array();
    for (const auto& r : rows) {
      json per = json::object();
      for (Category c : kCategories) per[std::string(category_name(c))] = r.per_category[static_cast<std::size_t>(c)];
      arr.push_back({{"system_id", r.system_id}, {"track", std::string(track_name(r.track))}, {"average", r.average},
                     {"per_category", per}});
    }
    return arr;
  };
  auto scale = [](const ScaleMean& m) { return json{{"mean", m.mean ? json(*m.mean) : json(nullptr)}, {"n", m.count}}; };
  json scores = json::array();
  for (const auto& a : aggregates) {
    json per = json::object();
    for (Category c : kCategories) {
      const auto& cs = a.per_category[static_cast<std::size_t>(c)];
      if (!cs.quality.mean && !cs.fit.mean && !cs.diversity.mean) continue;
      per[std::string(category_name(c))] = {{"quality", scale(cs.quality)}, {"fit", scale(cs.fit)}, {"diversity", scale(cs.diversity)}};
    }
    scores.push_back({{"system_id", a.system_id},
                      {"track", std::string(track_name(a.track))},
                      {"quality", scale(a.quality)},
                      {"fit", scale(a.fit)},
                      {"diversity", scale(a.diversity)},
                      {"per_category", per},
                      {"missing", a.missing}});
  }
  json finalists = json::array();
  for (const auto& f : plan.finalists) {
    finalists.push_back({{"system_id", f.system_id}, {"track", std::string(track_name(f.track))}, {"team_id", f.team_id}});
  }
  json coverage = json::object();
  for (Category c : kCategories) coverage[std::string(category_name(c))] = plan.assignment.coverage[static_cast<std::size_t>(c)];
  json shortfall = json::array();
  for (Category c : plan.assignment.shortfall) shortfall.push_back(std::string(category_name(c)));
  json rank = ranking_json(ranking, cfg.provenance());
  rank.erase("provenance");

  json report = {
      {"provenance", provenance_json(cfg.provenance())},
      {"finalists", finalists},
      {"fad", {{"dev", fad_rows(fad_dev)}, {"eval", fad_rows(fad_eval)}}},
      {"listening_test",
       {{"sessions_planned", plan.sessions.size()},
        {"sessions_rated", exclusions.report.sessions.size()},
        {"excluded_sessions", exclusions.report.excluded_sessions()},
        {"self_ratings_removed", exclusions.report.self_ratings_removed},
        {"anchors_dropped", exclusions.report.anchors_dropped},
        {"retained_records", exclusions.retained.size()},
        {"coverage", coverage},
        {"shortfall", shortfall}}},
      {"scores", scores},
      {"ranking", rank},
      {"correlations", correlation_json(correlations)},
  };
  return report;
}

int stage_report(const PipelineConfig& cfg, const WorkLayout& w, std::ostream& log) {
  require_input(w.retained, "exclude");
  require_input(w.fad_dev, "fad");
  require_input(w.fad_eval, "fad");
  const ListeningPlan plan = read_plan(w.sealed_plan);
  const auto fad_dev = read_fad_csv(w.fad_dev);
  const auto fad_eval = read_fad_csv(w.fad_eval);
  const auto exclusions = apply_exclusions(read_records(w.ingested), plan, finalist_teams(w.finalists), cfg.exclusion);
  const auto scores = aggregate(exclusions.retained, plan);
  const auto ranking = final_rank(scores, cfg.weights, fad_averages(fad_eval), cfg.combine);
  // The correlation analyses cover the finalists only.
  std::set<std::string> finalists;
  for (const auto& f : plan.finalists) finalists.insert(f.system_id);
  std::vector<FadResult> dev_f, eval_f;
  for (const auto& r : fad_dev) if (finalists.count(r.system_id)) dev_f.push_back(r);
  for (const auto& r : fad_eval) if (finalists.count(r.system_id)) eval_f.push_back(r);
  const auto corr = correlation_report(scores, exclusions.retained, plan, dev_f, eval_f, ranking);
  json report = build_report(cfg, plan, fad_dev, fad_eval, exclusions, scores, ranking, corr);

  std::optional<fs::path> released = cfg.released_scores;
  if (!released) {
    if (const char* env = std::getenv("FOLEY_RELEASED_SCORES"); env && *env) released = fs::path(env);
  }
  if (released) {
    const auto rs = released_score_correlations(*released);
    report["released_data"] = {{"spearman_fad_eval_vs_final", rs.fad_eval_vs_final.value ? json(*rs.fad_eval_vs_final.value) : json(nullptr)},
                               {"spearman_fad_dev_vs_final", rs.fad_dev_vs_final.value ? json(*rs.fad_dev_vs_final.value) : json(nullptr)},
                               {"n", rs.fad_eval_vs_final.n}};
  }
  write_json(w.report, report);
  write_fig1_csv(fad_dev, fad_eval, w.fig1, cfg.provenance());
  write_fig2_csv(ranking, fad_dev, fad_eval, w.fig2, cfg.provenance());
  log << fmt::format("[report] wrote {}, {}, {}\n", w.report.filename().string(), w.fig1.filename().string(),
                     w.fig2.filename().string());
  return 0;
}

int run_pipeline(const PipelineConfig& cfg, const std::vector<std::string>& stages, const RunOptions& options) {
  std::ostream& log = options.log ? *options.log : std::cerr;
  const WorkLayout w(cfg.work_dir);
  fs::create_directories(w.root);
  int status = 0;
  for (const auto& s : stages) {
    int rc = 0;
    if (s == "preprocess") rc = stage_preprocess(cfg, w, log);
    else if (s == "embed") rc = stage_embed(cfg, w, log);
    else if (s == "fad") rc = stage_fad(cfg, w, log);
    else if (s == "screen") rc = stage_screen(cfg, w, log);
    else if (s == "medoids") rc = stage_medoids(cfg, w, log);
    else if (s == "diversity") rc = stage_diversity(cfg, w, log);
    else if (s == "plan") rc = stage_plan(cfg, w, log);
    else if (s == "serve") rc = stage_serve(cfg, w, options, log);
    else if (s == "ingest") rc = stage_ingest(cfg, w, log);
    else if (s == "exclude") rc = stage_exclude(cfg, w, log);
    else if (s == "aggregate") rc = stage_aggregate(cfg, w, log);
    else if (s == "rank") rc = stage_rank(cfg, w, log);
    else if (s == "report") rc = stage_report(cfg, w, log);
    else throw Error(fmt::format("unknown stage '{}'", s));
    status = std::max(status, rc);
  }
  return status;
}

}  // namespace foley
