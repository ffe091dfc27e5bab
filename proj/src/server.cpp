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


#include "foley/server.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <httplib.h>

namespace foley {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string utc_now() {
  const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
  const auto secs = std::chrono::time_point_cast<std::chrono::seconds>(now);
  const auto ms = (now - secs).count();
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", secs, ms);
}

std::vector<std::string> scales_for(TrialKind k) {
  switch (k) {
    case TrialKind::kReferent: return {};
    case TrialKind::kRating: return {"quality", "fit"};
    case TrialKind::kDiversity: return {"diversity"};
  }
  return {};
}

bool same_scales(const ResponsePayload& a, const ResponsePayload& b) {
  return a.quality == b.quality && a.fit == b.fit && a.diversity == b.diversity;
}

std::optional<int> payload_scale(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw ServiceError(400, "bad_scale", fmt::format("'{}' must be an integer", key));
  const auto v = it->get<std::int64_t>();
  if (v < kScaleMin || v > kScaleMax) {
    throw ServiceError(400, "out_of_range", fmt::format("'{}' = {} outside {}..{}", key, v, kScaleMin, kScaleMax));
  }
  return static_cast<int>(v);
}

}  // namespace

std::string_view session_state_name(SessionState s) { return s == SessionState::kActive ? "active" : "complete"; }

json session_json(const SessionInfo& s) {
  return {{"session_id", s.session_id},
          {"rater_id", s.rater_id},
          {"category", s.category},
          {"cursor", s.cursor},
          {"trial_count", s.trial_count},
          {"state", std::string(session_state_name(s.state))},
          {"created", s.created},
          {"updated", s.updated}};
}

ResponsePayload parse_response_payload(const json& body) {
  if (!body.is_object()) throw ServiceError(400, "bad_request", "body must be a JSON object");
  auto it = body.find("trial_id");
  if (it == body.end() || !it->is_string()) throw ServiceError(400, "bad_request", "trial_id is required");
  ResponsePayload p;
  p.trial_id = it->get<std::string>();
  p.quality = payload_scale(body, "quality");
  p.fit = payload_scale(body, "fit");
  p.diversity = payload_scale(body, "diversity");
  if (auto lc = body.find("listen_count"); lc != body.end() && !lc->is_null()) {
    if (!lc->is_number_integer() || lc->get<std::int64_t>() < 1) {
      throw ServiceError(400, "bad_request", "listen_count must be an integer >= 1");
    }
    p.listen_count = lc->get<int>();
  }
  return p;
}

SessionService::SessionService(ServiceOptions options) : options_(std::move(options)) {
  if (!options_.clock) options_.clock = utc_now;
  plan_ = read_plan(options_.plan_dir / "sealed_plan.json");
  for (const auto& s : plan_.sessions) {
    for (std::size_t i = 0; i < s.trials.size(); ++i) token_index_[s.trials[i].clip_token] = {&s, i};
  }
  fs::create_directories(options_.data_dir);
  recover();
  log_fd_ = ::open(log_path().c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (log_fd_ < 0) throw Error(fmt::format("cannot open {}: {}", log_path().string(), std::strerror(errno)));
}

SessionService::~SessionService() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

fs::path SessionService::log_path() const { return options_.data_dir / "ratings.jsonl"; }
fs::path SessionService::snapshot_path() const { return options_.data_dir / "sessions.json"; }
std::string SessionService::now() const { return options_.clock(); }

void SessionService::recover() {
  if (fs::exists(snapshot_path())) {
    const json snap = json::parse(read_file(snapshot_path()));
    for (const auto& js : snap.at("sessions")) {
      const std::string id = js.at("session_id").get<std::string>();
      const SessionPlan* sp = plan_.find_session(id);
      if (!sp) throw Error(fmt::format("snapshot names session '{}' absent from the plan", id));
      auto l = std::make_unique<Live>();
      l->plan = sp;
      l->info = {id, sp->rater_id, sp->category, 0, sp->trials.size(), SessionState::kActive,
                 js.at("created").get<std::string>(), js.at("updated").get<std::string>()};
      sessions_[id] = std::move(l);
    }
  }
  if (fs::exists(log_path())) {
    std::string text = read_file(log_path());
    const std::size_t keep = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
    if (keep != text.size()) {
      // A torn final line was never acknowledged.
      fs::resize_file(log_path(), keep);
      text.resize(keep);
    }
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
      const std::size_t end = text.find('\n', pos);
      const std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (trim(line).empty()) continue;
      const json j = json::parse(line);
      const std::string id = j.at("session_id").get<std::string>();
      const SessionPlan* sp = plan_.find_session(id);
      if (!sp) throw Error(fmt::format("{}:{}: unknown session '{}'", log_path().string(), line_no, id));
      auto& l = sessions_[id];
      if (!l) {
        l = std::make_unique<Live>();
        l->plan = sp;
        const std::string ts = j.value("timestamp", "");
        l->info = {id, sp->rater_id, sp->category, 0, sp->trials.size(), SessionState::kActive, ts, ts};
      }
      const std::string trial_id = j.at("trial_id").get<std::string>();
      if (l->answers.size() >= sp->trials.size() || sp->trials[l->answers.size()].trial_id != trial_id) {
        throw Error(fmt::format("{}:{}: trial {} breaks the planned order of session {}", log_path().string(), line_no,
                                trial_id, id));
      }
      ResponsePayload p;
      p.trial_id = trial_id;
      if (j.contains("quality")) p.quality = j["quality"].get<int>();
      if (j.contains("fit")) p.fit = j["fit"].get<int>();
      if (j.contains("diversity")) p.diversity = j["diversity"].get<int>();
      p.listen_count = j.value("listen_count", 1);
      l->answers.push_back(p);
      if (j.contains("timestamp")) l->info.updated = j["timestamp"].get<std::string>();
    }
  }
  for (auto& [id, l] : sessions_) {
    l->info.cursor = l->answers.size();
    l->info.state = l->info.cursor == l->info.trial_count ? SessionState::kComplete : SessionState::kActive;
    snapshot_[id] = l->info;
  }
  if (!sessions_.empty()) {
    json arr = json::array();
    for (const auto& [id, info] : snapshot_) arr.push_back(session_json(info));
    write_file_atomic(snapshot_path(), json{{"sessions", arr}}.dump(1) + "\n");
  }
}

void SessionService::append_log(const json& line) {
  const std::string bytes = line.dump() + "\n";
  std::lock_guard lock(log_mutex_);
  // One write per record, so a crash leaves at most a torn tail that recovery drops.
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(log_fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(fmt::format("ratings log write failed: {}", std::strerror(errno)));
    }
    done += static_cast<std::size_t>(n);
  }
  if (options_.fsync && ::fsync(log_fd_) != 0) {
    throw Error(fmt::format("ratings log fsync failed: {}", std::strerror(errno)));
  }
}

void SessionService::write_snapshot(const SessionInfo& changed) {
  std::lock_guard lock(snapshot_mutex_);
  snapshot_[changed.session_id] = changed;
  json arr = json::array();
  for (const auto& [id, info] : snapshot_) arr.push_back(session_json(info));
  write_file_atomic(snapshot_path(), json{{"sessions", arr}}.dump(1) + "\n");
}

SessionService::Live& SessionService::live(const std::string& session_id) const {
  std::lock_guard lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown_session", fmt::format("no session '{}'", session_id));
  return *it->second;
}

std::pair<SessionInfo, bool> SessionService::create_session(const std::string& rater_id, const std::string& category) {
  const bool known_rater = std::any_of(plan_.raters.begin(), plan_.raters.end(),
                                       [&](const RaterInfo& r) { return r.rater_id == rater_id; });
  if (!known_rater) throw ServiceError(404, "unknown_rater", fmt::format("rater '{}' is not in the plan", rater_id));
  const SessionPlan* sp = plan_.find_session(rater_id, category);
  if (!sp) {
    throw ServiceError(404, "no_plan", fmt::format("rater '{}' has no session for '{}'", rater_id, category));
  }
  std::unique_lock lock(sessions_mutex_);
  if (auto it = sessions_.find(sp->session_id); it != sessions_.end()) {
    Live& l = *it->second;
    lock.unlock();
    std::lock_guard sl(l.mutex);
    return {l.info, false};
  }
  auto l = std::make_unique<Live>();
  l->plan = sp;
  const std::string ts = now();
  l->info = {sp->session_id, rater_id, sp->category, 0, sp->trials.size(),
             sp->trials.empty() ? SessionState::kComplete : SessionState::kActive, ts, ts};
  const SessionInfo info = l->info;
  // Persist before the session becomes visible.
  write_snapshot(info);
  sessions_[sp->session_id] = std::move(l);
  return {info, true};
}

SessionInfo SessionService::session(const std::string& session_id) const {
  Live& l = live(session_id);
  std::lock_guard sl(l.mutex);
  return l.info;
}

json SessionService::next_trial(const std::string& session_id) const {
  Live& l = live(session_id);
  std::unique_lock sl(l.mutex);
  const std::size_t cursor = l.info.cursor;
  if (cursor < l.plan->trials.size()) {
    const Trial& t = l.plan->trials[cursor];
    const double total = static_cast<double>(l.plan->trials.size());
    return {{"type", "trial"},
            {"session_id", session_id},
            {"trial_id", t.trial_id},
            {"kind", std::string(trial_kind_name(t.kind))},
            {"audio_url", "/api/audio/" + t.clip_token},
            {"scales", scales_for(t.kind)},
            {"position", cursor},
            {"total", l.plan->trials.size()},
            {"progress", static_cast<double>(cursor) / total}};
  }
  const std::string rater = l.info.rater_id;
  sl.unlock();
  std::vector<std::string> remaining;
  for (const auto& s : plan_.sessions) {
    if (s.rater_id != rater || s.session_id == session_id) continue;
    std::unique_lock lock(sessions_mutex_);
    auto it = sessions_.find(s.session_id);
    if (it == sessions_.end()) {
      remaining.push_back(s.category);
      continue;
    }
    Live& other = *it->second;
    lock.unlock();
    std::lock_guard ol(other.mutex);
    if (other.info.state != SessionState::kComplete) remaining.push_back(s.category);
  }
  if (remaining.empty()) return {{"type", "done"}, {"session_id", session_id}};
  return {{"type", "break"}, {"session_id", session_id}, {"remaining", remaining}};
}

SubmitResult SessionService::submit_response(const std::string& session_id, const ResponsePayload& payload) {
  Live& l = live(session_id);
  std::lock_guard sl(l.mutex);
  const auto& trials = l.plan->trials;
  auto it = std::find_if(trials.begin(), trials.end(), [&](const Trial& t) { return t.trial_id == payload.trial_id; });
  if (it == trials.end()) {
    throw ServiceError(404, "unknown_trial", fmt::format("session {} has no trial '{}'", session_id, payload.trial_id));
  }
  const auto index = static_cast<std::size_t>(it - trials.begin());
  if (index < l.info.cursor) {
    if (same_scales(l.answers[index], payload)) return {l.info, true};
    throw ServiceError(409, "already_answered",
                       fmt::format("trial {} was already answered with different values", payload.trial_id));
  }
  if (index > l.info.cursor) {
    throw ServiceError(409, "out_of_order",
                       fmt::format("expected trial {}, got {}", trials[l.info.cursor].trial_id, payload.trial_id));
  }
  const Trial& t = *it;
  const bool any = payload.quality || payload.fit || payload.diversity;
  switch (t.kind) {
    case TrialKind::kReferent:
      if (any) throw ServiceError(400, "unexpected_scale", "referent trials take no ratings");
      break;
    case TrialKind::kRating:
      if (!payload.quality || !payload.fit || payload.diversity) {
        throw ServiceError(400, "missing_scale", "rating trials take quality and fit");
      }
      break;
    case TrialKind::kDiversity:
      if (!payload.diversity || payload.quality || payload.fit) {
        throw ServiceError(400, "missing_scale", "diversity trials take diversity only");
      }
      break;
  }

  const std::string ts = now();
  json line;
  if (t.kind == TrialKind::kReferent) {
    line = {{"kind", "referent"},     {"session_id", session_id}, {"rater_id", l.info.rater_id},
            {"team_id", l.plan->team_id}, {"category", l.info.category}, {"trial_id", t.trial_id},
            {"clip_token", t.clip_token}, {"listen_count", payload.listen_count}, {"timestamp", ts}};
  } else {
    RatingRecord r;
    r.session_id = session_id;
    r.rater_id = l.info.rater_id;
    r.team_id = l.plan->team_id;
    r.category = l.info.category;
    r.trial_id = t.trial_id;
    r.clip_token = t.clip_token;
    r.quality = payload.quality;
    r.fit = payload.fit;
    r.diversity = payload.diversity;
    r.listen_count = payload.listen_count;
    r.timestamp = ts;
    line = record_to_json(r);
    line["kind"] = std::string(trial_kind_name(t.kind));
  }
  append_log(line);
  l.answers.push_back(payload);
  l.info.cursor = l.answers.size();
  l.info.updated = ts;
  if (l.info.cursor == l.info.trial_count) l.info.state = SessionState::kComplete;
  write_snapshot(l.info);
  return {l.info, false};
}

fs::path SessionService::audio_path(const std::string& token) const {
  auto it = token_index_.find(token);
  if (it == token_index_.end()) throw ServiceError(404, "unknown_token", "no such audio");
  const std::string& session_id = it->second.first->session_id;
  {
    std::lock_guard lock(sessions_mutex_);
    auto s = sessions_.find(session_id);
    if (s == sessions_.end()) throw ServiceError(404, "inactive", "no such audio");
    std::lock_guard sl(s->second->mutex);
    if (s->second->info.state != SessionState::kActive) throw ServiceError(404, "inactive", "no such audio");
  }
  auto a = plan_.audio.find(token);
  if (a == plan_.audio.end()) throw ServiceError(404, "unknown_token", "no such audio");
  return options_.plan_dir / a->second;
}

std::string SessionService::export_ratings(const std::string& token, bool unseal) const {
  if (options_.admin_token.empty() || token != options_.admin_token) {
    throw ServiceError(403, "forbidden", "bad export token");
  }
  std::string text;
  {
    std::lock_guard lock(log_mutex_);
    text = fs::exists(log_path()) ? read_file(log_path()) : std::string();
  }
  if (!unseal) return text;
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    const SessionPlan* sp = plan_.find_session(j.at("session_id").get<std::string>());
    const Trial* t = sp ? sp->find(j.at("trial_id").get<std::string>()) : nullptr;
    if (t) {
      if (!t->hidden.system_id.empty()) j["system_id"] = t->hidden.system_id;
      if (t->hidden.anchor) {
        j["anchor_quality"] = std::string(pole_name(t->hidden.anchor->quality));
        j["anchor_fit"] = std::string(pole_name(t->hidden.anchor->fit));
      }
    }
    out += j.dump() + "\n";
  }
  return out;
}

struct HttpServer::Impl {
  SessionService& service;
  ServerOptions options;
  httplib::Server server;
  std::thread thread;

  Impl(SessionService& s, ServerOptions o) : service(s), options(std::move(o)) {}
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const ServiceError& e) {
      send_json(res, e.status(), {{"error", e.code()}, {"message", e.what()}});
    } catch (const json::exception& e) {
      send_json(res, 400, {{"error", "bad_request"}, {"message", e.what()}});
    } catch (const std::exception& e) {
      send_json(res, 500, {{"error", "internal"}, {"message", e.what()}});
    }
  };
}

}  // namespace

HttpServer::HttpServer(SessionService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& svr = impl_->server;
  SessionService& svc = impl_->service;
  const std::size_t threads = std::max<std::size_t>(1, impl_->options.threads);
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  svr.Post("/api/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const json body = json::parse(req.body);
             if (!body.is_object() || !body.contains("rater_id") || !body.contains("category")) {
               throw ServiceError(400, "bad_request", "rater_id and category are required");
             }
             auto [info, created] =
                 svc.create_session(body.at("rater_id").get<std::string>(), body.at("category").get<std::string>());
             send_json(res, created ? 201 : 200, session_json(info));
           }));
  svr.Get(R"(/api/sessions/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, session_json(svc.session(req.matches[1])));
          }));
  svr.Get(R"(/api/sessions/([^/]+)/next)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.next_trial(req.matches[1]));
          }));
  svr.Post(R"(/api/sessions/([^/]+)/responses)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto result = svc.submit_response(req.matches[1], parse_response_payload(json::parse(req.body)));
             json body = session_json(result.session);
             body["ok"] = true;
             body["duplicate"] = result.duplicate;
             send_json(res, 200, body);
           }));
  svr.Get(R"(/api/audio/([0-9a-f]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const fs::path path = svc.audio_path(req.matches[1]);
            res.set_content(read_file(path), "audio/wav");
          }));
  svr.Get("/api/export", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const bool unseal = req.has_param("unseal") && req.get_param_value("unseal") != "0";
            res.set_content(svc.export_ratings(req.get_param_value("token"), unseal), "application/x-ndjson");
          }));
  if (impl_->options.static_dir) {
    if (!svr.set_mount_point("/", impl_->options.static_dir->string())) {
      throw Error(fmt::format("static directory {} not found", impl_->options.static_dir->string()));
    }
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto& svr = impl_->server;
  if (impl_->options.port == 0) {
    port_ = svr.bind_to_any_port(impl_->options.host);
  } else {
    port_ = svr.bind_to_port(impl_->options.host, impl_->options.port) ? impl_->options.port : -1;
  }
  if (port_ < 0) throw Error(fmt::format("cannot listen on {}:{}", impl_->options.host, impl_->options.port));
  return port_;
}

void HttpServer::serve() {
  if (port_ <= 0) bind();
  impl_->server.listen_after_bind();
}

void HttpServer::start() {
  if (port_ <= 0) bind();
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace foley
