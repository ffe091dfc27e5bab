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


#ifndef FOLEY_SERVER_HPP_
#define FOLEY_SERVER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "foley/common.hpp"
#include "foley/ratings.hpp"
#include "foley/trials.hpp"

namespace foley {

// Failure with an HTTP-style status.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

enum class SessionState { kActive, kComplete };
std::string_view session_state_name(SessionState s);

struct SessionInfo {
  std::string session_id;
  std::string rater_id;
  std::string category;
  std::size_t cursor = 0;
  std::size_t trial_count = 0;
  SessionState state = SessionState::kActive;
  std::string created;
  std::string updated;
};

nlohmann::json session_json(const SessionInfo& s);

struct ResponsePayload {
  std::string trial_id;
  std::optional<int> quality;
  std::optional<int> fit;
  std::optional<int> diversity;
  int listen_count = 1;
};

// Parses {trial_id, quality?, fit?, diversity?, listen_count?}; range errors throw ServiceError 400.
ResponsePayload parse_response_payload(const nlohmann::json& body);

struct SubmitResult {
  SessionInfo session;
  bool duplicate = false;  // identical resubmission of an answered trial
};

struct ServiceOptions {
  std::filesystem::path plan_dir;  // holds sealed_plan.json; audio paths are relative to it
  std::filesystem::path data_dir;  // ratings.jsonl and sessions.json
  std::string admin_token;         // empty disables export
  bool fsync = true;
  std::function<std::string()> clock;  // ISO-8601 timestamps; defaults to UTC wall clock
};

// Transport-independent session logic. The ratings log is the source of
// truth; the session snapshot is rewritten atomically after each change and
// reconciled with the log on start-up.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  const ListeningPlan& plan() const { return plan_; }

  // Returns the existing session for (rater, category) when there is one.
  std::pair<SessionInfo, bool> create_session(const std::string& rater_id, const std::string& category);
  SessionInfo session(const std::string& session_id) const;
  // Trial descriptor at the cursor, or a break/done marker. Does not advance.
  nlohmann::json next_trial(const std::string& session_id) const;
  SubmitResult submit_response(const std::string& session_id, const ResponsePayload& payload);
  // Audio file for a token whose session is active.
  std::filesystem::path audio_path(const std::string& token) const;
  // Persisted log as JSONL; `unseal` adds system_id and anchor fields.
  std::string export_ratings(const std::string& token, bool unseal) const;

  std::filesystem::path log_path() const;
  std::filesystem::path snapshot_path() const;

 private:
  struct Live {
    mutable std::mutex mutex;
    SessionInfo info;
    const SessionPlan* plan = nullptr;
    std::vector<ResponsePayload> answers;  // by trial position
  };

  Live& live(const std::string& session_id) const;
  void recover();
  void append_log(const nlohmann::json& line);
  void write_snapshot(const SessionInfo& changed);
  std::string now() const;

  ServiceOptions options_;
  ListeningPlan plan_;
  std::map<std::string, std::pair<const SessionPlan*, std::size_t>> token_index_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::unique_ptr<Live>> sessions_;
  mutable std::mutex log_mutex_;
  int log_fd_ = -1;
  std::mutex snapshot_mutex_;
  std::map<std::string, SessionInfo> snapshot_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;
  std::size_t threads = 8;
};

// HTTP JSON API over a SessionService.
class HttpServer {
 public:
  HttpServer(SessionService& service, ServerOptions options);
  ~HttpServer();

  // Binds and returns the port; call serve() or start() afterwards.
  int bind();
  void serve();  // blocks until stop()
  void start();  // serve() on a background thread
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace foley

#endif  // FOLEY_SERVER_HPP_
