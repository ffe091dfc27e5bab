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

#include <fstream>

#include "foley/server.hpp"
#include "foley/wav.hpp"
#include "plan_fixtures.hpp"
#include "test_util.hpp"

// After Eigen: <resolv.h> defines _res.
#include <httplib.h>

namespace foley {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_wav_pcm16(dir_ / "clip.wav", testing::random_pcm(kClipSamples, 1), kClipRate);
    PlanInputs in = testing::synthetic_inputs(2, 8, 1);
    in.raters[0].team_id = "team0";
    for (auto& [id, path] : in.clip_paths) path = dir_ / "clip.wav";
    for (auto& [key, path] : in.diversity_files) path = dir_ / "clip.wav";
    plan_ = build_listening_plan(in, 8, dir_ / "plan", Provenance{"cfg", 8});
    write_plan(plan_, dir_ / "plan");
  }

  ServiceOptions options() {
    ServiceOptions o;
    o.plan_dir = dir_ / "plan";
    o.data_dir = dir_ / "data";
    o.admin_token = "secret";
    o.fsync = false;
    o.clock = [this] { return fmt::format("2026-01-01T00:00:{:02d}Z", tick_++ % 60); };
    return o;
  }

  const SessionPlan& first_session() const { return plan_.sessions.front(); }

  static ResponsePayload answer(const Trial& t, int q = 7, int f = 6) {
    ResponsePayload p;
    p.trial_id = t.trial_id;
    if (t.kind == TrialKind::kRating) p.quality = q, p.fit = f;
    if (t.kind == TrialKind::kDiversity) p.diversity = q;
    return p;
  }

  testing::TempDir dir_{"server"};
  ListeningPlan plan_;
  int tick_ = 0;
};

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

TEST_F(ServiceTest, CreateIsIdempotent) {
  SessionService svc(options());
  const SessionPlan& s = first_session();
  auto [a, created] = svc.create_session(s.rater_id, s.category);
  EXPECT_TRUE(created);
  EXPECT_EQ(a.session_id, s.session_id);
  EXPECT_EQ(a.trial_count, s.trials.size());
  auto [b, again] = svc.create_session(s.rater_id, s.category);
  EXPECT_FALSE(again);
  EXPECT_EQ(b.session_id, a.session_id);
  EXPECT_EQ(status_of([&] { svc.create_session("nobody", "rain"); }), 404);
  EXPECT_EQ(status_of([&] { svc.session("nope"); }), 404);
}

TEST_F(ServiceTest, EnforcesOrderAndIdempotentResubmission) {
  SessionService svc(options());
  const SessionPlan& s = first_session();
  svc.create_session(s.rater_id, s.category);
  EXPECT_EQ(svc.next_trial(s.session_id)["trial_id"], s.trials[0].trial_id);
  EXPECT_EQ(status_of([&] { svc.submit_response(s.session_id, answer(s.trials[1])); }), 409);
  ResponsePayload scaled = answer(s.trials[0]);
  scaled.quality = 5;
  scaled.fit = 5;
  EXPECT_EQ(status_of([&] { svc.submit_response(s.session_id, scaled); }), 400) << "referents take no scales";
  EXPECT_FALSE(svc.submit_response(s.session_id, answer(s.trials[0])).duplicate);
  EXPECT_TRUE(svc.submit_response(s.session_id, answer(s.trials[0])).duplicate);
  std::size_t i = 1;
  while (s.trials[i].kind == TrialKind::kReferent) svc.submit_response(s.session_id, answer(s.trials[i++]));
  ResponsePayload missing;
  missing.trial_id = s.trials[i].trial_id;
  missing.quality = 4;
  EXPECT_EQ(status_of([&] { svc.submit_response(s.session_id, missing); }), 400);
  svc.submit_response(s.session_id, answer(s.trials[i]));
  EXPECT_TRUE(svc.submit_response(s.session_id, answer(s.trials[i])).duplicate);
  EXPECT_EQ(status_of([&] { svc.submit_response(s.session_id, answer(s.trials[i], 1, 1)); }), 409);
  ResponsePayload unknown;
  unknown.trial_id = "t999";
  EXPECT_EQ(status_of([&] { svc.submit_response(s.session_id, unknown); }), 404);
  EXPECT_EQ(svc.session(s.session_id).cursor, i + 1);
}

TEST_F(ServiceTest, CompletingASessionReportsBreakThenDone) {
  SessionService svc(options());
  const std::string rater = first_session().rater_id;
  std::vector<const SessionPlan*> mine;
  for (const auto& s : plan_.sessions)
    if (s.rater_id == rater) mine.push_back(&s);
  ASSERT_GE(mine.size(), 2u);
  for (std::size_t k = 0; k < mine.size(); ++k) {
    const SessionPlan& s = *mine[k];
    svc.create_session(rater, s.category);
    for (const auto& t : s.trials) svc.submit_response(s.session_id, answer(t));
    EXPECT_EQ(svc.session(s.session_id).state, SessionState::kComplete);
    const json next = svc.next_trial(s.session_id);
    EXPECT_EQ(next["type"], k + 1 < mine.size() ? "break" : "done");
    if (k + 1 < mine.size()) EXPECT_EQ(next["remaining"].size(), mine.size() - k - 1);
  }
  // Audio is only served for active sessions.
  EXPECT_EQ(status_of([&] { svc.audio_path(mine[0]->trials[0].clip_token); }), 404);
}

TEST_F(ServiceTest, LogRecordsIngestAgainstPlan) {
  const SessionPlan& s = first_session();
  {
    SessionService svc(options());
    svc.create_session(s.rater_id, s.category);
    for (const auto& t : s.trials) svc.submit_response(s.session_id, answer(t));
  }
  const IngestResult res = ingest_ratings(dir_ / "data" / "ratings.jsonl", &plan_);
  EXPECT_EQ(res.referent_acks, s.count(TrialKind::kReferent));
  EXPECT_EQ(res.records.size(), s.trials.size() - s.count(TrialKind::kReferent));
  EXPECT_TRUE(res.duplicates.empty());
  EXPECT_EQ(res.records[0].team_id, s.team_id);
}

TEST_F(ServiceTest, RecoversAfterTornTail) {
  const SessionPlan& s = first_session();
  {
    SessionService svc(options());
    svc.create_session(s.rater_id, s.category);
    for (std::size_t i = 0; i < 10; ++i) svc.submit_response(s.session_id, answer(s.trials[i]));
  }
  {
    std::ofstream log(dir_ / "data" / "ratings.jsonl", std::ios::app);
    log << R"({"session_id":")" << s.session_id << R"(","trial_id":"t0)";  // crash mid-write
  }
  SessionService svc(options());
  const SessionInfo info = svc.session(s.session_id);
  EXPECT_EQ(info.cursor, 10u);
  EXPECT_EQ(svc.next_trial(s.session_id)["trial_id"], s.trials[10].trial_id);
  svc.submit_response(s.session_id, answer(s.trials[10]));
  const std::string log = read_file(dir_ / "data" / "ratings.jsonl");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 11);
  EXPECT_NO_THROW(ingest_ratings(dir_ / "data" / "ratings.jsonl", &plan_));
}

TEST_F(ServiceTest, RecoversFromLogWithoutSnapshot) {
  const SessionPlan& s = first_session();
  {
    SessionService svc(options());
    svc.create_session(s.rater_id, s.category);
    for (std::size_t i = 0; i < 7; ++i) svc.submit_response(s.session_id, answer(s.trials[i]));
  }
  fs::remove(dir_ / "data" / "sessions.json");
  SessionService svc(options());
  EXPECT_EQ(svc.session(s.session_id).cursor, 7u);
  EXPECT_TRUE(fs::exists(dir_ / "data" / "sessions.json"));
}

TEST_F(ServiceTest, ExportRequiresTokenAndUnsealsOnRequest) {
  const SessionPlan& s = first_session();
  SessionService svc(options());
  svc.create_session(s.rater_id, s.category);
  for (std::size_t i = 0; i < 8; ++i) svc.submit_response(s.session_id, answer(s.trials[i]));
  EXPECT_EQ(status_of([&] { svc.export_ratings("wrong", false); }), 403);
  EXPECT_EQ(status_of([&] { svc.export_ratings("", false); }), 403);
  const std::string sealed = svc.export_ratings("secret", false);
  EXPECT_EQ(sealed.find("system_id"), std::string::npos);
  const std::string unsealed = svc.export_ratings("secret", true);
  EXPECT_NE(unsealed.find("system_id"), std::string::npos);
  auto o = options();
  o.admin_token.clear();
  SessionService closed(o);
  EXPECT_EQ(status_of([&] { closed.export_ratings("", false); }), 403);
}

TEST(ResponsePayload, Validation) {
  EXPECT_EQ(parse_response_payload(json{{"trial_id", "t1"}, {"quality", 10}, {"fit", 0}}).fit, 0);
  auto status = [](json j) { return status_of([&] { parse_response_payload(j); }); };
  EXPECT_EQ(status(json{{"quality", 1}}), 400);
  EXPECT_EQ(status(json{{"trial_id", "t"}, {"quality", 11}}), 400);
  EXPECT_EQ(status(json{{"trial_id", "t"}, {"quality", "7"}}), 400);
  EXPECT_EQ(status(json{{"trial_id", "t"}, {"listen_count", 0}}), 400);
  EXPECT_EQ(status(json::array()), 400);
}

class HttpTest : public ServiceTest {
 protected:
  void SetUp() override {
    ServiceTest::SetUp();
    service_ = std::make_unique<SessionService>(options());
    server_ = std::make_unique<HttpServer>(*service_, ServerOptions{.host = "127.0.0.1", .port = 0});
    server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", server_->port());
  }
  void TearDown() override {
    server_->stop();
  }
  httplib::Result post(const std::string& path, const json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  std::unique_ptr<SessionService> service_;
  std::unique_ptr<HttpServer> server_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(HttpTest, SessionFlow) {
  const SessionPlan& s = first_session();
  auto r = post("/api/sessions", {{"rater_id", s.rater_id}, {"category", s.category}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 201);
  EXPECT_EQ(json::parse(r->body)["session_id"], s.session_id);
  EXPECT_EQ(post("/api/sessions", {{"rater_id", s.rater_id}, {"category", s.category}})->status, 200);

  r = client_->Get("/api/sessions/" + s.session_id + "/next");
  const json next = json::parse(r->body);
  EXPECT_EQ(next["type"], "trial");
  EXPECT_EQ(next["kind"], "referent");
  EXPECT_EQ(next.dump().find("sys0"), std::string::npos);

  r = post("/api/sessions/" + s.session_id + "/responses", {{"trial_id", s.trials[3].trial_id}});
  EXPECT_EQ(r->status, 409);
  EXPECT_EQ(json::parse(r->body)["error"], "out_of_order");
  r = post("/api/sessions/" + s.session_id + "/responses", {{"trial_id", s.trials[0].trial_id}});
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["cursor"], 1);
  r = post("/api/sessions/" + s.session_id + "/responses", {{"trial_id", s.trials[0].trial_id}});
  EXPECT_TRUE(json::parse(r->body)["duplicate"].get<bool>());
  r = client_->Post("/api/sessions/" + s.session_id + "/responses", "{oops", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(post("/api/sessions", {{"rater_id", "ghost"}, {"category", "rain"}})->status, 404);
  EXPECT_EQ(client_->Get("/api/sessions/none")->status, 404);
}

TEST_F(HttpTest, AudioAndRangeRequests) {
  const SessionPlan& s = first_session();
  post("/api/sessions", {{"rater_id", s.rater_id}, {"category", s.category}});
  const std::string url = "/api/audio/" + s.trials[0].clip_token;
  const std::string bytes = read_file(dir_ / "clip.wav");
  auto r = client_->Get(url);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, bytes);
  r = client_->Get(url, {{"Range", "bytes=0-43"}});
  EXPECT_EQ(r->status, 206);
  EXPECT_EQ(r->body, bytes.substr(0, 44));
  EXPECT_EQ(client_->Get("/api/audio/00ff")->status, 404);
  // Tokens of sessions nobody has opened are not served.
  EXPECT_EQ(client_->Get("/api/audio/" + plan_.sessions.back().trials[0].clip_token)->status, 404);
}

TEST_F(HttpTest, ExportNeedsToken) {
  EXPECT_EQ(client_->Get("/api/export")->status, 403);
  EXPECT_EQ(client_->Get("/api/export?token=nope")->status, 403);
  EXPECT_EQ(client_->Get("/api/export?token=secret")->status, 200);
}

}  // namespace
}  // namespace foley
