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

#include <sstream>

#include "foley/fixture.hpp"
#include "foley/pipeline.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

namespace fs = std::filesystem;

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("pipeline");
    layout_ = make_fixture(dir_->path() / "fx", 7);
  }
  static void TearDownTestSuite() { delete dir_; }

  static testing::TempDir* dir_;
  static FixtureLayout layout_;
};

testing::TempDir* PipelineTest::dir_ = nullptr;
FixtureLayout PipelineTest::layout_;

TEST_F(PipelineTest, FixtureLayoutExists) {
  for (const auto& p : {layout_.manifest, layout_.raters, layout_.rater_scripts, layout_.config, layout_.expected_ranking}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
  const Manifest m = load_manifest(layout_.manifest);
  EXPECT_TRUE(validate_split(m, {.expected_evaluation_per_category = kFixtureClipsPerCategory}).ok());
  EXPECT_EQ(discover_submissions(layout_.submissions).size(), 2u);
}

TEST_F(PipelineTest, LaterStageWithoutInputsNamesProducer) {
  PipelineConfig cfg = load_config(layout_.config);
  cfg.work_dir = dir_->path() / "empty-work";
  std::ostringstream log;
  try {
    run_pipeline(cfg, parse_stages("fad,screen"), {.log = &log});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("produced by stage 'embed'"), std::string::npos) << e.what();
  }
}

TEST_F(PipelineTest, ScreeningStagesProduceArtifacts) {
  PipelineConfig cfg = load_config(layout_.config);
  cfg.work_dir = dir_->path() / "work";
  std::ostringstream log;
  EXPECT_EQ(run_pipeline(cfg, parse_stages("preprocess,embed,fad,screen"), {.log = &log}), 0) << log.str();
  const WorkLayout w(cfg.work_dir);
  for (const auto& p : {w.manifest, w.split_report, w.reference_emb, w.submission_emb, w.fad_dev, w.fad_eval, w.finalists}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
  // Provenance on CSV outputs.
  EXPECT_EQ(read_file(w.fad_eval).rfind("# tool=foley-eval/", 0), 0u);
  const auto eval = read_fad_csv(w.fad_eval);
  ASSERT_EQ(eval.size(), 2u);
  std::map<std::string, double> avg;
  for (const auto& r : eval) avg[r.system_id] = r.average;
  EXPECT_LT(avg["sys_good"], avg["sys_poor"]);
  const CsvTable fin = read_csv(w.finalists);
  EXPECT_EQ(fin.rows.size(), 2u);
  EXPECT_EQ(fin.rows[0].fields[fin.column("system_id")], "sys_good");

  // Re-running fad and screen alone reproduces the same bytes.
  const std::string before = read_file(w.fad_eval) + read_file(w.finalists);
  EXPECT_EQ(run_pipeline(cfg, parse_stages("fad,screen"), {.log = &log}), 0);
  EXPECT_EQ(read_file(w.fad_eval) + read_file(w.finalists), before);
}

}  // namespace
}  // namespace foley
