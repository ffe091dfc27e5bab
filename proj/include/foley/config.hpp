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


#ifndef FOLEY_CONFIG_HPP_
#define FOLEY_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "foley/common.hpp"
#include "foley/corpus.hpp"
#include "foley/kernels.hpp"
#include "foley/ratings.hpp"
#include "foley/trials.hpp"

namespace foley {

// TOML subset: tables, key = value, strings, integers, floats, booleans and
// arrays of those. No inline tables, dotted keys or dates.
nlohmann::json parse_toml(std::string_view text, std::string_view source = "<config>");
nlohmann::json read_toml(const std::filesystem::path& path);

struct PipelineConfig {
  std::filesystem::path work_dir = "work";
  std::filesystem::path manifest;
  std::filesystem::path submissions;
  std::filesystem::path raters;
  std::optional<std::filesystem::path> released_scores;
  std::optional<std::uint64_t> seed;

  SegmentPolicy policy = SegmentPolicy::kMaxRms;
  std::size_t expected_eval = 100;

  std::string embed_backend = "builtin";  // builtin | import
  std::optional<std::filesystem::path> import_dir;
  std::string import_model_id;
  std::size_t import_dim = 0;
  std::size_t import_frames = 1;

  std::size_t top_k = 4;
  std::size_t k = 20;
  int kmeans_restarts = 10;
  double gap_seconds = 0.5;

  std::size_t referents = 6;
  std::size_t anchors_per_type = 4;
  AssignmentOptions band;

  Weights weights;
  CombineMode combine = CombineMode::kOverall;
  ExclusionOptions exclusion;

  std::string listen = "127.0.0.1:8080";
  std::string admin_token_env = "FOLEY_ADMIN_TOKEN";
  std::optional<std::filesystem::path> static_dir;
  bool fsync = true;

  Exec exec = Exec::kParallel;

  // Directory of the config file; input paths under it hash in relative form.
  std::filesystem::path config_dir;

  // Settings that shape artifacts; the work dir and server settings are left out.
  nlohmann::json canonical() const;
  std::string hash() const;
  Provenance provenance() const;
  std::uint64_t require_seed(std::string_view stage) const;
  PlanShape shape() const { return {referents, anchors_per_type, k}; }
};

// Relative paths resolve against the config file's directory; unknown keys are errors.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);

std::pair<std::string, int> parse_listen(std::string_view listen);

}  // namespace foley

#endif  // FOLEY_CONFIG_HPP_
