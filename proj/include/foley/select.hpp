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


#ifndef FOLEY_SELECT_HPP_
#define FOLEY_SELECT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "foley/common.hpp"
#include "foley/corpus.hpp"
#include "foley/embed.hpp"
#include "foley/kernels.hpp"

namespace foley {

struct KMeansOptions {
  int restarts = 10;
  int max_iterations = 300;
  double tolerance = 1e-6;  // relative inertia change
  Exec exec = Exec::kParallel;
};

struct KMeansResult {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centroids;  // k x dim
  std::vector<int> assignment;
  double inertia = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  int best_restart = 0;
  std::vector<double> restart_inertia;
  // Inertia after every assignment step, per restart.
  std::vector<std::vector<double>> inertia_history;
};

// k-means++ seeding and Lloyd iterations, best of several seeded restarts.
KMeansResult kmeans(std::span<const double> vectors, std::size_t dim, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

struct Medoid {
  int cluster = 0;
  std::string clip_id;
  double distance = 0.0;
};

// Per cluster, the member closest to its centroid (ties: smallest clip_id).
std::vector<Medoid> select_medoids(const KMeansResult& km, std::span<const double> vectors,
                                   std::span<const std::string> clip_ids);

struct MedoidSet {
  // (system_id, category) -> medoids ordered by cluster index.
  std::map<GroupKey, std::vector<Medoid>> entries;
};

// Clusters every (group, category) of `m` on mean-pooled clip vectors.
MedoidSet compute_medoids(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed,
                          const KMeansOptions& options = {}, const std::vector<std::string>& only_groups = {});

void write_medoids_csv(const MedoidSet& set, const std::filesystem::path& path, const Provenance& prov);
MedoidSet read_medoids_csv(const std::filesystem::path& path);

inline constexpr double kDefaultGapSeconds = 0.5;

struct DiversitySequence {
  std::string system_id;
  Category category;
  std::string token;
  std::string file_name;  // <category>_<token>.wav
  std::vector<std::int16_t> samples;
};

// Concatenates the medoid clips in order with `gap_seconds` of silence between them.
DiversitySequence assemble_diversity_sequence(const std::vector<Medoid>& medoids,
                                              const std::map<std::string, std::vector<std::int16_t>>& clips,
                                              const std::string& system_id, Category category, double gap_seconds,
                                              const std::string& token);

// Eight lower-case alphanumerics per system, unique, from a seeded stream.
std::map<std::string, std::string> obfuscation_tokens(const std::vector<std::string>& system_ids, std::uint64_t seed);

}  // namespace foley

#endif  // FOLEY_SELECT_HPP_
