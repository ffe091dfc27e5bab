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


#include "foley/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace foley {

namespace {

struct LloydRun {
  std::vector<double> centroids;
  std::vector<int> assignment;
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> history;
};

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double d = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double t = a[j] - b[j];
    d += t * t;
  }
  return d;
}

std::vector<double> seed_plus_plus(std::span<const double> x, std::size_t n, std::size_t dim, std::size_t k,
                                   SeededRng& rng) {
  std::vector<double> centroids(k * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.below(n);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      const double total = pairwise_sum(d2);
      if (total <= 0.0) {
        pick = rng.below(n);
      } else {
        const double target = rng.uniform() * total;
        double cum = 0.0;
        pick = n;
        for (std::size_t i = 0; i < n; ++i) {
          cum += d2[i];
          if (d2[i] > 0.0 && cum > target) {
            pick = i;
            break;
          }
        }
        if (pick == n) {  // round-off at the top end of the cumulative sum
          for (std::size_t i = n; i-- > 0;) {
            if (d2[i] > 0.0) {
              pick = i;
              break;
            }
          }
        }
      }
    }
    std::copy_n(x.data() + pick * dim, dim, centroids.data() + c * dim);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.data() + i * dim, centroids.data() + c * dim, dim));
    }
  }
  return centroids;
}

// Moves the point farthest from its centroid into each empty cluster.
void repair_empty(std::span<const double> x, std::size_t dim, std::size_t k, std::vector<double>& centroids,
                  std::vector<int>& assignment, std::vector<double>& d2) {
  std::vector<std::size_t> counts(k, 0);
  for (int a : assignment) ++counts[static_cast<std::size_t>(a)];
  for (std::size_t e = 0; e < k; ++e) {
    if (counts[e] > 0) continue;
    std::size_t far = assignment.size();
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (counts[static_cast<std::size_t>(assignment[i])] < 2) continue;
      if (far == assignment.size() || d2[i] > d2[far]) far = i;
    }
    if (far == assignment.size()) throw Error("cannot repair empty cluster");
    --counts[static_cast<std::size_t>(assignment[far])];
    assignment[far] = static_cast<int>(e);
    counts[e] = 1;
    d2[far] = 0.0;
    std::copy_n(x.data() + far * dim, dim, centroids.data() + e * dim);
  }
}

std::vector<double> cluster_means(std::span<const double> x, std::size_t dim, std::size_t k,
                                  const std::vector<int>& assignment) {
  std::vector<double> sums(k * dim, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignment[i]);
    ++counts[c];
    for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] += x[i * dim + j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < dim; ++j) sums[c * dim + j] /= static_cast<double>(counts[c]);
  }
  return sums;
}

LloydRun lloyd(std::span<const double> x, std::size_t n, std::size_t dim, std::size_t k, std::vector<double> centroids,
               const KMeansOptions& options) {
  LloydRun best;
  std::vector<int> assignment(n);
  std::vector<double> d2(n);
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options.max_iterations; ++it) {
    kernels::assign_nearest(options.exec, x, dim, centroids, assignment, d2);
    repair_empty(x, dim, k, centroids, assignment, d2);
    const double inertia = pairwise_sum(d2);
    // Lloyd steps cannot raise the objective; a rise is round-off at convergence.
    if (inertia > prev) break;
    best.centroids = centroids;
    best.assignment = assignment;
    best.inertia = inertia;
    best.iterations = it + 1;
    best.history.push_back(inertia);
    if (std::isfinite(prev) && prev - inertia <= options.tolerance * prev) break;
    prev = inertia;
    centroids = cluster_means(x, dim, k, assignment);
  }
  best.centroids = cluster_means(x, dim, k, best.assignment);
  std::vector<double> final_d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    final_d2[i] = squared_distance(x.data() + i * dim,
                                   best.centroids.data() + static_cast<std::size_t>(best.assignment[i]) * dim, dim);
  }
  best.inertia = pairwise_sum(final_d2);
  return best;
}

}  // namespace

KMeansResult kmeans(std::span<const double> vectors, std::size_t dim, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (dim == 0 || vectors.size() % dim != 0) throw Error("vector data is not a multiple of the dimension");
  const std::size_t n = vectors.size() / dim;
  if (k < 1) throw Error("k must be >= 1");
  if (n < k) throw Error(fmt::format("k-means needs at least k={} points, got {}", k, n));
  for (double v : vectors) {
    if (!std::isfinite(v)) throw Error("non-finite value in k-means input");
  }
  if (options.restarts < 1) throw Error("restarts must be >= 1");

  KMeansResult result;
  result.k = k;
  result.dim = dim;
  result.seed = seed;
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    SeededRng rng(derive_seed(seed, fmt::format("kmeans-restart-{}", r)));
    LloydRun run = lloyd(vectors, n, dim, k, seed_plus_plus(vectors, n, dim, k, rng), options);
    result.restart_inertia.push_back(run.inertia);
    result.inertia_history.push_back(run.history);
    if (run.inertia < best) {
      best = run.inertia;
      result.best_restart = r;
      result.centroids = std::move(run.centroids);
      result.assignment = std::move(run.assignment);
      result.inertia = run.inertia;
      result.iterations = run.iterations;
    }
  }
  return result;
}

std::vector<Medoid> select_medoids(const KMeansResult& km, std::span<const double> vectors,
                                   std::span<const std::string> clip_ids) {
  if (km.dim == 0 || vectors.size() != clip_ids.size() * km.dim || km.assignment.size() != clip_ids.size() ||
      km.centroids.size() != km.k * km.dim) {
    throw Error("k-means result is inconsistent with the vectors or clip ids");
  }
  std::vector<Medoid> out(km.k);
  std::vector<bool> filled(km.k, false);
  for (std::size_t i = 0; i < clip_ids.size(); ++i) {
    const int c = km.assignment[i];
    if (c < 0 || static_cast<std::size_t>(c) >= km.k) throw Error("assignment index out of range");
    const auto cu = static_cast<std::size_t>(c);
    const double d = std::sqrt(squared_distance(vectors.data() + i * km.dim, km.centroids.data() + cu * km.dim, km.dim));
    Medoid& m = out[cu];
    if (!filled[cu] || d < m.distance || (d == m.distance && clip_ids[i] < m.clip_id)) {
      m = {c, clip_ids[i], d};
      filled[cu] = true;
    }
  }
  for (std::size_t c = 0; c < km.k; ++c) {
    if (!filled[c]) throw Error(fmt::format("cluster {} is empty", c));
  }
  return out;
}

MedoidSet compute_medoids(const EmbeddingMatrix& m, std::size_t k, std::uint64_t seed, const KMeansOptions& options,
                          const std::vector<std::string>& only_groups) {
  MedoidSet set;
  for (const auto& [key, clips] : group_index(m)) {
    if (!only_groups.empty() && std::find(only_groups.begin(), only_groups.end(), key.first) == only_groups.end()) {
      continue;
    }
    const std::vector<double> vectors = pooled_rows(m, clips);
    std::vector<std::string> ids;
    for (std::size_t c : clips) ids.push_back(m.clip_ids[c]);
    if (ids.size() < k) {
      throw Error(fmt::format("{} / {}: {} clips, fewer than k={}", key.first, category_name(key.second), ids.size(), k));
    }
    const std::uint64_t job_seed = derive_seed(seed, fmt::format("{}/{}", key.first, category_name(key.second)));
    const KMeansResult km = kmeans(vectors, m.dim, k, job_seed, options);
    set.entries[key] = select_medoids(km, vectors, ids);
  }
  return set;
}

void write_medoids_csv(const MedoidSet& set, const std::filesystem::path& path, const Provenance& prov) {
  std::ostringstream out;
  out << prov.csv_comment();
  out << "system_id,category,cluster,clip_id,distance\n";
  for (const auto& [key, medoids] : set.entries) {
    for (const auto& md : medoids) {
      out << csv_escape(key.first) << ',' << category_name(key.second) << ',' << md.cluster << ','
          << csv_escape(md.clip_id) << ',' << format_double(md.distance) << '\n';
    }
  }
  write_file_atomic(path, out.str());
}

MedoidSet read_medoids_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto cs = t.column("system_id"), cc = t.column("category"), ck = t.column("cluster"),
             ci = t.column("clip_id"), cd = t.column("distance");
  MedoidSet set;
  for (const auto& row : t.rows) {
    const GroupKey key{row.fields[cs], category_from_string(row.fields[cc])};
    set.entries[key].push_back({std::stoi(row.fields[ck]), row.fields[ci], std::stod(row.fields[cd])});
  }
  for (auto& [key, medoids] : set.entries) {
    std::stable_sort(medoids.begin(), medoids.end(), [](const Medoid& a, const Medoid& b) { return a.cluster < b.cluster; });
  }
  return set;
}

DiversitySequence assemble_diversity_sequence(const std::vector<Medoid>& medoids,
                                              const std::map<std::string, std::vector<std::int16_t>>& clips,
                                              const std::string& system_id, Category category, double gap_seconds,
                                              const std::string& token) {
  if (gap_seconds < 0.0) throw Error("gap must be non-negative");
  const auto gap = static_cast<std::size_t>(std::llround(gap_seconds * kClipRate));
  DiversitySequence seq;
  seq.system_id = system_id;
  seq.category = category;
  seq.token = token;
  seq.file_name = fmt::format("{}_{}.wav", category_name(category), token);
  for (std::size_t i = 0; i < medoids.size(); ++i) {
    auto it = clips.find(medoids[i].clip_id);
    if (it == clips.end()) throw Error(fmt::format("missing clip '{}' for diversity file", medoids[i].clip_id));
    if (it->second.size() != kClipSamples) {
      throw Error(fmt::format("clip '{}' does not conform to the clip format", medoids[i].clip_id));
    }
    if (i > 0) seq.samples.insert(seq.samples.end(), gap, 0);
    seq.samples.insert(seq.samples.end(), it->second.begin(), it->second.end());
  }
  return seq;
}

std::map<std::string, std::string> obfuscation_tokens(const std::vector<std::string>& system_ids, std::uint64_t seed) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  SeededRng rng(derive_seed(seed, "obfuscation"));
  std::vector<std::string> sorted = system_ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::map<std::string, std::string> out;
  std::set<std::string> used;
  for (const auto& id : sorted) {
    std::string token;
    do {
      token.clear();
      for (int i = 0; i < 8; ++i) token.push_back(kAlphabet[rng.below(36)]);
    } while (!used.insert(token).second);
    out[id] = token;
  }
  return out;
}

}  // namespace foley
