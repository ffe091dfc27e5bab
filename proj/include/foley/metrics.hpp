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


#ifndef FOLEY_METRICS_HPP_
#define FOLEY_METRICS_HPP_

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "foley/common.hpp"
#include "foley/corpus.hpp"
#include "foley/embed.hpp"
#include "foley/kernels.hpp"

namespace foley {

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::size_t sample_count = 0;
  // Ridge added to the diagonal when the fitted covariance was near-singular.
  double regularization = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

// `rows` is n x dim, row-major. Unbiased covariance, symmetrized.
GaussianStats fit_gaussian(std::span<const double> rows, std::size_t dim);

// Principal square root of a symmetric positive semidefinite matrix.
Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& s);

// Eigenvalues of a symmetric PSD matrix with round-off negatives clamped to 0;
// throws when a negative eigenvalue is beyond round-off.
Eigen::VectorXd psd_eigenvalues(const Eigen::MatrixXd& s);

// ||mu1 - mu2||^2 + tr(S1 + S2 - 2 (S1 S2)^(1/2)), with the cross term taken
// from the symmetric product sqrt(S1) S2 sqrt(S1).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

// Embedding rows per category for one system or reference split.
struct CategoryRows {
  std::size_t dim = 0;
  std::array<std::optional<std::vector<double>>, kNumCategories> rows;
};

CategoryRows category_rows(const EmbeddingMatrix& m, std::string_view group);

struct SystemRows {
  std::string system_id;
  Track track = Track::kA;
  CategoryRows data;
};

struct FadResult {
  std::string system_id;
  Track track = Track::kA;
  std::string reference_tag;
  std::array<double, kNumCategories> per_category{};
  double average = 0.0;
};

std::vector<FadResult> fad_table(std::span<const SystemRows> systems, const CategoryRows& reference,
                                 const std::string& tag, Exec exec = Exec::kParallel);

// Ascending by average FAD, ties by system_id; the first k.
std::vector<std::string> top_k_by_average(std::span<const FadResult> results, std::size_t k);

void write_fad_csv(std::span<const FadResult> results, const std::filesystem::path& path, const Provenance& prov);
std::vector<FadResult> read_fad_csv(const std::filesystem::path& path);

enum class CorrelationMethod { kPearson, kSpearman };

struct RankCorrelation {
  double coefficient = 0.0;
  CorrelationMethod method = CorrelationMethod::kPearson;
  std::size_t n = 0;
};

RankCorrelation pearson(std::span<const double> x, std::span<const double> y);
RankCorrelation spearman(std::span<const double> x, std::span<const double> y);
// 1-based ranks; tied values share the mean of their positions.
std::vector<double> fractional_ranks(std::span<const double> x);

}  // namespace foley

#endif  // FOLEY_METRICS_HPP_
