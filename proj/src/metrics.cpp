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


#include "foley/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace foley {

namespace {

double trace_of(const Eigen::MatrixXd& m) {
  std::vector<double> d(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) d[static_cast<std::size_t>(i)] = m(i, i);
  return pairwise_sum(d);
}

void check_symmetric(const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols()) throw Error("matrix is not square");
  const double scale = 1.0 + s.cwiseAbs().maxCoeff();
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) throw Error("matrix is not symmetric");
}

struct PsdDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

PsdDecomposition decompose_psd(const Eigen::MatrixXd& s, bool want_vectors) {
  check_symmetric(s);
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      sym, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("eigendecomposition failed");
  Eigen::VectorXd values = solver.eigenvalues();
  const double top = values.size() ? std::max(0.0, values.maxCoeff()) : 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < 0.0) {
      if (values(i) < -1e-10 * top) {
        throw Error(fmt::format("matrix is not positive semidefinite (eigenvalue {:.3e}, largest {:.3e})",
                                values(i), top));
      }
      values(i) = 0.0;
    }
  }
  return {values, want_vectors ? Eigen::MatrixXd(solver.eigenvectors()) : Eigen::MatrixXd()};
}

}  // namespace

GaussianStats fit_gaussian(std::span<const double> rows, std::size_t dim) {
  if (dim == 0) throw Error("dimension must be >= 1");
  if (rows.size() % dim != 0) throw Error("row data is not a multiple of the dimension");
  const std::size_t n = rows.size() / dim;
  if (n < 2) throw Error(fmt::format("need at least 2 rows to fit a Gaussian, got {}", n));
  for (double v : rows) {
    if (!std::isfinite(v)) throw Error("non-finite value in Gaussian fit input");
  }
  GaussianStats g;
  g.sample_count = n;
  g.mean.resize(static_cast<Eigen::Index>(dim));
  std::vector<double> column(n);
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < n; ++i) column[i] = rows[i * dim + j];
    g.mean(static_cast<Eigen::Index>(j)) = mean_of(column);
  }
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajor> x(rows.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const Eigen::MatrixXd centered = x.rowwise() - g.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  g.covariance = 0.5 * (cov + cov.transpose());

  const double tr = trace_of(g.covariance);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.covariance, Eigen::EigenvaluesOnly);
  const double smallest = solver.eigenvalues().minCoeff();
  const double per_dim = tr / static_cast<double>(dim);
  if (smallest < 1e-10 * per_dim) {
    g.regularization = 1e-6 * per_dim;
    g.covariance.diagonal().array() += g.regularization;
  }
  return g;
}

Eigen::VectorXd psd_eigenvalues(const Eigen::MatrixXd& s) { return decompose_psd(s, false).values; }

Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& s) {
  const PsdDecomposition d = decompose_psd(s, true);
  const Eigen::VectorXd roots = d.values.array().sqrt();
  Eigen::MatrixXd r = d.vectors * roots.asDiagonal() * d.vectors.transpose();
  return 0.5 * (r + r.transpose());
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim() != b.dim()) throw Error(fmt::format("dimension mismatch: {} vs {}", a.dim(), b.dim()));
  const Eigen::VectorXd diff = a.mean - b.mean;
  std::vector<double> sq(diff.size());
  for (Eigen::Index i = 0; i < diff.size(); ++i) sq[static_cast<std::size_t>(i)] = diff(i) * diff(i);
  const double mean_term = pairwise_sum(sq);

  const Eigen::MatrixXd root_a = sqrtm_psd(a.covariance);
  Eigen::MatrixXd cross = root_a * b.covariance * root_a;
  cross = 0.5 * (cross + cross.transpose());
  const Eigen::VectorXd lambda = psd_eigenvalues(cross);
  std::vector<double> roots(static_cast<std::size_t>(lambda.size()));
  for (Eigen::Index i = 0; i < lambda.size(); ++i) roots[static_cast<std::size_t>(i)] = std::sqrt(lambda(i));
  const double cross_trace = pairwise_sum(roots);

  const double d = mean_term + trace_of(a.covariance) + trace_of(b.covariance) - 2.0 * cross_trace;
  if (d < -1e-8) throw Error(fmt::format("Frechet distance numerically negative ({:.3e})", d));
  return std::max(d, 0.0);
}

CategoryRows category_rows(const EmbeddingMatrix& m, std::string_view group) {
  CategoryRows out;
  out.dim = m.dim;
  for (const auto& [key, clips] : group_index(m)) {
    if (key.first != group) continue;
    out.rows[static_cast<std::size_t>(key.second)] = gather_rows(m, clips);
  }
  return out;
}

std::vector<FadResult> fad_table(std::span<const SystemRows> systems, const CategoryRows& reference,
                                 const std::string& tag, Exec exec) {
  std::array<GaussianStats, kNumCategories> ref;
  for (Category c : kCategories) {
    const auto i = static_cast<std::size_t>(c);
    if (!reference.rows[i]) throw Error(fmt::format("reference is missing category {}", category_name(c)));
    ref[i] = fit_gaussian(*reference.rows[i], reference.dim);
  }
  for (const auto& s : systems) {
    if (s.data.dim != reference.dim) {
      throw Error(fmt::format("system {} embeddings have dim {}, reference has {}", s.system_id, s.data.dim, reference.dim));
    }
    for (Category c : kCategories) {
      if (!s.data.rows[static_cast<std::size_t>(c)]) {
        throw Error(fmt::format("system {} is missing category {}", s.system_id, category_name(c)));
      }
    }
  }

  std::vector<FadResult> out(systems.size());
  const auto jobs = static_cast<long long>(systems.size() * kNumCategories);
  std::vector<std::string> errors(static_cast<std::size_t>(jobs));
  auto run = [&](long long job) {
    const auto s = static_cast<std::size_t>(job) / kNumCategories;
    const auto c = static_cast<std::size_t>(job) % kNumCategories;
    try {
      const GaussianStats g = fit_gaussian(*systems[s].data.rows[c], systems[s].data.dim);
      out[s].per_category[c] = frechet_distance(g, ref[c]);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(job)] = fmt::format("{} / {}: {}", systems[s].system_id,
                                                          category_name(static_cast<Category>(c)), e.what());
    }
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long job = 0; job < jobs; ++job) run(job);
  } else {
    for (long long job = 0; job < jobs; ++job) run(job);
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(e);
  }
  for (std::size_t s = 0; s < systems.size(); ++s) {
    out[s].system_id = systems[s].system_id;
    out[s].track = systems[s].track;
    out[s].reference_tag = tag;
    out[s].average = mean_of(out[s].per_category);
  }
  return out;
}

std::vector<std::string> top_k_by_average(std::span<const FadResult> results, std::size_t k) {
  if (k < 1) throw Error("k must be >= 1");
  if (results.empty()) throw Error("no FAD results to screen");
  for (const auto& r : results) {
    if (r.reference_tag != results.front().reference_tag) {
      throw Error(fmt::format("mixed reference tags '{}' and '{}'", results.front().reference_tag, r.reference_tag));
    }
  }
  std::vector<const FadResult*> order;
  for (const auto& r : results) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const FadResult* a, const FadResult* b) {
    if (a->average != b->average) return a->average < b->average;
    return a->system_id < b->system_id;
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) ids.push_back(order[i]->system_id);
  return ids;
}

void write_fad_csv(std::span<const FadResult> results, const std::filesystem::path& path, const Provenance& prov) {
  std::ostringstream out;
  out << prov.csv_comment();
  if (!results.empty()) out << "# reference_tag=" << results.front().reference_tag << '\n';
  out << "system_id,track,category,fad,average\n";
  for (const auto& r : results) {
    for (Category c : kCategories) {
      out << csv_escape(r.system_id) << ',' << track_name(r.track) << ',' << category_name(c) << ','
          << format_double(r.per_category[static_cast<std::size_t>(c)]) << ',' << format_double(r.average) << '\n';
    }
  }
  write_file_atomic(path, out.str());
}

std::vector<FadResult> read_fad_csv(const std::filesystem::path& path) {
  std::string tag;
  {
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("# reference_tag=", 0) == 0) tag = trim(line.substr(16));
    }
  }
  const CsvTable t = read_csv(path);
  const auto ci = t.column("system_id"), ct = t.column("track"), cc = t.column("category"), cf = t.column("fad");
  std::map<std::string, FadResult> by_system;
  std::map<std::string, std::array<bool, kNumCategories>> seen;
  for (const auto& row : t.rows) {
    auto& r = by_system[row.fields[ci]];
    r.system_id = row.fields[ci];
    auto track = parse_track(row.fields[ct]);
    if (!track) throw Error(fmt::format("{}:{}: bad track '{}'", path.string(), row.line, row.fields[ct]));
    r.track = *track;
    r.reference_tag = tag;
    const Category c = category_from_string(row.fields[cc]);
    r.per_category[static_cast<std::size_t>(c)] = std::stod(row.fields[cf]);
    seen[r.system_id][static_cast<std::size_t>(c)] = true;
  }
  std::vector<FadResult> out;
  for (auto& [id, r] : by_system) {
    for (Category c : kCategories) {
      if (!seen[id][static_cast<std::size_t>(c)]) {
        throw Error(fmt::format("{}: system {} lacks category {}", path.string(), id, category_name(c)));
      }
    }
    r.average = mean_of(r.per_category);
    out.push_back(r);
  }
  return out;
}

RankCorrelation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(fmt::format("length mismatch: {} vs {}", x.size(), y.size()));
  if (x.size() < 2) throw Error("correlation needs at least 2 pairs");
  const double mx = mean_of(x), my = mean_of(y);
  std::vector<double> sxy(x.size()), sxx(x.size()), syy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy[i] = dx * dy;
    sxx[i] = dx * dx;
    syy[i] = dy * dy;
  }
  const double vxx = pairwise_sum(sxx), vyy = pairwise_sum(syy);
  if (vxx == 0.0 || vyy == 0.0) throw Error("correlation undefined for zero variance");
  const double r = pairwise_sum(sxy) / std::sqrt(vxx * vyy);
  return {std::clamp(r, -1.0, 1.0), CorrelationMethod::kPearson, x.size()};
}

std::vector<double> fractional_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

RankCorrelation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(fmt::format("length mismatch: {} vs {}", x.size(), y.size()));
  const auto rx = fractional_ranks(x), ry = fractional_ranks(y);
  RankCorrelation r = pearson(rx, ry);
  r.method = CorrelationMethod::kSpearman;
  return r;
}

}  // namespace foley
