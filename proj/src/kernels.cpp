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


#include "foley/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "foley/common.hpp"

namespace foley::kernels {

SincTable::SincTable() {
  const int n = kZeroCrossings * kOversample;
  table_.assign(static_cast<std::size_t>(n) + 2, 0.0);
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / kOversample;
    double sinc = 1.0;
    if (i % kOversample == 0) {
      sinc = i == 0 ? 1.0 : 0.0;
    } else {
      sinc = std::sin(M_PI * u) / (M_PI * u);
    }
    const double r = u / kZeroCrossings;
    const double window = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - r * r)) / i0_beta;
    table_[static_cast<std::size_t>(i)] = sinc * window;
  }
}

double SincTable::operator()(double u) const {
  const double x = u * kOversample;
  if (x >= static_cast<double>(kZeroCrossings) * kOversample) return 0.0;
  const auto i = static_cast<std::size_t>(x);
  const double frac = x - static_cast<double>(i);
  if (frac == 0.0) return table_[i];
  return table_[i] + (table_[i + 1] - table_[i]) * frac;
}

const SincTable& SincTable::instance() {
  static const SincTable table;
  return table;
}

std::size_t resampled_length(std::size_t frames, int rate_in, int rate_out) {
  const auto num = static_cast<unsigned long long>(frames) * static_cast<unsigned long long>(rate_out);
  return static_cast<std::size_t>((num + static_cast<unsigned long long>(rate_in) - 1) /
                                  static_cast<unsigned long long>(rate_in));
}

namespace {

struct ResampleSetup {
  double cutoff;      // relative to the input Nyquist
  double half_width;  // support radius in input samples
};

ResampleSetup setup_for(int rate_in, int rate_out) {
  if (rate_in <= 0 || rate_out <= 0) throw Error("sample rates must be positive");
  const double cutoff = std::min(1.0, static_cast<double>(rate_out) / rate_in);
  return {cutoff, SincTable::kZeroCrossings / cutoff};
}

inline double resample_one(std::span<const double> in, std::size_t m, int rate_in, int rate_out,
                           const ResampleSetup& s, const SincTable& h) {
  const double t = static_cast<double>(static_cast<long long>(m) * rate_in) / rate_out;
  const auto last = static_cast<long long>(in.size()) - 1;
  const long long j0 = std::max<long long>(0, static_cast<long long>(std::ceil(t - s.half_width)));
  const long long j1 = std::min<long long>(last, static_cast<long long>(std::floor(t + s.half_width)));
  double acc = 0.0;
  for (long long j = j0; j <= j1; ++j) {
    acc += in[static_cast<std::size_t>(j)] * h(std::fabs(t - static_cast<double>(j)) * s.cutoff);
  }
  return acc * s.cutoff;
}

inline void check_resample_sizes(std::span<const double> in, int rate_in, int rate_out, std::span<double> out) {
  if (out.size() != resampled_length(in.size(), rate_in, rate_out)) {
    throw Error("resample output buffer has the wrong length");
  }
}

inline void nearest_one(const double* x, std::size_t dim, std::span<const double> centroids,
                        int& index, double& best) {
  const std::size_t k = centroids.size() / dim;
  best = std::numeric_limits<double>::infinity();
  index = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double* mu = centroids.data() + c * dim;
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = x[j] - mu[j];
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      index = static_cast<int>(c);
    }
  }
}

}  // namespace

namespace serial {

void resample(std::span<const double> in, int rate_in, int rate_out, std::span<double> out) {
  check_resample_sizes(in, rate_in, rate_out, out);
  if (rate_in == rate_out) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  const ResampleSetup s = setup_for(rate_in, rate_out);
  const SincTable& h = SincTable::instance();
  for (std::size_t m = 0; m < out.size(); ++m) out[m] = resample_one(in, m, rate_in, rate_out, s, h);
}

void assign_nearest(std::span<const double> points, std::size_t dim, std::span<const double> centroids,
                    std::span<int> assignment, std::span<double> dist2) {
  const std::size_t n = assignment.size();
  for (std::size_t i = 0; i < n; ++i) {
    nearest_one(points.data() + i * dim, dim, centroids, assignment[i], dist2[i]);
  }
}

}  // namespace serial

namespace parallel {

void resample(std::span<const double> in, int rate_in, int rate_out, std::span<double> out) {
  check_resample_sizes(in, rate_in, rate_out, out);
  if (rate_in == rate_out) {
    std::copy(in.begin(), in.end(), out.begin());
    return;
  }
  const ResampleSetup s = setup_for(rate_in, rate_out);
  const SincTable& h = SincTable::instance();
  const auto n = static_cast<long long>(out.size());
#pragma omp parallel for schedule(static)
  for (long long m = 0; m < n; ++m) {
    out[static_cast<std::size_t>(m)] = resample_one(in, static_cast<std::size_t>(m), rate_in, rate_out, s, h);
  }
}

void assign_nearest(std::span<const double> points, std::size_t dim, std::span<const double> centroids,
                    std::span<int> assignment, std::span<double> dist2) {
  const auto n = static_cast<long long>(assignment.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    nearest_one(points.data() + u * dim, dim, centroids, assignment[u], dist2[u]);
  }
}

}  // namespace parallel

}  // namespace foley::kernels
