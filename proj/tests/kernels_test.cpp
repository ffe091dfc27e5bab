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

#include <cmath>
#include <cstring>

#include "foley/kernels.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(Kernels, ResampledLength) {
  EXPECT_EQ(kernels::resampled_length(44100, 44100, 22050), 22050u);
  EXPECT_EQ(kernels::resampled_length(3, 44100, 22050), 2u);
  EXPECT_EQ(kernels::resampled_length(16000, 16000, 22050), 22050u);
  EXPECT_EQ(kernels::resampled_length(0, 48000, 22050), 0u);
}

TEST(Kernels, SincTableShape) {
  const auto& s = kernels::SincTable::instance();
  EXPECT_NEAR(s(0.0), 1.0, 1e-12);
  EXPECT_NEAR(s(1.0), 0.0, 1e-9);
  EXPECT_NEAR(s(3.0), 0.0, 1e-9);
  EXPECT_EQ(s(kernels::SincTable::kZeroCrossings + 1.0), 0.0);
}

TEST(Kernels, ResampleSerialParallelBitIdentical) {
  SeededRng rng(11);
  for (int rate : {16000, 32000, 44100, 48000, 22050}) {
    std::vector<double> in(rate / 3);
    for (auto& x : in) x = rng.uniform() - 0.5;
    const std::size_t n = kernels::resampled_length(in.size(), rate, 22050);
    std::vector<double> a(n), b(n);
    kernels::serial::resample(in, rate, 22050, a);
    kernels::parallel::resample(in, rate, 22050, b);
    EXPECT_TRUE(bit_equal(a, b)) << rate;
  }
}

TEST(Kernels, ResamplePreservesLowTone) {
  const auto in = testing::sine(440.0, 44100, 44100);
  std::vector<double> out(kernels::resampled_length(in.size(), 44100, 22050));
  kernels::resample(Exec::kSerial, in, 44100, 22050, out);
  const auto ref = testing::sine(440.0, 22050, out.size());
  // Away from the edges the output tracks the tone.
  for (std::size_t i = 2000; i < out.size() - 2000; i += 37) EXPECT_NEAR(out[i], ref[i], 2e-3);
}

TEST(Kernels, ResampleRemovesAboveNyquist) {
  const auto in = testing::sine(15000.0, 44100, 44100);
  std::vector<double> out(kernels::resampled_length(in.size(), 44100, 22050));
  kernels::resample(Exec::kParallel, in, 44100, 22050, out);
  double peak = 0.0;
  for (std::size_t i = 2000; i < out.size() - 2000; ++i) peak = std::max(peak, std::abs(out[i]));
  EXPECT_LT(peak, 0.01);
}

TEST(Kernels, AssignNearestMatchesBruteForce) {
  SeededRng rng(5);
  const std::size_t n = 3000, k = 17, dim = 9;
  std::vector<double> pts(n * dim), cen(k * dim);
  for (auto& x : pts) x = rng.normal();
  for (auto& x : cen) x = rng.normal();
  std::vector<int> as(n), ap(n);
  std::vector<double> ds(n), dp(n);
  kernels::serial::assign_nearest(pts, dim, cen, as, ds);
  kernels::parallel::assign_nearest(pts, dim, cen, ap, dp);
  EXPECT_EQ(as, ap);
  EXPECT_TRUE(bit_equal(ds, dp));
  for (std::size_t i = 0; i < n; i += 101) {
    double best = INFINITY;
    int arg = -1;
    for (std::size_t c = 0; c < k; ++c) {
      double d = 0;
      for (std::size_t j = 0; j < dim; ++j) d += (pts[i * dim + j] - cen[c * dim + j]) * (pts[i * dim + j] - cen[c * dim + j]);
      if (d < best) best = d, arg = static_cast<int>(c);
    }
    EXPECT_EQ(as[i], arg);
    EXPECT_NEAR(ds[i], best, 1e-12 * (1 + best));
  }
}

TEST(Kernels, AssignNearestTieGoesToLowestIndex) {
  const std::vector<double> pts = {0.0, 0.0};
  const std::vector<double> cen = {1.0, 0.0, -1.0, 0.0, 0.0, 1.0};
  std::vector<int> a(1);
  std::vector<double> d(1);
  kernels::assign_nearest(Exec::kParallel, pts, 2, cen, a, d);
  EXPECT_EQ(a[0], 0);
  EXPECT_EQ(d[0], 1.0);
}

}  // namespace
}  // namespace foley
