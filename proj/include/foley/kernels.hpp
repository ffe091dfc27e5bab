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


#ifndef FOLEY_KERNELS_HPP_
#define FOLEY_KERNELS_HPP_

// Data-parallel inner loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::parallel; the two must
// produce bit-identical output (every output element is computed by the
// same arithmetic regardless of which thread owns it).

#include <cstddef>
#include <span>
#include <vector>

namespace foley {

enum class Exec { kSerial, kParallel };

namespace kernels {

// Kaiser-windowed sinc, tabulated per zero crossing for linear lookup.
class SincTable {
 public:
  static constexpr int kZeroCrossings = 64;
  static constexpr int kOversample = 4096;
  static constexpr double kBeta = 8.6;

  SincTable();
  // Kernel value at `u` zero crossings from the centre; 0 outside support.
  double operator()(double u) const;

  static const SincTable& instance();

 private:
  std::vector<double> table_;
};

// Output length for resampling `frames` input samples.
std::size_t resampled_length(std::size_t frames, int rate_in, int rate_out);

namespace serial {

// Band-limited resampling of one channel; `out` sized by resampled_length.
void resample(std::span<const double> in, int rate_in, int rate_out, std::span<double> out);

// For every row of `points` (n x dim, row-major) finds the nearest centroid
// (k x dim); ties go to the lowest centroid index. Writes the index and the
// squared distance.
void assign_nearest(std::span<const double> points, std::size_t dim, std::span<const double> centroids,
                    std::span<int> assignment, std::span<double> dist2);

}  // namespace serial

namespace parallel {

void resample(std::span<const double> in, int rate_in, int rate_out, std::span<double> out);
void assign_nearest(std::span<const double> points, std::size_t dim, std::span<const double> centroids,
                    std::span<int> assignment, std::span<double> dist2);

}  // namespace parallel

inline void resample(Exec exec, std::span<const double> in, int rate_in, int rate_out, std::span<double> out) {
  if (exec == Exec::kParallel) parallel::resample(in, rate_in, rate_out, out);
  else serial::resample(in, rate_in, rate_out, out);
}

inline void assign_nearest(Exec exec, std::span<const double> points, std::size_t dim,
                           std::span<const double> centroids, std::span<int> assignment,
                           std::span<double> dist2) {
  if (exec == Exec::kParallel) parallel::assign_nearest(points, dim, centroids, assignment, dist2);
  else serial::assign_nearest(points, dim, centroids, assignment, dist2);
}

}  // namespace kernels
}  // namespace foley

#endif  // FOLEY_KERNELS_HPP_
