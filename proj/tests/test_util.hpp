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


#ifndef FOLEY_TESTS_TEST_UTIL_HPP_
#define FOLEY_TESTS_TEST_UTIL_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <unistd.h>
#include <vector>

#include "foley/common.hpp"

namespace foley::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("foley-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> sine(double hz, int rate, std::size_t frames, double amp = 0.5) {
  std::vector<double> v(frames);
  for (std::size_t i = 0; i < frames; ++i) v[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / rate);
  return v;
}

inline std::vector<std::int16_t> random_pcm(std::size_t n, std::uint64_t seed, int amp = 12000) {
  SeededRng rng(seed);
  std::vector<std::int16_t> v(n);
  for (auto& s : v) s = static_cast<std::int16_t>(static_cast<int>(rng.below(2 * amp + 1)) - amp);
  return v;
}

}  // namespace foley::testing

#endif  // FOLEY_TESTS_TEST_UTIL_HPP_
