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


#ifndef FOLEY_COMMON_HPP_
#define FOLEY_COMMON_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace foley {

inline constexpr std::string_view kToolVersion = "0.3.0";

// Operational failure: bad input file, violated precondition, I/O error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pairwise (cascade) summation. Exact for integer-valued inputs whose
// partial sums stay below 2^53, so results do not depend on grouping.
double pairwise_sum(std::span<const double> values);

double mean_of(std::span<const double> values);

// Deterministic PRNG used for every seeded decision in the harness. Only
// the raw 64-bit engine output is consumed so results are identical across
// standard library implementations.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n) by rejection; n > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);
// Independent stream seed for a named sub-job.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Lower-case hex of `bits` random bits (multiple of 4).
std::string random_hex(SeededRng& rng, int bits);
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename so readers never see a
// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

// Simple RFC-4180-ish CSV. Lines starting with '#' are provenance comments.
struct CsvRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;

  // Index of a header column; throws when absent.
  std::size_t column(std::string_view name) const;
};

std::vector<std::string> split_csv_line(std::string_view line);
CsvTable read_csv(const std::filesystem::path& path);
std::string csv_escape(std::string_view field);

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version{kToolVersion};

  std::string csv_comment() const;
  bool operator==(const Provenance&) const = default;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string format_double(double v);

}  // namespace foley

#endif  // FOLEY_COMMON_HPP_
