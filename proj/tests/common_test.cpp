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

#include <set>

#include "foley/common.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

TEST(PairwiseSum, ExactOnIntegers) {
  std::vector<double> v(1001);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  EXPECT_EQ(pairwise_sum(v), 500500.0);
  EXPECT_EQ(mean_of(v), 500.0);
}

TEST(PairwiseSum, EmptyIsZero) { EXPECT_EQ(pairwise_sum({}), 0.0); }

TEST(SeededRng, SameSeedSameStream) {
  SeededRng a(99), b(99), c(100);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(SeededRng, BelowStaysInRange) {
  SeededRng rng(5);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 7000; ++i) ++hist[rng.below(7)];
  for (int h : hist) EXPECT_GT(h, 800);
}

TEST(SeededRng, ShuffleIsPermutation) {
  SeededRng rng(3);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v);
  std::multiset<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(s.count(i), 1u);
}

TEST(DeriveSeed, TagsSeparateStreams) {
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  EXPECT_EQ(derive_seed(7, "plan/x"), derive_seed(7, "plan/x"));
}

TEST(RandomHex, LengthAndAlphabet) {
  SeededRng rng(1);
  const std::string h = random_hex(rng, 128);
  EXPECT_EQ(h.size(), 32u);
  EXPECT_EQ(h.find_first_not_of("0123456789abcdef"), std::string::npos);
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(std::string_view("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(std::string_view("abc")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Csv, QuotedFields) {
  const auto f = split_csv_line(R"(a,"b,c","d ""q""",)");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "b,c");
  EXPECT_EQ(f[2], "d \"q\"");
  EXPECT_EQ(f[3], "");
  EXPECT_EQ(csv_escape("x,y"), "\"x,y\"");
  EXPECT_EQ(csv_escape("plain"), "plain");
}

TEST(Csv, SkipsProvenanceComments) {
  testing::TempDir dir;
  write_file_atomic(dir / "a.csv", "# tool=x\nh1,h2\n1,2\n");
  const CsvTable t = read_csv(dir / "a.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"h1", "h2"}));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].line, 3u);
  EXPECT_EQ(t.column("h2"), 1u);
  EXPECT_THROW(t.column("nope"), Error);
}

TEST(WriteFileAtomic, ReplacesContent) {
  testing::TempDir dir;
  write_file_atomic(dir / "f", "one");
  write_file_atomic(dir / "f", "two");
  EXPECT_EQ(read_file(dir / "f"), "two");
  EXPECT_THROW(read_file(dir / "missing"), Error);
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-17, 12345.678}) EXPECT_EQ(std::stod(format_double(v)), v);
}

}  // namespace
}  // namespace foley
