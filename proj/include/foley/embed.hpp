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


#ifndef FOLEY_EMBED_HPP_
#define FOLEY_EMBED_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "foley/corpus.hpp"
#include "foley/kernels.hpp"

namespace foley {

struct EmbedderSpec {
  std::string model_id;
  std::size_t dim = 0;
  std::size_t frames_per_clip = 0;

  void validate() const;
};

// Analysis chain of the built-in embedder.
namespace builtin {
inline constexpr const char* kModelId = "builtin-logmel-v1";
inline constexpr std::size_t kWindows = 4;
inline constexpr std::size_t kWindowSamples = kClipRate;  // 1 s
inline constexpr std::size_t kFrameLength = 1024;
inline constexpr std::size_t kHop = 256;
inline constexpr std::size_t kFrames = (kWindowSamples - kFrameLength) / kHop + 1;  // 83
inline constexpr std::size_t kBins = kFrameLength / 2 + 1;
inline constexpr std::size_t kMelBands = 64;
inline constexpr std::size_t kDim = 2 * kMelBands;
inline constexpr double kLogFloor = 1e-10;

EmbedderSpec spec();
double hz_to_mel(double hz);
double mel_to_hz(double mel);
// kMelBands x kBins unit-peak triangular weights, row-major.
const std::vector<double>& mel_filterbank();
}  // namespace builtin

// Four 128-dim vectors (row-major, 4 x 128) for a conforming clip.
std::vector<float> builtin_embed(const AudioClip& clip);
std::vector<float> builtin_embed(std::span<const std::int16_t> samples);

// Embeds clips independently; the parallel path assigns whole clips to
// threads so results match the serial path exactly.
std::vector<std::vector<float>> builtin_embed_batch(std::span<const AudioClip> clips, Exec exec = Exec::kParallel);

struct EmbeddingMatrix {
  std::string model_id;
  std::size_t dim = 0;
  std::vector<std::string> clip_ids;
  std::vector<std::uint32_t> frames;                // per clip
  std::vector<std::string> groups;                  // per clip: system_id or split name
  std::vector<std::optional<Category>> categories;  // per clip
  std::map<std::string, std::string> attributes;
  std::vector<float> values;                        // rows x dim

  std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
  std::size_t clip_count() const { return clip_ids.size(); }

  void append(std::string clip_id, std::string group, std::optional<Category> category,
              std::span<const float> rows_data);
  // Throws on any broken invariant (row count, ordering, finiteness).
  void validate() const;
  // First row of each clip.
  std::vector<std::size_t> row_offsets() const;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

using GroupKey = std::pair<std::string, Category>;
// Clip indices per (group, category), in clip order.
std::map<GroupKey, std::vector<std::size_t>> group_index(const EmbeddingMatrix& m);
// All frame rows of the given clips, as doubles.
std::vector<double> gather_rows(const EmbeddingMatrix& m, std::span<const std::size_t> clips);
// One mean-pooled row per clip.
std::vector<double> pooled_rows(const EmbeddingMatrix& m, std::span<const std::size_t> clips);
// Concatenates matrices from the same embedder.
EmbeddingMatrix concat(std::span<const EmbeddingMatrix> parts);

std::string encode_embeddings(const EmbeddingMatrix& m);
EmbeddingMatrix decode_embeddings(std::string_view bytes);
void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);

struct ClipRef {
  std::string clip_id;
  std::string group;
  Category category;
};

// Reads <dir>/<clip_id>.femb for every clip (single-clip files).
EmbeddingMatrix import_external_embeddings(const std::filesystem::path& dir, std::span<const ClipRef> clips,
                                           const EmbedderSpec& spec);

}  // namespace foley

#endif  // FOLEY_EMBED_HPP_
