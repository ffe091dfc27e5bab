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


#include "foley/embed.hpp"

#include <bit>
#include <cmath>
#include <complex>
#include <cstring>

#include <Eigen/Core>
#include <unsupported/Eigen/FFT>
#include <fmt/format.h>
#include <json.hpp>

#include "foley/common.hpp"

namespace foley {

namespace fs = std::filesystem;
using json = nlohmann::json;

void EmbedderSpec::validate() const {
  if (model_id.empty()) throw Error("embedder model_id is empty");
  if (dim < 1) throw Error("embedder dim must be >= 1");
  if (frames_per_clip < 1) throw Error("embedder frames_per_clip must be >= 1");
}

namespace builtin {

EmbedderSpec spec() { return {kModelId, kDim, kWindows}; }

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

const std::vector<double>& mel_filterbank() {
  static const std::vector<double> bank = [] {
    std::vector<double> w(kMelBands * kBins, 0.0);
    const double top = hz_to_mel(kClipRate / 2.0);
    std::vector<double> edges(kMelBands + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(kMelBands + 1));
    }
    for (std::size_t b = 0; b < kMelBands; ++b) {
      const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
      for (std::size_t k = 0; k < kBins; ++k) {
        const double f = static_cast<double>(k) * kClipRate / static_cast<double>(kFrameLength);
        double v = 0.0;
        if (f > lo && f <= mid) v = (f - lo) / (mid - lo);
        else if (f > mid && f < hi) v = (hi - f) / (hi - mid);
        w[b * kBins + k] = v;
      }
    }
    return w;
  }();
  return bank;
}

}  // namespace builtin

std::vector<float> builtin_embed(std::span<const std::int16_t> samples) {
  using namespace builtin;
  if (samples.size() != kClipSamples) {
    throw Error(fmt::format("builtin embedder needs {} samples, got {}", kClipSamples, samples.size()));
  }
  const auto& bank = mel_filterbank();
  std::vector<double> hann(kFrameLength);
  for (std::size_t n = 0; n < kFrameLength; ++n) {
    hann[n] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(n) / static_cast<double>(kFrameLength));
  }

  Eigen::FFT<double> fft;
  std::vector<double> frame(kFrameLength);
  std::vector<std::complex<double>> spectrum;
  std::vector<double> logmel(kFrames * kMelBands);
  std::vector<float> out(kWindows * kDim);
  std::vector<double> column(kFrames);

  for (std::size_t w = 0; w < kWindows; ++w) {
    const std::size_t base = w * kWindowSamples;
    for (std::size_t t = 0; t < kFrames; ++t) {
      const std::size_t start = base + t * kHop;
      for (std::size_t n = 0; n < kFrameLength; ++n) {
        frame[n] = hann[n] * (static_cast<double>(samples[start + n]) / 32768.0);
      }
      fft.fwd(spectrum, frame);
      for (std::size_t b = 0; b < kMelBands; ++b) {
        const double* row = bank.data() + b * kBins;
        double e = 0.0;
        for (std::size_t k = 0; k < kBins; ++k) {
          if (row[k] != 0.0) e += row[k] * std::norm(spectrum[k]);
        }
        logmel[t * kMelBands + b] = std::log10(std::max(e, kLogFloor));
      }
    }
    for (std::size_t b = 0; b < kMelBands; ++b) {
      for (std::size_t t = 0; t < kFrames; ++t) column[t] = logmel[t * kMelBands + b];
      const double mu = mean_of(column);
      for (std::size_t t = 0; t < kFrames; ++t) column[t] = (column[t] - mu) * (column[t] - mu);
      const double var = mean_of(column);
      out[w * kDim + b] = static_cast<float>(mu);
      out[w * kDim + kMelBands + b] = static_cast<float>(std::sqrt(var));
    }
  }
  return out;
}

std::vector<float> builtin_embed(const AudioClip& clip) {
  if (!clip.conforms()) throw Error(fmt::format("clip '{}' does not conform to the clip format", clip.clip_id));
  return builtin_embed(clip.samples);
}

std::vector<std::vector<float>> builtin_embed_batch(std::span<const AudioClip> clips, Exec exec) {
  for (const auto& c : clips) {
    if (!c.conforms()) throw Error(fmt::format("clip '{}' does not conform to the clip format", c.clip_id));
  }
  builtin::mel_filterbank();
  std::vector<std::vector<float>> out(clips.size());
  const auto n = static_cast<long long>(clips.size());
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = builtin_embed(clips[static_cast<std::size_t>(i)].samples);
  } else {
    for (long long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = builtin_embed(clips[static_cast<std::size_t>(i)].samples);
  }
  return out;
}

void EmbeddingMatrix::append(std::string clip_id, std::string group, std::optional<Category> category,
                             std::span<const float> rows_data) {
  if (dim == 0) throw Error("embedding matrix has no dimension set");
  if (rows_data.empty() || rows_data.size() % dim != 0) {
    throw Error(fmt::format("clip '{}' has {} values, not a positive multiple of dim {}", clip_id, rows_data.size(), dim));
  }
  clip_ids.push_back(std::move(clip_id));
  groups.push_back(std::move(group));
  categories.push_back(category);
  frames.push_back(static_cast<std::uint32_t>(rows_data.size() / dim));
  values.insert(values.end(), rows_data.begin(), rows_data.end());
}

void EmbeddingMatrix::validate() const {
  EmbedderSpec{model_id, dim, 1}.validate();
  if (frames.size() != clip_ids.size() || groups.size() != clip_ids.size() || categories.size() != clip_ids.size()) {
    throw Error("embedding matrix per-clip arrays differ in length");
  }
  std::size_t total = 0;
  for (auto f : frames) {
    if (f == 0) throw Error("clip with zero frames");
    total += f;
  }
  if (total * dim != values.size()) {
    throw Error(fmt::format("embedding matrix has {} values, expected {} rows x {}", values.size(), total, dim));
  }
  std::size_t row = 0;
  for (std::size_t c = 0; c < clip_ids.size(); ++c) {
    for (std::uint32_t f = 0; f < frames[c]; ++f, ++row) {
      for (std::size_t j = 0; j < dim; ++j) {
        if (!std::isfinite(values[row * dim + j])) {
          throw Error(fmt::format("non-finite embedding value in clip '{}' row {}", clip_ids[c], f));
        }
      }
    }
  }
}

std::vector<std::size_t> EmbeddingMatrix::row_offsets() const {
  std::vector<std::size_t> off(clip_ids.size());
  std::size_t row = 0;
  for (std::size_t c = 0; c < clip_ids.size(); ++c) {
    off[c] = row;
    row += frames[c];
  }
  return off;
}

std::map<GroupKey, std::vector<std::size_t>> group_index(const EmbeddingMatrix& m) {
  std::map<GroupKey, std::vector<std::size_t>> out;
  for (std::size_t c = 0; c < m.clip_ids.size(); ++c) {
    if (!m.categories[c]) continue;
    out[{m.groups[c], *m.categories[c]}].push_back(c);
  }
  return out;
}

std::vector<double> gather_rows(const EmbeddingMatrix& m, std::span<const std::size_t> clips) {
  const auto off = m.row_offsets();
  std::vector<double> out;
  for (std::size_t c : clips) {
    const float* p = m.values.data() + off[c] * m.dim;
    out.insert(out.end(), p, p + static_cast<std::size_t>(m.frames[c]) * m.dim);
  }
  return out;
}

std::vector<double> pooled_rows(const EmbeddingMatrix& m, std::span<const std::size_t> clips) {
  const auto off = m.row_offsets();
  std::vector<double> out(clips.size() * m.dim);
  std::vector<double> column;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const std::size_t c = clips[i];
    column.resize(m.frames[c]);
    for (std::size_t j = 0; j < m.dim; ++j) {
      for (std::uint32_t f = 0; f < m.frames[c]; ++f) column[f] = m.values[(off[c] + f) * m.dim + j];
      out[i * m.dim + j] = mean_of(column);
    }
  }
  return out;
}

EmbeddingMatrix concat(std::span<const EmbeddingMatrix> parts) {
  if (parts.empty()) throw Error("nothing to concatenate");
  EmbeddingMatrix out;
  out.model_id = parts.front().model_id;
  out.dim = parts.front().dim;
  for (const auto& p : parts) {
    if (p.model_id != out.model_id || p.dim != out.dim) {
      throw Error(fmt::format("cannot mix embedders '{}'/{} and '{}'/{}", out.model_id, out.dim, p.model_id, p.dim));
    }
    out.clip_ids.insert(out.clip_ids.end(), p.clip_ids.begin(), p.clip_ids.end());
    out.frames.insert(out.frames.end(), p.frames.begin(), p.frames.end());
    out.groups.insert(out.groups.end(), p.groups.begin(), p.groups.end());
    out.categories.insert(out.categories.end(), p.categories.begin(), p.categories.end());
    out.values.insert(out.values.end(), p.values.begin(), p.values.end());
    for (const auto& [k, v] : p.attributes) out.attributes.emplace(k, v);
  }
  return out;
}

namespace {

constexpr std::string_view kMagic = "FEMB";
constexpr std::uint16_t kVersion = 1;
static_assert(std::endian::native == std::endian::little, "embedding I/O assumes a little-endian host");

}  // namespace

std::string encode_embeddings(const EmbeddingMatrix& m) {
  m.validate();
  json header;
  header["model_id"] = m.model_id;
  header["dim"] = m.dim;
  header["clip_ids"] = m.clip_ids;
  header["frames_per_clip"] = m.frames;
  header["groups"] = m.groups;
  json cats = json::array();
  for (const auto& c : m.categories) cats.push_back(c ? json(std::string(category_name(*c))) : json(nullptr));
  header["categories"] = cats;
  header["attributes"] = m.attributes;
  const std::string text = header.dump();

  std::string out;
  out.reserve(10 + text.size() + m.values.size() * 4);
  out += kMagic;
  out.push_back(static_cast<char>(kVersion & 0xff));
  out.push_back(static_cast<char>(kVersion >> 8));
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((len >> (8 * i)) & 0xff));
  out += text;
  const std::size_t at = out.size();
  out.resize(at + m.values.size() * sizeof(float));
  std::memcpy(out.data() + at, m.values.data(), m.values.size() * sizeof(float));
  return out;
}

EmbeddingMatrix decode_embeddings(std::string_view bytes) {
  if (bytes.size() < 10 || bytes.substr(0, 4) != kMagic) throw Error("not an embedding file (bad magic)");
  const auto version = static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[4]) |
                                                  (static_cast<unsigned char>(bytes[5]) << 8));
  if (version != kVersion) throw Error(fmt::format("unsupported embedding file version {}", version));
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[6 + i])) << (8 * i);
  if (10 + static_cast<std::size_t>(len) > bytes.size()) throw Error("header length exceeds file size");

  EmbeddingMatrix m;
  try {
    const json header = json::parse(bytes.substr(10, len));
    m.model_id = header.at("model_id").get<std::string>();
    m.dim = header.at("dim").get<std::size_t>();
    m.clip_ids = header.at("clip_ids").get<std::vector<std::string>>();
    m.frames = header.at("frames_per_clip").get<std::vector<std::uint32_t>>();
    if (header.contains("groups")) m.groups = header["groups"].get<std::vector<std::string>>();
    else m.groups.assign(m.clip_ids.size(), "");
    m.categories.assign(m.clip_ids.size(), std::nullopt);
    if (header.contains("categories")) {
      const auto& cats = header["categories"];
      if (cats.size() != m.clip_ids.size()) throw Error("categories length differs from clip_ids");
      for (std::size_t i = 0; i < cats.size(); ++i) {
        if (!cats[i].is_null()) m.categories[i] = category_from_string(cats[i].get<std::string>());
      }
    }
    if (header.contains("attributes")) m.attributes = header["attributes"].get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw Error(fmt::format("malformed embedding header: {}", e.what()));
  }
  if (m.dim == 0) throw Error("embedding header declares dim 0");
  if (m.frames.size() != m.clip_ids.size() || m.groups.size() != m.clip_ids.size()) {
    throw Error("embedding header arrays differ in length");
  }
  std::size_t rows = 0;
  for (auto f : m.frames) rows += f;
  const std::size_t payload = bytes.size() - 10 - len;
  const std::size_t expected = rows * m.dim * sizeof(float);
  if (payload != expected) {
    throw Error(fmt::format("payload size mismatch: header declares {} rows x dim {} ({} bytes), payload has {} bytes",
                            rows, m.dim, expected, payload));
  }
  m.values.resize(rows * m.dim);
  std::memcpy(m.values.data(), bytes.data() + 10 + len, expected);
  m.validate();
  return m;
}

void write_embeddings(const EmbeddingMatrix& m, const fs::path& path) {
  write_file_atomic(path, encode_embeddings(m));
}

EmbeddingMatrix read_embeddings(const fs::path& path) {
  try {
    return decode_embeddings(read_file(path));
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

EmbeddingMatrix import_external_embeddings(const fs::path& dir, std::span<const ClipRef> clips,
                                           const EmbedderSpec& spec) {
  spec.validate();
  EmbeddingMatrix out;
  out.model_id = spec.model_id;
  out.dim = spec.dim;
  for (const auto& clip : clips) {
    const fs::path p = dir / (clip.clip_id + ".femb");
    if (!fs::exists(p)) throw Error(fmt::format("missing embedding for clip '{}' ({})", clip.clip_id, p.string()));
    const EmbeddingMatrix one = read_embeddings(p);
    if (one.clip_count() != 1) {
      throw Error(fmt::format("{}: exchange files hold exactly one clip, found {}", p.string(), one.clip_count()));
    }
    if (one.dim != spec.dim) {
      throw Error(fmt::format("clip '{}': dimension mismatch ({} != {})", clip.clip_id, one.dim, spec.dim));
    }
    out.append(clip.clip_id, clip.group, clip.category, one.values);
  }
  out.validate();
  return out;
}

}  // namespace foley
