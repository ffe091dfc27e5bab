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


#include "foley/wav.hpp"

#include <cstring>
#include <optional>

#include <fmt/format.h>

#include "foley/common.hpp"

namespace foley {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const char* p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) |
                                    (static_cast<unsigned char>(p[1]) << 8));
}

std::uint32_t le32(const char* p) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(p[0])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24);
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct WavLayout {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  std::string_view data;
};

WavLayout parse_layout(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE") {
    throw Error("not a RIFF/WAVE file");
  }
  WavLayout layout;
  bool have_fmt = false;
  std::optional<std::string_view> data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id = bytes.substr(pos, 4);
    const std::uint32_t size = le32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (id == "data") {
      // Tolerate writers that leave a streaming placeholder size.
      const std::size_t avail = bytes.size() - body;
      data = bytes.substr(body, std::min<std::size_t>(size, avail));
      break;
    }
    if (body + size > bytes.size()) throw Error("truncated WAV chunk");
    if (id == "fmt ") {
      if (size < 16) throw Error("short fmt chunk");
      const char* p = bytes.data() + body;
      layout.format = le16(p);
      layout.channels = le16(p + 2);
      layout.sample_rate = le32(p + 4);
      layout.bits = le16(p + 14);
      if (layout.format == kFormatExtensible) {
        if (size < 40) throw Error("short extensible fmt chunk");
        layout.format = le16(p + 24);
      }
      have_fmt = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw Error("WAV has no fmt chunk");
  if (!data) throw Error("WAV has no data chunk");
  if (layout.channels == 0) throw Error("WAV declares zero channels");
  layout.data = *data;
  return layout;
}

}  // namespace

DecodedAudio decode_wav(std::string_view bytes) {
  const WavLayout layout = parse_layout(bytes);
  const std::size_t width = layout.bits / 8;
  const bool pcm = layout.format == kFormatPcm &&
                   (layout.bits == 8 || layout.bits == 16 || layout.bits == 24 || layout.bits == 32);
  const bool flt = layout.format == kFormatFloat && (layout.bits == 32 || layout.bits == 64);
  if (!pcm && !flt) {
    throw Error(fmt::format("unsupported WAV encoding (format {}, {} bits)", layout.format, layout.bits));
  }
  const std::size_t frame_bytes = width * layout.channels;
  const std::size_t frames = layout.data.size() / frame_bytes;
  DecodedAudio out;
  out.sample_rate = static_cast<int>(layout.sample_rate);
  out.channels = layout.channels;
  out.samples.resize(frames * layout.channels);
  const char* p = layout.data.data();
  for (std::size_t i = 0; i < out.samples.size(); ++i, p += width) {
    double v = 0.0;
    if (flt) {
      if (width == 4) {
        float f;
        std::uint32_t raw = le32(p);
        std::memcpy(&f, &raw, 4);
        v = f;
      } else {
        std::uint64_t raw = static_cast<std::uint64_t>(le32(p)) |
                            (static_cast<std::uint64_t>(le32(p + 4)) << 32);
        std::memcpy(&v, &raw, 8);
      }
    } else if (width == 1) {
      v = (static_cast<int>(static_cast<unsigned char>(*p)) - 128) / 128.0;
    } else if (width == 2) {
      v = static_cast<std::int16_t>(le16(p)) / 32768.0;
    } else if (width == 3) {
      std::int32_t s = static_cast<std::int32_t>(static_cast<unsigned char>(p[0]) |
                                                 (static_cast<unsigned char>(p[1]) << 8) |
                                                 (static_cast<unsigned char>(p[2]) << 16));
      if (s & 0x800000) s -= 0x1000000;
      v = s / 8388608.0;
    } else {
      v = static_cast<std::int32_t>(le32(p)) / 2147483648.0;
    }
    out.samples[i] = v;
  }
  return out;
}

DecodedAudio read_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(read_file(path));
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

Pcm16Audio decode_wav_pcm16(std::string_view bytes) {
  const WavLayout layout = parse_layout(bytes);
  if (layout.format != kFormatPcm || layout.bits != 16) {
    throw Error(fmt::format("expected 16-bit PCM, found format {} with {} bits", layout.format, layout.bits));
  }
  Pcm16Audio out;
  out.sample_rate = static_cast<int>(layout.sample_rate);
  out.channels = layout.channels;
  out.samples.resize(layout.data.size() / 2);
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    out.samples[i] = static_cast<std::int16_t>(le16(layout.data.data() + 2 * i));
  }
  return out;
}

Pcm16Audio read_wav_pcm16(const std::filesystem::path& path) {
  try {
    return decode_wav_pcm16(read_file(path));
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string encode_wav_pcm16(std::span<const std::int16_t> samples, int sample_rate, int channels) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, static_cast<std::uint16_t>(channels));
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate * channels * 2));
  put16(out, static_cast<std::uint16_t>(channels * 2));
  put16(out, 16);
  out += "data";
  put32(out, data_bytes);
  for (std::int16_t s : samples) put16(out, static_cast<std::uint16_t>(s));
  return out;
}

void write_wav_pcm16(const std::filesystem::path& path, std::span<const std::int16_t> samples,
                     int sample_rate, int channels) {
  write_file_atomic(path, encode_wav_pcm16(samples, sample_rate, channels));
}

}  // namespace foley
