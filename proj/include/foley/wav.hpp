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


#ifndef FOLEY_WAV_HPP_
#define FOLEY_WAV_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace foley {

// Decoded audio of arbitrary layout, normalized to [-1, 1], interleaved.
struct DecodedAudio {
  int sample_rate = 0;
  int channels = 0;
  std::vector<double> samples;

  std::size_t frames() const { return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0; }
};

struct Pcm16Audio {
  int sample_rate = 0;
  int channels = 0;
  std::vector<std::int16_t> samples;
};

// Accepts PCM 8/16/24/32-bit and IEEE float 32/64, plain or extensible
// format chunks. Throws foley::Error on anything else.
DecodedAudio decode_wav(std::string_view bytes);
DecodedAudio read_wav(const std::filesystem::path& path);

// Strict reader for the challenge clip format family (16-bit PCM only).
Pcm16Audio decode_wav_pcm16(std::string_view bytes);
Pcm16Audio read_wav_pcm16(const std::filesystem::path& path);

std::string encode_wav_pcm16(std::span<const std::int16_t> samples, int sample_rate, int channels = 1);
void write_wav_pcm16(const std::filesystem::path& path, std::span<const std::int16_t> samples,
                     int sample_rate, int channels = 1);

}  // namespace foley

#endif  // FOLEY_WAV_HPP_
