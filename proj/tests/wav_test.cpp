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

#include <cstring>

#include "foley/wav.hpp"
#include "test_util.hpp"

namespace foley {
namespace {

void put_u16(std::string& s, std::uint16_t v) { s.append(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::string& s, std::uint32_t v) { s.append(reinterpret_cast<const char*>(&v), 4); }

// Hand-built RIFF file so the decoder is checked against an independent writer.
std::string make_wav(std::uint16_t format, int channels, int rate, int bits, const std::string& data) {
  std::string fmt;
  put_u16(fmt, format);
  put_u16(fmt, static_cast<std::uint16_t>(channels));
  put_u32(fmt, static_cast<std::uint32_t>(rate));
  put_u32(fmt, static_cast<std::uint32_t>(rate * channels * bits / 8));
  put_u16(fmt, static_cast<std::uint16_t>(channels * bits / 8));
  put_u16(fmt, static_cast<std::uint16_t>(bits));
  std::string out = "RIFF";
  put_u32(out, static_cast<std::uint32_t>(4 + 8 + fmt.size() + 8 + data.size()));
  out += "WAVEfmt ";
  put_u32(out, static_cast<std::uint32_t>(fmt.size()));
  out += fmt;
  out += "data";
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  out += data;
  return out;
}

TEST(Wav, Pcm16RoundTrip) {
  const auto pcm = testing::random_pcm(2 * 1000, 7, 32767);
  const std::string bytes = encode_wav_pcm16(pcm, 22050, 2);
  EXPECT_EQ(bytes.size(), 44u + pcm.size() * 2);
  const Pcm16Audio a = decode_wav_pcm16(bytes);
  EXPECT_EQ(a.sample_rate, 22050);
  EXPECT_EQ(a.channels, 2);
  EXPECT_EQ(a.samples, pcm);
  const DecodedAudio d = decode_wav(bytes);
  EXPECT_EQ(d.frames(), 1000u);
  EXPECT_DOUBLE_EQ(d.samples[5], pcm[5] / 32768.0);
}

TEST(Wav, FileRoundTrip) {
  testing::TempDir dir;
  const auto pcm = testing::random_pcm(500, 1);
  write_wav_pcm16(dir / "a.wav", pcm, 16000);
  const Pcm16Audio a = read_wav_pcm16(dir / "a.wav");
  EXPECT_EQ(a.samples, pcm);
  EXPECT_EQ(a.sample_rate, 16000);
}

TEST(Wav, DecodesFloat32) {
  const float vals[3] = {0.5f, -0.25f, 1.0f};
  std::string data(reinterpret_cast<const char*>(vals), sizeof vals);
  const DecodedAudio d = decode_wav(make_wav(3, 1, 48000, 32, data));
  ASSERT_EQ(d.samples.size(), 3u);
  EXPECT_EQ(d.samples[0], 0.5);
  EXPECT_EQ(d.samples[1], -0.25);
  EXPECT_EQ(d.sample_rate, 48000);
}

TEST(Wav, DecodesPcm8And24) {
  const std::string d8("\x80\xff\x00", 3);
  const DecodedAudio a = decode_wav(make_wav(1, 1, 8000, 8, d8));
  ASSERT_EQ(a.samples.size(), 3u);
  EXPECT_EQ(a.samples[0], 0.0);
  EXPECT_EQ(a.samples[2], -1.0);
  const std::string d24("\x00\x00\x40\x00\x00\xc0", 6);
  const DecodedAudio b = decode_wav(make_wav(1, 1, 8000, 24, d24));
  ASSERT_EQ(b.samples.size(), 2u);
  EXPECT_EQ(b.samples[0], 0.5);
  EXPECT_EQ(b.samples[1], -0.5);
}

TEST(Wav, StrictReaderRejectsNon16Bit) {
  const float v = 0.1f;
  const std::string bytes = make_wav(3, 1, 44100, 32, std::string(reinterpret_cast<const char*>(&v), 4));
  EXPECT_NO_THROW(decode_wav(bytes));
  EXPECT_THROW(decode_wav_pcm16(bytes), Error);
}

TEST(Wav, RejectsGarbage) {
  EXPECT_THROW(decode_wav("not a wav file at all, definitely not"), Error);
  EXPECT_THROW(decode_wav(""), Error);
  const std::string bytes = make_wav(2, 1, 8000, 4, std::string(4, '\0'));  // ADPCM
  EXPECT_THROW(decode_wav(bytes), Error);
  EXPECT_THROW(read_wav("/nonexistent/x.wav"), Error);
}

}  // namespace
}  // namespace foley
