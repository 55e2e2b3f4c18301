// Copyright 2026 The sefx Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sefx/wave.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sefx/errors.hpp"

namespace sefx {

void Waveform::Validate() const {
  if (sample_rate <= 0) throw InvalidConfig("waveform sample_rate must be > 0");
  if (samples.empty()) throw InvalidConfig("waveform must hold >= 1 sample");
  for (double s : samples)
    if (!std::isfinite(s)) throw InvalidConfig("waveform sample not finite");
}

double Energy(const Waveform& w) {
  double e = 0.0;
  for (double s : w.samples) e += s * s;
  return e;
}

namespace {

struct RiffChunk {
  char id[4];
  std::uint32_t size;
};

std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t ReadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void PutU16(std::ofstream& out, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<char*>(b), 2);
}
void PutU32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Waveform ReadWav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open WAV file: " + path);

  char riff[12];
  in.read(riff, 12);
  if (in.gcount() != 12 || std::memcmp(riff, "RIFF", 4) != 0 ||
      std::memcmp(riff + 8, "WAVE", 4) != 0)
    throw UnsupportedFormat("not a RIFF/WAVE file: " + path);

  std::uint16_t audio_format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::vector<unsigned char> data;
  bool have_fmt = false, have_data = false;

  while (in && !(have_fmt && have_data)) {
    char hdr[8];
    in.read(hdr, 8);
    if (in.gcount() != 8) break;
    const std::uint32_t chunk_size =
        ReadU32(reinterpret_cast<unsigned char*>(hdr + 4));
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      std::vector<unsigned char> fmt(chunk_size);
      in.read(reinterpret_cast<char*>(fmt.data()), chunk_size);
      if (chunk_size < 16) throw UnsupportedFormat("short fmt chunk: " + path);
      audio_format = ReadU16(fmt.data());
      channels = ReadU16(fmt.data() + 2);
      rate = ReadU32(fmt.data() + 4);
      bits = ReadU16(fmt.data() + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data.resize(chunk_size);
      in.read(reinterpret_cast<char*>(data.data()), chunk_size);
      if (in.gcount() != static_cast<std::streamsize>(chunk_size))
        throw IoFailure("truncated data chunk: " + path);
      have_data = true;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data)
    throw UnsupportedFormat("missing fmt or data chunk: " + path);
  if (channels != 1)
    throw UnsupportedFormat("only mono WAV is supported: " + path);

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  if (audio_format == 1 && bits == 16) {
    const std::size_t n = data.size() / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::int16_t s =
          static_cast<std::int16_t>(ReadU16(data.data() + 2 * i));
      w.samples[i] = static_cast<double>(s) / 32768.0;
    }
  } else if (audio_format == 3 && bits == 32) {
    const std::size_t n = data.size() / 4;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = ReadU32(data.data() + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      w.samples[i] = static_cast<double>(f);
    }
  } else {
    throw UnsupportedFormat("WAV encoding not supported (PCM16/float32 only): " +
                            path);
  }
  w.Validate();
  return w;
}

void WriteWav(const std::string& path, const Waveform& w, WavFormat format) {
  w.Validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open WAV file for writing: " + path);

  const std::uint32_t n = static_cast<std::uint32_t>(w.samples.size());
  const bool pcm = format == WavFormat::kPcm16;
  const std::uint16_t bytes_per = pcm ? 2 : 4;
  const std::uint32_t data_size = n * bytes_per;

  out.write("RIFF", 4);
  PutU32(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  PutU32(out, 16);
  PutU16(out, pcm ? 1 : 3);  // PCM or IEEE float
  PutU16(out, 1);            // mono
  PutU32(out, static_cast<std::uint32_t>(w.sample_rate));
  PutU32(out, static_cast<std::uint32_t>(w.sample_rate) * bytes_per);
  PutU16(out, bytes_per);
  PutU16(out, pcm ? 16 : 32);
  out.write("data", 4);
  PutU32(out, data_size);

  if (pcm) {
    for (double s : w.samples) {
      double x = s * 32768.0;
      if (x > 32767.0) x = 32767.0;
      if (x < -32768.0) x = -32768.0;
      const std::int16_t q = static_cast<std::int16_t>(std::lrint(x));
      PutU16(out, static_cast<std::uint16_t>(q));
    }
  } else {
    for (double s : w.samples) {
      const float f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      PutU32(out, u);
    }
  }
  if (!out) throw IoFailure("failed writing WAV file: " + path);
}

}  // namespace sefx
