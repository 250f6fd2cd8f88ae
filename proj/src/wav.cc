// Copyright 2026 The sqt Authors.
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

#include "sqt/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sqt/error.h"

namespace sqt {

namespace {

template <typename T>
T read_le(std::istream& is, const std::string& path) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InputError("truncated WAV file: " + path);
  return v;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void check_rate(int rate, const std::string& path) {
  if (rate != 8000 && rate != 16000) {
    throw InputError("unsupported sample rate " + std::to_string(rate) + " in " + path +
                     " (want 8000 or 16000)");
  }
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open WAV file " + path);

  char tag[4];
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "RIFF", 4) != 0) throw InputError("not a RIFF file: " + path);
  read_le<uint32_t>(is, path);  // riff payload size; chunk walk below rechecks bounds
  is.read(tag, 4);
  if (!is || std::memcmp(tag, "WAVE", 4) != 0) throw InputError("not a WAVE file: " + path);

  Waveform w;
  bool have_fmt = false, have_data = false;
  while (is.read(tag, 4)) {
    const uint32_t chunk_size = read_le<uint32_t>(is, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw InputError("short fmt chunk in " + path);
      const uint16_t format = read_le<uint16_t>(is, path);
      const uint16_t channels = read_le<uint16_t>(is, path);
      const uint32_t rate = read_le<uint32_t>(is, path);
      read_le<uint32_t>(is, path);  // byte rate
      read_le<uint16_t>(is, path);  // block align
      const uint16_t bits = read_le<uint16_t>(is, path);
      if (format != 1) throw InputError("WAV format " + std::to_string(format) + " is not PCM: " + path);
      if (channels != 1) throw InputError(std::to_string(channels) + "-channel WAV not supported (want mono): " + path);
      if (bits != 16) throw InputError(std::to_string(bits) + "-bit WAV not supported (want 16): " + path);
      check_rate(static_cast<int>(rate), path);
      w.sample_rate = static_cast<int>(rate);
      is.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw InputError("WAV data chunk precedes fmt chunk: " + path);
      const size_t n = chunk_size / 2;
      std::vector<int16_t> raw(n);
      is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(chunk_size));
      if (!is) throw InputError("truncated WAV data in " + path);
      w.samples.resize(n);
      for (size_t i = 0; i < n; ++i) w.samples[i] = raw[i] / 32768.0;
      have_data = true;
    } else {
      // Skip unknown chunks (word-aligned).
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data) throw InputError("WAV missing fmt or data chunk: " + path);
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  check_rate(w.sample_rate, path);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open " + path + " for writing");

  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  os.write("RIFF", 4);
  write_le<uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  write_le<uint32_t>(os, 16);
  write_le<uint16_t>(os, 1);  // PCM
  write_le<uint16_t>(os, 1);  // mono
  write_le<uint32_t>(os, static_cast<uint32_t>(w.sample_rate));
  write_le<uint32_t>(os, static_cast<uint32_t>(w.sample_rate * 2));
  write_le<uint16_t>(os, 2);
  write_le<uint16_t>(os, 16);
  os.write("data", 4);
  write_le<uint32_t>(os, data_bytes);
  for (double s : w.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    write_le<int16_t>(os, static_cast<int16_t>(std::lrint(clamped * 32767.0)));
  }
  if (!os) throw InputError("short write to " + path);
}

}  // namespace sqt
