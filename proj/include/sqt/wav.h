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

#ifndef SQT_WAV_H_
#define SQT_WAV_H_

#include <string>
#include <vector>

namespace sqt {

// Mono audio; PCM16 on disk, floats in [-1, 1] in memory.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;

  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Reads a RIFF/WAVE file.  Only uncompressed PCM16 mono at 8 or 16 kHz is
// accepted; anything else is an input error naming the offending field.
Waveform read_wav(const std::string& path);

// Writes PCM16 mono.  Samples are clamped to [-1, 1] before quantization.
void write_wav(const std::string& path, const Waveform& w);

}  // namespace sqt

#endif  // SQT_WAV_H_
