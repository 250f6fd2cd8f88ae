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

#ifndef SQT_FEATURES_H_
#define SQT_FEATURES_H_

#include <string>
#include <vector>

#include "sqt/tensor.h"
#include "sqt/wav.h"

namespace sqt {

// Log-mel frontend settings.  Defaults are the conventional telephone-band
// choices; everything here lands in the run config so a feature file can be
// reproduced from its settings alone.
struct FrontendConfig {
  int n_mels = 80;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  double mel_low_hz = 125.0;
  double mel_high_frac = 0.95;  // high edge as a fraction of Nyquist
  double log_floor = 1e-10;     // natural-log energy floor
  int delta_window = 2;         // regression half-width, both delta orders
};

// Per-frame log-mel energies: Hann window, power spectrum via a DFT of the
// next power of two, triangular mel filterbank, natural log with floor.
// Output is [T, n_mels] with T = 1 + floor((samples - window) / hop).
TensorPtr log_mel(const Waveform& w, const FrontendConfig& cfg = {});

// Regression deltas d_t = sum_n n*(c_{t+n} - c_{t-n}) / (2*sum_n n^2) over
// n = 1..window, with edge frames replicated.  Input and output are [T, M].
TensorPtr deltas(const Tensor& f, int window = 2);

// Full feature stack [T, n_mels, 3]: depth 0 static log-mel, depth 1 deltas,
// depth 2 delta-deltas.
TensorPtr stack_features(const Waveform& w, const FrontendConfig& cfg = {});

// Center frequencies (Hz) of the mel filters; used to sanity-check filter
// geometry against known tones.
std::vector<double> mel_centers_hz(int sample_rate, const FrontendConfig& cfg = {});

// Per-channel mean/variance normalization statistics over a feature corpus.
// A channel is one (mel band, depth) pair, so stats cover n_mels*3 slots.
struct Cmvn {
  std::vector<double> mean;
  std::vector<double> inv_std;

  // Normalizes one [T, n_mels, 3] feature tensor in place.
  void apply(Tensor& feats) const;

  void save(const std::string& path) const;
  static Cmvn load(const std::string& path);
};

Cmvn compute_cmvn(const std::vector<TensorPtr>& corpus);

}  // namespace sqt

#endif  // SQT_FEATURES_H_
