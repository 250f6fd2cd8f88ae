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

#include "sqt/features.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "sqt/error.h"

namespace sqt {

namespace {

constexpr double kPi = std::numbers::pi;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

size_t next_pow2(size_t n) {
  size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

struct FrameGeometry {
  int64_t window;  // samples per analysis window
  int64_t hop;     // samples per frame shift
  int64_t frames;  // 1 + floor((n - window) / hop)
};

FrameGeometry geometry(const Waveform& w, const FrontendConfig& cfg) {
  if (w.sample_rate != 8000 && w.sample_rate != 16000) {
    throw InputError("unsupported sample rate " + std::to_string(w.sample_rate));
  }
  FrameGeometry g;
  g.window = static_cast<int64_t>(std::lround(cfg.frame_length_ms * w.sample_rate / 1000.0));
  g.hop = static_cast<int64_t>(std::lround(cfg.frame_shift_ms * w.sample_rate / 1000.0));
  if (g.window <= 0 || g.hop <= 0) throw ConfigError("frame length and shift must be positive");
  const int64_t n = static_cast<int64_t>(w.samples.size());
  if (n < g.window) {
    throw InputError("waveform of " + std::to_string(n) + " samples is shorter than one " +
                     std::to_string(g.window) + "-sample analysis window");
  }
  g.frames = 1 + (n - g.window) / g.hop;
  return g;
}

// Triangular filterbank as a dense [n_mels, n_bins] weight table.
std::vector<double> mel_filterbank(int sample_rate, size_t fft_size, const FrontendConfig& cfg,
                                   size_t* n_bins_out) {
  if (cfg.n_mels < 1) throw ConfigError("n_mels must be >= 1");
  const size_t n_bins = fft_size / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.mel_low_hz);
  const double mel_hi = hz_to_mel(cfg.mel_high_frac * nyquist);
  std::vector<double> edges(static_cast<size_t>(cfg.n_mels) + 2);
  for (size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(cfg.n_mels + 1));
  }
  std::vector<double> bank(static_cast<size_t>(cfg.n_mels) * n_bins, 0.0);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      double wgt = 0.0;
      if (f > lo && f < center) {
        wgt = (f - lo) / (center - lo);
      } else if (f >= center && f < hi) {
        wgt = (hi - f) / (hi - center);
      }
      bank[static_cast<size_t>(m) * n_bins + k] = wgt;
    }
  }
  *n_bins_out = n_bins;
  return bank;
}

}  // namespace

TensorPtr log_mel(const Waveform& w, const FrontendConfig& cfg) {
  const FrameGeometry geo = geometry(w, cfg);
  const size_t fft_size = next_pow2(static_cast<size_t>(geo.window));
  size_t n_bins = 0;
  const std::vector<double> bank = mel_filterbank(w.sample_rate, fft_size, cfg, &n_bins);

  std::vector<double> hann(static_cast<size_t>(geo.window), 1.0);
  if (geo.window > 1) {
    for (int64_t i = 0; i < geo.window; ++i) {
      hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / static_cast<double>(geo.window - 1));
    }
  }

  auto out = Tensor::zeros({geo.frames, cfg.n_mels});
  std::vector<std::complex<double>> buf(fft_size);
  std::vector<double> power(n_bins);
  for (int64_t t = 0; t < geo.frames; ++t) {
    const double* frame = w.samples.data() + t * geo.hop;
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    for (int64_t i = 0; i < geo.window; ++i) buf[i] = frame[i] * hann[i];
    fft_inplace(buf);
    for (size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (int m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      const double* row = bank.data() + static_cast<size_t>(m) * n_bins;
      for (size_t k = 0; k < n_bins; ++k) e += row[k] * power[k];
      out->at(t, m) = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

TensorPtr deltas(const Tensor& f, int window) {
  if (f.rank() != 2) throw DimensionError("deltas expects [T, M], got " + shape_str(f.shape()));
  if (window < 1) throw ConfigError("delta window must be >= 1");
  const int64_t T = f.extent(0), M = f.extent(1);
  double denom = 0.0;
  for (int n = 1; n <= window; ++n) denom += 2.0 * n * n;
  auto out = Tensor::zeros(f.shape());
  for (int64_t t = 0; t < T; ++t) {
    for (int n = 1; n <= window; ++n) {
      const int64_t fwd = std::min<int64_t>(t + n, T - 1);
      const int64_t bwd = std::max<int64_t>(t - n, 0);
      for (int64_t m = 0; m < M; ++m) {
        out->at(t, m) += n * (f.at(fwd, m) - f.at(bwd, m));
      }
    }
    for (int64_t m = 0; m < M; ++m) out->at(t, m) /= denom;
  }
  return out;
}

TensorPtr stack_features(const Waveform& w, const FrontendConfig& cfg) {
  auto statics = log_mel(w, cfg);
  auto d1 = deltas(*statics, cfg.delta_window);
  auto d2 = deltas(*d1, cfg.delta_window);
  const int64_t T = statics->extent(0), M = statics->extent(1);
  auto out = Tensor::zeros({T, M, 3});
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t m = 0; m < M; ++m) {
      out->at(t, m, 0) = statics->at(t, m);
      out->at(t, m, 1) = d1->at(t, m);
      out->at(t, m, 2) = d2->at(t, m);
    }
  }
  return out;
}

std::vector<double> mel_centers_hz(int sample_rate, const FrontendConfig& cfg) {
  const double nyquist = sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.mel_low_hz);
  const double mel_hi = hz_to_mel(cfg.mel_high_frac * nyquist);
  std::vector<double> centers(static_cast<size_t>(cfg.n_mels));
  for (int m = 0; m < cfg.n_mels; ++m) {
    centers[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(m + 1) /
                                        static_cast<double>(cfg.n_mels + 1));
  }
  return centers;
}

void Cmvn::apply(Tensor& feats) const {
  if (feats.rank() != 3 ||
      feats.extent(1) * feats.extent(2) != static_cast<int64_t>(mean.size())) {
    throw DimensionError("CMVN stats cover " + std::to_string(mean.size()) +
                         " channels but features are " + shape_str(feats.shape()));
  }
  const int64_t T = feats.extent(0);
  const int64_t C = static_cast<int64_t>(mean.size());
  for (int64_t t = 0; t < T; ++t) {
    double* row = feats.data() + t * C;
    for (int64_t c = 0; c < C; ++c) row[c] = (row[c] - mean[c]) * inv_std[c];
  }
}

Cmvn compute_cmvn(const std::vector<TensorPtr>& corpus) {
  if (corpus.empty()) throw InputError("CMVN statistics need at least one utterance");
  const int64_t C = corpus.front()->extent(1) * corpus.front()->extent(2);
  std::vector<double> sum(static_cast<size_t>(C), 0.0), sumsq(static_cast<size_t>(C), 0.0);
  int64_t frames = 0;
  for (const auto& f : corpus) {
    if (f->rank() != 3 || f->extent(1) * f->extent(2) != C) {
      throw DimensionError("inconsistent feature shape " + shape_str(f->shape()) + " in CMVN corpus");
    }
    const int64_t T = f->extent(0);
    for (int64_t t = 0; t < T; ++t) {
      const double* row = f->data() + t * C;
      for (int64_t c = 0; c < C; ++c) {
        sum[c] += row[c];
        sumsq[c] += row[c] * row[c];
      }
    }
    frames += T;
  }
  Cmvn cmvn;
  cmvn.mean.resize(static_cast<size_t>(C));
  cmvn.inv_std.resize(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c) {
    cmvn.mean[c] = sum[c] / static_cast<double>(frames);
    const double var = std::max(0.0, sumsq[c] / static_cast<double>(frames) - cmvn.mean[c] * cmvn.mean[c]);
    cmvn.inv_std[c] = 1.0 / std::sqrt(var + 1e-10);
  }
  return cmvn;
}

void Cmvn::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open " + path + " for writing");
  const int64_t C = static_cast<int64_t>(mean.size());
  write_tensor(os, *Tensor::from({C}, mean));
  write_tensor(os, *Tensor::from({C}, inv_std));
  if (!os) throw InputError("short write to " + path);
}

Cmvn Cmvn::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open CMVN file " + path);
  Cmvn cmvn;
  cmvn.mean = read_tensor(is, path)->v;
  cmvn.inv_std = read_tensor(is, path)->v;
  if (cmvn.mean.size() != cmvn.inv_std.size()) {
    throw CorruptionError("CMVN mean/std size mismatch in " + path);
  }
  return cmvn;
}

}  // namespace sqt
