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

#ifndef SQT_ENCODER_H_
#define SQT_ENCODER_H_

#include <string>
#include <vector>

#include "sqt/layers.h"

namespace sqt {

// Speech encoder: two strided conv stages, a bidirectional conv-LSTM over
// frequency, then a stack of bidirectional LSTM layers with projections
// (projection + batch norm + ReLU) between consecutive LSTM layers.  The
// final biLSTM concatenation is the encoder output, so output dim is
// 2 * lstm_units == proj_dim.
struct SpeechEncoderConfig {
  int64_t n_mels = 80;
  int64_t in_depth = 3;
  int64_t conv_kernels = 32;       // per conv stage
  int64_t conv_lstm_filters = 32;  // per direction
  int64_t lstm_units = 256;        // per direction
  int64_t proj_dim = 512;          // inter-layer projection width; also output dim
  int64_t num_lstm_layers = 3;

  int64_t output_dim() const { return 2 * lstm_units; }
  // Scales widths by 1/k for desk-size experiments (geometry unchanged).
  SpeechEncoderConfig scaled(int64_t k) const;
  void validate() const;
};

class SpeechEncoder {
 public:
  // Fresh parameters under `prefix` in the registry.
  SpeechEncoder(const SpeechEncoderConfig& cfg, Rng& rng, ParamRegistry& reg,
                const std::string& prefix);
  // Task copy sharing the conv stages, the conv-LSTM, and the bottom
  // `shared_lstm_layers` biLSTM blocks (a block owns the projection that
  // follows it).  Layers above the boundary get fresh parameters.
  SpeechEncoder(const SpeechEncoder& base, int64_t shared_lstm_layers, Rng& rng,
                ParamRegistry& reg, const std::string& prefix);

  // [T, n_mels, 3] features to [ceil(T/4), output_dim] states.
  TensorPtr encode(Graph& g, const TensorPtr& feats, bool train);

  const SpeechEncoderConfig& config() const { return cfg_; }

 private:
  SpeechEncoderConfig cfg_;
  Conv2dLayer conv1_, conv2_;
  ConvLstm clstm_;
  std::vector<LstmCell> fwd_, bwd_;
  std::vector<Dense> proj_;
  std::vector<BatchNorm> proj_bn_;

  TensorPtr bilstm(Graph& g, const TensorPtr& xs, int64_t layer) const;
};

// Text encoder: embedding, one bidirectional LSTM at the bottom, then
// unidirectional LSTM layers; output dim equals uni_units == 2 * bi_units.
struct TextEncoderConfig {
  int64_t vocab = 90;
  int64_t embed_dim = 64;
  int64_t bi_units = 256;   // per direction
  int64_t uni_units = 512;
  int64_t num_uni_layers = 3;

  int64_t output_dim() const { return uni_units; }
  void validate() const;
};

class TextEncoder {
 public:
  TextEncoder(const TextEncoderConfig& cfg, Rng& rng, ParamRegistry& reg,
              const std::string& prefix);

  // Token indices to [len(tokens), output_dim] states.
  TensorPtr encode(Graph& g, const std::vector<int>& tokens, bool train);

  const TextEncoderConfig& config() const { return cfg_; }

 private:
  TextEncoderConfig cfg_;
  TensorPtr embedding_;  // [vocab, embed_dim]
  LstmCell bi_fwd_, bi_bwd_;
  std::vector<LstmCell> uni_;
};

}  // namespace sqt

#endif  // SQT_ENCODER_H_
