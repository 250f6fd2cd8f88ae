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

#ifndef SQT_DECODER_H_
#define SQT_DECODER_H_

#include <string>
#include <vector>

#include "sqt/layers.h"

namespace sqt {

class Vocabulary;

// Attention decoder: a stack of unidirectional LSTM layers.  Layer 1 consumes
// [embed(y_prev); previous context]; the attention context for this step is
// computed from layer 1's output and skip-connected into every later layer's
// input; the softmax consumes [top output; context].
struct DecoderConfig {
  int64_t depth = 4;        // D
  int64_t lstm_units = 256;
  int64_t embed_dim = 64;
  int64_t attn_hidden = 128;
  int64_t vocab = 90;
  int64_t enc_dim = 512;    // must match the encoder output

  void validate() const;
};

// Per-layer recurrent state plus the previous attention context.
struct DecoderState {
  std::vector<TensorPtr> h;
  std::vector<TensorPtr> c;
  TensorPtr context;  // c_{k-1}
  int64_t k = 0;      // next step index
};

// Soft input/output alignment of one decoded utterance: row k holds the
// attention distribution over encoder positions when emitting token k.
struct AlignmentMatrix {
  TensorPtr alpha;  // [K, L]
  std::string utterance_id;
  std::string decoder_name;
};

// Tab-separated export with output-token row labels and frame column labels.
void write_alignment(const std::string& path, const AlignmentMatrix& am,
                     const std::vector<std::string>& row_labels);

class AttentionDecoder {
 public:
  AttentionDecoder(const DecoderConfig& cfg, Rng& rng, ParamRegistry& reg,
                   const std::string& prefix);

  DecoderState initial_state() const;

  // a_e(h): attention keys, one row per encoder position.  Computed once per
  // utterance and reused by every step (h is fixed while decoding).
  TensorPtr attention_keys(Graph& g, const TensorPtr& h) const;

  struct Attended {
    TensorPtr context;  // [enc_dim]
    TensorPtr alpha;    // [L]
  };
  // alpha = softmax_l dot(a_e(h_l), a_d(o1)); context = sum_l alpha_l h_l.
  Attended attend(Graph& g, const TensorPtr& h, const TensorPtr& keys,
                  const TensorPtr& o1) const;

  struct StepResult {
    TensorPtr logits;  // [vocab], pre-softmax
    TensorPtr alpha;   // [L]
  };
  // One decode step; advances `st` in place.
  StepResult step(Graph& g, const TensorPtr& h, const TensorPtr& keys, int y_prev,
                  DecoderState& st) const;

  struct LossResult {
    TensorPtr loss;                     // scalar; mean cross-entropy per step
    std::vector<double> step_logprobs;  // log P(target_k) realized per step
    AlignmentMatrix alignment;          // [K, L]
  };
  // Teacher forcing over `target` (body tokens only; EOS is appended here,
  // SOS feeds step 0).  Loss is the mean over the K = len+1 steps.
  LossResult teacher_forced_loss(Graph& g, const TensorPtr& h, const std::vector<int>& target,
                                 const Vocabulary& vocab) const;

  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  TensorPtr embedding_;  // [vocab, embed_dim]
  std::vector<LstmCell> layers_;
  Dense ae_hidden_, ae_out_;  // a_e: enc_dim -> 128 tanh -> 128
  Dense ad_hidden_, ad_out_;  // a_d: lstm_units -> 128 tanh -> 128
  Dense out_;                 // W_y: [vocab, lstm_units + enc_dim]
};

}  // namespace sqt

#endif  // SQT_DECODER_H_
