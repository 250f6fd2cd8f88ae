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

#ifndef SQT_MODEL_H_
#define SQT_MODEL_H_

#include <memory>
#include <string>
#include <vector>

#include "sqt/decoder.h"
#include "sqt/encoder.h"

namespace sqt {

// One task head: a named decoder over the (possibly partially shared) speech
// encoder.  Typical names: "st" (translation), "asr" (recognition).
struct TaskConfig {
  std::string name;
  DecoderConfig decoder;
};

struct MultiTaskConfig {
  SpeechEncoderConfig encoder;
  // biLSTM layers shared across tasks, counted from the bottom.  The conv
  // stages and the conv-LSTM are always shared.  Irrelevant with one task.
  int64_t shared_lstm_layers = 3;
  std::vector<TaskConfig> tasks;

  void validate() const;
};

// A speech encoder shared (fully or partially) by one decoder per task.
// Construction is fully determined by (config, seed): parameter registration
// order and initial values are reproducible bit for bit.
class MultiTaskModel {
 public:
  MultiTaskModel(const MultiTaskConfig& cfg, uint64_t seed);

  const std::vector<std::string>& task_names() const { return names_; }
  bool has_task(const std::string& name) const;

  SpeechEncoder& encoder(const std::string& task);
  AttentionDecoder& decoder(const std::string& task);

  // [T, n_mels, 3] features to encoder states through the task's view of the
  // (partially shared) encoder.
  TensorPtr encode(Graph& g, const TensorPtr& feats, const std::string& task, bool train);

  // Teacher-forced loss of one utterance under the named task.
  AttentionDecoder::LossResult task_loss(Graph& g, const TensorPtr& feats,
                                         const std::vector<int>& target, const std::string& task,
                                         bool train, const Vocabulary& vocab);

  ParamRegistry& registry() { return reg_; }
  const ParamRegistry& registry() const { return reg_; }
  Rng& rng() { return rng_; }
  const MultiTaskConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }

 private:
  size_t task_index(const std::string& name) const;

  MultiTaskConfig cfg_;
  uint64_t seed_;
  Rng rng_;
  ParamRegistry reg_;
  std::vector<std::string> names_;
  // encoders_[0] owns the base parameters; later entries are task views that
  // alias everything at or below the sharing boundary.
  std::vector<std::unique_ptr<SpeechEncoder>> encoders_;
  std::vector<std::unique_ptr<AttentionDecoder>> decoders_;
};

// Character-level text-to-text model: text encoder plus attention decoder.
// Paired with a recognition model it forms the two-stage cascade.
struct NmtConfig {
  TextEncoderConfig encoder;
  DecoderConfig decoder;

  void validate() const;
};

class NmtModel {
 public:
  NmtModel(const NmtConfig& cfg, uint64_t seed);

  TextEncoder& encoder() { return *encoder_; }
  AttentionDecoder& decoder() { return *decoder_; }

  TensorPtr encode(Graph& g, const std::vector<int>& tokens, bool train);
  AttentionDecoder::LossResult loss(Graph& g, const std::vector<int>& source,
                                    const std::vector<int>& target, bool train,
                                    const Vocabulary& vocab);

  ParamRegistry& registry() { return reg_; }
  const ParamRegistry& registry() const { return reg_; }
  Rng& rng() { return rng_; }
  const NmtConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }

 private:
  NmtConfig cfg_;
  uint64_t seed_;
  Rng rng_;
  ParamRegistry reg_;
  std::unique_ptr<TextEncoder> encoder_;
  std::unique_ptr<AttentionDecoder> decoder_;
};

}  // namespace sqt

#endif  // SQT_MODEL_H_
