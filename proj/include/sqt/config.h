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

#ifndef SQT_CONFIG_H_
#define SQT_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>

#include "sqt/beam.h"
#include "sqt/features.h"
#include "sqt/model.h"
#include "sqt/optimizer.h"
#include "sqt/trainer.h"

namespace sqt {

// Decode-section overrides.  Every field is tri-state: absent keys keep the
// task defaults, so a config can pin just the beam width and still inherit
// the per-task margin/alpha conventions.  `eos_margin` additionally accepts
// an explicit null to switch the gate off.
struct DecodeOverrides {
  std::optional<int64_t> beam_width;
  std::optional<int64_t> rank_prune;
  std::optional<double> alpha;
  std::optional<int64_t> max_len;
  bool set_eos_margin = false;        // true when the key appeared at all
  std::optional<double> eos_margin;   // nullopt with set => gate off

  DecodeConfig apply(DecodeConfig base) const;
};

struct DataSection {
  std::string train_manifest;
  std::string eval_manifest;
  std::string cache_dir;
  int bucket_width = 16;
};

// One experiment, parsed from a strict-schema JSON file.  Section defaults
// reproduce the full-size recipe (80-mel frontend, 3x512 bi-LSTM encoder,
// one 4-layer translation decoder, Adam with delayed weight noise); desk
// runs override widths in the file.  Unknown keys anywhere are a
// ConfigError, so typos cannot silently fall back to defaults.
struct ExperimentConfig {
  uint64_t seed = 0;
  MultiTaskConfig model;                          // speech encoder + speech-task decoders
  std::optional<TextEncoderConfig> text_encoder;  // only for text-to-text runs
  std::optional<DecoderConfig> nmt_decoder;       // the "nmt" entry of `decoders`
  FrontendConfig frontend;
  OptimizerConfig optimizer;
  TaskSchedule schedule{{{"st", 0.75}, {"asr", 0.25}}};
  int64_t steps = 1000;
  int64_t checkpoint_every = 500;
  DecodeOverrides decode;
  DataSection data;

  std::string text;   // verbatim file bytes; travels into checkpoints
  uint64_t hash = 0;  // fnv1a64(text); printed by every command

  void validate() const;

  // Speech model with the non-"nmt" decoders; ConfigError when none exist.
  MultiTaskConfig speech_config() const;
  // Text model from `text_encoder` plus the "nmt" decoder; ConfigError when
  // either is missing.
  NmtConfig nmt_config() const;

  // Task decode defaults (recognition: margin 3.0, no length normalization;
  // translation: alpha 0.6, no margin) with this config's overrides applied.
  DecodeConfig decode_config_for(const std::string& task) const;
};

// Parses and validates; `origin` names the source in error messages.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin);
ExperimentConfig load_experiment_config(const std::string& path);

}  // namespace sqt

#endif  // SQT_CONFIG_H_
