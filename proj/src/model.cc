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

#include "sqt/model.h"

#include <set>

#include "sqt/error.h"

namespace sqt {

void MultiTaskConfig::validate() const {
  encoder.validate();
  if (tasks.empty()) throw ConfigError("a model needs at least one task");
  if (shared_lstm_layers < 0 || shared_lstm_layers > encoder.num_lstm_layers) {
    throw ConfigError("shared LSTM layer count " + std::to_string(shared_lstm_layers) +
                      " outside 0.." + std::to_string(encoder.num_lstm_layers));
  }
  std::set<std::string> seen;
  for (const auto& t : tasks) {
    if (t.name.empty()) throw ConfigError("task names must be non-empty");
    if (!seen.insert(t.name).second) throw ConfigError("duplicate task name: " + t.name);
    t.decoder.validate();
    if (t.decoder.enc_dim != encoder.output_dim()) {
      throw ConfigError("task " + t.name + " decoder enc_dim " + std::to_string(t.decoder.enc_dim) +
                        " does not match encoder output " + std::to_string(encoder.output_dim()));
    }
  }
}

MultiTaskModel::MultiTaskModel(const MultiTaskConfig& cfg, uint64_t seed)
    : cfg_(cfg), seed_(seed), rng_(seed) {
  cfg_.validate();
  for (size_t i = 0; i < cfg_.tasks.size(); ++i) {
    const auto& task = cfg_.tasks[i];
    names_.push_back(task.name);
    if (i == 0) {
      encoders_.push_back(
          std::make_unique<SpeechEncoder>(cfg_.encoder, rng_, reg_, "encoder"));
    } else {
      encoders_.push_back(std::make_unique<SpeechEncoder>(
          *encoders_[0], cfg_.shared_lstm_layers, rng_, reg_, "encoder." + task.name));
    }
    decoders_.push_back(std::make_unique<AttentionDecoder>(task.decoder, rng_, reg_,
                                                           "decoder." + task.name));
  }
}

bool MultiTaskModel::has_task(const std::string& name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

size_t MultiTaskModel::task_index(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ConfigError("unknown task: " + name);
}

SpeechEncoder& MultiTaskModel::encoder(const std::string& task) {
  return *encoders_[task_index(task)];
}

AttentionDecoder& MultiTaskModel::decoder(const std::string& task) {
  return *decoders_[task_index(task)];
}

TensorPtr MultiTaskModel::encode(Graph& g, const TensorPtr& feats, const std::string& task,
                                 bool train) {
  return encoders_[task_index(task)]->encode(g, feats, train);
}

AttentionDecoder::LossResult MultiTaskModel::task_loss(Graph& g, const TensorPtr& feats,
                                                       const std::vector<int>& target,
                                                       const std::string& task, bool train,
                                                       const Vocabulary& vocab) {
  const size_t i = task_index(task);
  auto h = encoders_[i]->encode(g, feats, train);
  auto res = decoders_[i]->teacher_forced_loss(g, h, target, vocab);
  res.alignment.decoder_name = task;
  return res;
}

void NmtConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (decoder.enc_dim != encoder.output_dim()) {
    throw ConfigError("decoder enc_dim " + std::to_string(decoder.enc_dim) +
                      " does not match text encoder output " +
                      std::to_string(encoder.output_dim()));
  }
}

NmtModel::NmtModel(const NmtConfig& cfg, uint64_t seed) : cfg_(cfg), seed_(seed), rng_(seed) {
  cfg_.validate();
  encoder_ = std::make_unique<TextEncoder>(cfg_.encoder, rng_, reg_, "encoder");
  decoder_ = std::make_unique<AttentionDecoder>(cfg_.decoder, rng_, reg_, "decoder");
}

TensorPtr NmtModel::encode(Graph& g, const std::vector<int>& tokens, bool train) {
  return encoder_->encode(g, tokens, train);
}

AttentionDecoder::LossResult NmtModel::loss(Graph& g, const std::vector<int>& source,
                                            const std::vector<int>& target, bool train,
                                            const Vocabulary& vocab) {
  auto h = encoder_->encode(g, source, train);
  auto res = decoder_->teacher_forced_loss(g, h, target, vocab);
  res.alignment.decoder_name = "nmt";
  return res;
}

}  // namespace sqt
