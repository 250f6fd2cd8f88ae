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

#ifndef SQT_CHECKPOINT_H_
#define SQT_CHECKPOINT_H_

#include <cstdint>
#include <map>
#include <string>

#include "sqt/layers.h"
#include "sqt/optimizer.h"
#include "sqt/vocab.h"

namespace sqt {

// A checkpoint is a directory:
//   manifest.txt   one "key<TAB>value" line each: format, step, config_hash,
//                  plus free-form entries (RNG states, iterator cursors)
//   config.json    the experiment config verbatim; config_hash pins it
//   vocab.txt      the embedded token inventory, one per line
//   params.bin     parameter bundle, registry order
//   state.bin      non-optimized state (batch-norm running moments)
//   adam.bin       optimizer moments; present when saved from a trainer
//
// Restoring copies values into an already-constructed model, so parameter
// sharing inside the model is preserved.  Everything needed to decode
// (config, vocabulary, weights) travels inside the directory.
struct CheckpointMeta {
  int64_t step = 0;
  uint64_t config_hash = 0;
  std::map<std::string, std::string> extra;
};

void save_checkpoint(const std::string& dir, const ParamRegistry& reg, const Vocabulary& vocab,
                     const std::string& config_text, const CheckpointMeta& meta,
                     const Adam* adam = nullptr);

// Manifest only; cheap compatibility probe before building a model.
CheckpointMeta read_checkpoint_meta(const std::string& dir);
// The embedded config, verified against the recorded hash.
std::string checkpoint_config_text(const std::string& dir);
Vocabulary checkpoint_vocab(const std::string& dir);

// Restores parameters (and optimizer moments when `adam` is given) into the
// registry of an identically-configured model.  Throws CorruptionError on a
// bad magic, a missing or extra tensor, or a shape mismatch; InputError when
// the directory is unreadable.
CheckpointMeta load_checkpoint(const std::string& dir, ParamRegistry& reg, Adam* adam = nullptr);

}  // namespace sqt

#endif  // SQT_CHECKPOINT_H_
