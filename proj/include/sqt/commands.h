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

#ifndef SQT_COMMANDS_H_
#define SQT_COMMANDS_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sqt {

// Batch commands behind the CLI.  Each takes parsed options plus explicit
// out/err streams so tests drive them in-process; all return a process exit
// code (0 iff no error) and never mutate their inputs.  Commands taking a
// config print `config-hash <hex>` first, so reproduced runs are comparable
// at a glance.

struct FeaturizeOptions {
  std::string config_path;
  std::string manifest;   // overrides data.train_manifest when non-empty
  std::string cache_dir;  // overrides data.cache_dir when non-empty
};
int cmd_featurize(const FeaturizeOptions& opt, std::ostream& out, std::ostream& err);

struct TrainOptions {
  std::string config_path;
  std::string task;  // asr | st | nmt | multitask
  std::string out_dir;
  bool resume = false;  // continue from <out_dir>/LATEST; config hash must match
};
int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err);

struct DecodeOptions {
  std::string config_path;
  std::string checkpoint;  // checkpoint dir, or a train dir with a LATEST file
  std::string task;        // asr | st | nmt
  std::string manifest;    // overrides data.eval_manifest when non-empty
  std::string out_path;    // n-best file
  std::string attention_dir;    // when set, one alignment TSV per utterance
  std::string cascade_nmt;      // second checkpoint: ASR 1-best -> text model
  // Flag-level overrides; highest precedence (flags > config > task defaults).
  std::optional<int64_t> beam_width;
  std::optional<double> alpha;
};
int cmd_decode(const DecodeOptions& opt, std::ostream& out, std::ostream& err);

struct EvaluateOptions {
  std::string nbest;
  std::vector<std::string> references;
  std::string task;  // asr | st
  std::string report_path;  // optional detailed report
  std::string config_path;  // optional; recorded in the report when given
};
int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err);

struct ToyCorpusOptions {
  std::string out_dir;
  int utterances = 50;
  uint64_t seed = 0;
  bool reverse_targets = true;
  std::vector<std::string> words;  // empty = built-in five-word inventory
};
int cmd_make_toy_corpus(const ToyCorpusOptions& opt, std::ostream& out, std::ostream& err);

struct InspectOptions {
  std::string config_path;
};
int cmd_inspect(const InspectOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace sqt

#endif  // SQT_COMMANDS_H_
