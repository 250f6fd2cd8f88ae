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

#ifndef SQT_TRAINER_H_
#define SQT_TRAINER_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sqt/model.h"
#include "sqt/optimizer.h"

namespace sqt {

// One supervised utterance as the trainer sees it.  Speech tasks carry
// features; the text-to-text task carries source tokens instead.  Targets
// are body token ids without <sos>/<eos> framing.
struct Example {
  std::string id;
  TensorPtr features;       // [T, n_mels, 3]; null for text tasks
  std::vector<int> source;  // source token ids; empty for speech tasks
  std::vector<int> target;
};

// Per-step training metrics; one TSV log line each.
struct StepStats {
  int64_t step = 0;  // 1-based
  std::string task;
  double loss = 0.0;
  double grad_norm = 0.0;  // global norm before clipping, L2 included
  double lr = 0.0;
  double wall_ms = 0.0;
};

// step <TAB> task <TAB> loss <TAB> grad_norm <TAB> lr <TAB> wall_ms
std::string tsv_line(const StepStats& s);

// Single-process training loop core: zero gradients, perturb noise-flagged
// weights, accumulate the mean batch gradient one utterance at a time in
// batch order, restore clean weights, and take one Adam step.  Everything
// random flows from the seed, so a fixed (model seed, trainer seed, data
// order) reproduces the loss curve bit for bit.
class Trainer {
 public:
  // Scalar teacher-forced loss of one example under the given task.
  using LossFn = std::function<TensorPtr(Graph&, const Example&, const std::string& task)>;

  Trainer(ParamRegistry& reg, LossFn loss, OptimizerConfig cfg, uint64_t seed);

  // Throws InputError on an empty batch, NumericError on a non-finite loss
  // (message lists the batch ids) or gradient (message names the parameter).
  StepStats train_step(const std::string& task, const std::vector<Example>& batch);

  int64_t step() const { return step_; }
  void set_step(int64_t s);  // checkpoint restore
  Adam& optimizer() { return adam_; }
  Rng& noise_rng() { return noise_rng_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  ParamRegistry& reg_;
  LossFn loss_;
  OptimizerConfig cfg_;
  Adam adam_;
  Rng noise_rng_;
  int64_t step_ = 0;
};

// Binds the speech model's per-task teacher-forced loss (train mode).
Trainer make_trainer(MultiTaskModel& model, const OptimizerConfig& cfg, const Vocabulary& vocab);
// Binds the text-to-text loss; the task name is accepted but ignored.
Trainer make_trainer(NmtModel& model, const OptimizerConfig& cfg, const Vocabulary& vocab);

// Training-time task mixture, e.g. {{"st", 0.75}, {"asr", 0.25}}.
struct TaskSchedule {
  std::vector<std::pair<std::string, double>> probs;

  // Probabilities non-negative and summing to 1 (1e-9 absolute); every task
  // name must be unique.  Throws ConfigError.
  void validate() const;
};

// Draws a task per step from the schedule.  The engine state round-trips
// through checkpoints so a resumed run samples the same task sequence.
class TaskSampler {
 public:
  TaskSampler(TaskSchedule schedule, uint64_t seed);

  const std::string& sample();
  Rng& rng() { return rng_; }
  const TaskSchedule& schedule() const { return schedule_; }

 private:
  TaskSchedule schedule_;
  Rng rng_;
};

// Runs `steps` steps, sampling a task each step and pulling that task's next
// batch from `next_batch`.  Appends one TSV line per step to `log` when
// given.  Returns the per-step stats.
using BatchSource = std::function<std::vector<Example>(const std::string& task)>;
std::vector<StepStats> train_multitask(Trainer& trainer, TaskSampler& sampler,
                                       const BatchSource& next_batch, int64_t steps,
                                       std::ostream* log = nullptr);

}  // namespace sqt

#endif  // SQT_TRAINER_H_
