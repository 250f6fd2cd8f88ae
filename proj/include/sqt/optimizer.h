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

#ifndef SQT_OPTIMIZER_H_
#define SQT_OPTIMIZER_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sqt/layers.h"
#include "sqt/rng.h"
#include "sqt/tensor.h"

namespace sqt {

// Adam hyperparameters plus the schedule knobs that surround it: a single
// x0.1 learning-rate decay, L2 regularization folded into the gradient,
// global-norm clipping, and Gaussian weight noise that switches on partway
// through training.
struct OptimizerConfig {
  double lr0 = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;        // added outside the square root
  double l2 = 1e-6;         // gradient augmentation g + l2 * theta
  double clip_norm = 5.0;   // global norm ceiling; 0 disables
  double noise_std = 0.125; // weight-noise standard deviation; 0 disables
  int64_t noise_start_step = 20000;  // first step with weight noise (1-based)
  int64_t decay_step = 1000000;      // lr becomes lr0/10 from this step on
  int64_t batch_size = 64;

  // Rates must be positive (beta in (0,1)), step thresholds >= 1, and noise
  // must begin before the decay.  Throws ConfigError.
  void validate() const;

  // Step-dependent learning rate; `step` is 1-based.
  double lr_at(int64_t step) const;

  // Whether weight noise applies at this step.
  bool noise_at(int64_t step) const;
};

// Adam with bias correction.  First/second moments are kept per registered
// parameter in registry order; parameters whose gradient accumulator is
// empty (no gradient flowed since the last reset) are skipped entirely, so
// sub-networks outside the current task stay bit-identical.
class Adam {
 public:
  Adam(ParamRegistry& reg, OptimizerConfig cfg);

  // One update from the gradients currently on the parameters.  `step` is the
  // 1-based global step; it drives bias correction and the lr schedule.
  // Augments gradients with L2 on decay-flagged parameters, clips by global
  // norm, then applies the moment update.  Returns the pre-clip global norm.
  // Throws NumericError on a non-finite gradient, naming the parameter.
  double apply(int64_t step);

  // Moments in registry order, exposed for checkpointing.
  std::vector<TensorPtr>& m() { return m_; }
  std::vector<TensorPtr>& v() { return v_; }
  const std::vector<TensorPtr>& m() const { return m_; }
  const std::vector<TensorPtr>& v() const { return v_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  ParamRegistry& reg_;
  OptimizerConfig cfg_;
  std::vector<TensorPtr> m_;
  std::vector<TensorPtr> v_;
};

// Scoped Gaussian weight noise: perturbs every noise-flagged parameter on
// construction and restores the clean values on destruction, so the
// optimizer always updates the unperturbed weights.  A zero std is a no-op
// (no draws, values untouched).
class WeightNoiseGuard {
 public:
  WeightNoiseGuard(const std::vector<ParamInfo>& params, double std, Rng& rng);
  ~WeightNoiseGuard();

  WeightNoiseGuard(const WeightNoiseGuard&) = delete;
  WeightNoiseGuard& operator=(const WeightNoiseGuard&) = delete;

 private:
  std::vector<std::pair<TensorPtr, std::vector<double>>> saved_;
};

}  // namespace sqt

#endif  // SQT_OPTIMIZER_H_
