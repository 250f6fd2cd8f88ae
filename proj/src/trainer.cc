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

#include "sqt/trainer.h"

#include <chrono>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

#include "sqt/error.h"
#include "sqt/vocab.h"

namespace sqt {

std::string tsv_line(const StepStats& s) {
  std::ostringstream os;
  os.precision(10);
  os << s.step << '\t' << s.task << '\t' << s.loss << '\t' << s.grad_norm << '\t' << s.lr << '\t'
     << s.wall_ms;
  return os.str();
}

Trainer::Trainer(ParamRegistry& reg, LossFn loss, OptimizerConfig cfg, uint64_t seed)
    : reg_(reg),
      loss_(std::move(loss)),
      cfg_(cfg),
      adam_(reg, cfg),
      noise_rng_(derive_seed(seed, "weight-noise")) {}

void Trainer::set_step(int64_t s) {
  if (s < 0) throw UsageError("Trainer::set_step: negative step");
  step_ = s;
}

StepStats Trainer::train_step(const std::string& task, const std::vector<Example>& batch) {
  if (batch.empty()) throw InputError("train_step: empty batch");
  const int64_t this_step = step_ + 1;
  const auto t0 = std::chrono::steady_clock::now();

  for (const auto& p : reg_.params()) p.t->zero_grad();

  double loss_sum = 0.0;
  {
    // Gradients are taken at the perturbed weights; the guard restores the
    // clean values before the optimizer applies the update.
    WeightNoiseGuard noise(reg_.params(), cfg_.noise_at(this_step) ? cfg_.noise_std : 0.0,
                           noise_rng_);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
      Graph g;
      auto loss = loss_(g, ex, task);
      const double li = loss->item();
      if (!std::isfinite(li)) {
        std::ostringstream msg;
        msg << "step " << this_step << ": non-finite loss on task " << task << " (batch:";
        for (const auto& e : batch) msg << ' ' << e.id;
        msg << ')';
        throw NumericError(msg.str());
      }
      loss_sum += li;
      g.backward(loss, inv_n);
    }
  }

  StepStats s;
  s.step = this_step;
  s.task = task;
  s.loss = loss_sum / static_cast<double>(batch.size());
  s.grad_norm = adam_.apply(this_step);
  s.lr = cfg_.lr_at(this_step);
  s.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  step_ = this_step;
  return s;
}

Trainer make_trainer(MultiTaskModel& model, const OptimizerConfig& cfg, const Vocabulary& vocab) {
  auto loss = [&model, vocab](Graph& g, const Example& ex, const std::string& task) {
    return model.task_loss(g, ex.features, ex.target, task, /*train=*/true, vocab).loss;
  };
  return Trainer(model.registry(), std::move(loss), cfg, derive_seed(model.seed(), "trainer"));
}

Trainer make_trainer(NmtModel& model, const OptimizerConfig& cfg, const Vocabulary& vocab) {
  auto loss = [&model, vocab](Graph& g, const Example& ex, const std::string&) {
    return model.loss(g, ex.source, ex.target, /*train=*/true, vocab).loss;
  };
  return Trainer(model.registry(), std::move(loss), cfg, derive_seed(model.seed(), "trainer"));
}

void TaskSchedule::validate() const {
  if (probs.empty()) throw ConfigError("task schedule: no tasks");
  std::set<std::string> seen;
  double sum = 0.0;
  for (const auto& [name, p] : probs) {
    if (name.empty()) throw ConfigError("task schedule: empty task name");
    if (p < 0.0) throw ConfigError("task schedule: negative probability for " + name);
    if (!seen.insert(name).second) throw ConfigError("task schedule: duplicate task " + name);
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("task schedule: probabilities must sum to 1");
  }
}

TaskSampler::TaskSampler(TaskSchedule schedule, uint64_t seed)
    : schedule_(std::move(schedule)), rng_(seed) {
  schedule_.validate();
}

const std::string& TaskSampler::sample() {
  const double u = rng_.uniform();
  double acc = 0.0;
  for (const auto& [name, p] : schedule_.probs) {
    acc += p;
    if (u < acc) return name;
  }
  return schedule_.probs.back().first;  // u landed in rounding slack
}

std::vector<StepStats> train_multitask(Trainer& trainer, TaskSampler& sampler,
                                       const BatchSource& next_batch, int64_t steps,
                                       std::ostream* log) {
  if (steps < 0) throw UsageError("train_multitask: negative step count");
  std::vector<StepStats> out;
  out.reserve(static_cast<size_t>(steps));
  for (int64_t i = 0; i < steps; ++i) {
    const std::string& task = sampler.sample();
    auto stats = trainer.train_step(task, next_batch(task));
    if (log) *log << tsv_line(stats) << '\n';
    out.push_back(std::move(stats));
  }
  return out;
}

}  // namespace sqt
