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

#include "sqt/optimizer.h"

#include <cmath>
#include <sstream>

#include "sqt/error.h"

namespace sqt {

void OptimizerConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("optimizer: lr0 must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("optimizer: beta1 must be in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("optimizer: beta2 must be in (0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer: eps must be positive");
  if (l2 < 0.0) throw ConfigError("optimizer: l2 must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("optimizer: clip_norm must be non-negative");
  if (noise_std < 0.0) throw ConfigError("optimizer: noise_std must be non-negative");
  if (noise_start_step < 1) throw ConfigError("optimizer: noise_start_step must be >= 1");
  if (decay_step < 1) throw ConfigError("optimizer: decay_step must be >= 1");
  if (noise_start_step >= decay_step) {
    throw ConfigError("optimizer: weight noise must start before the lr decay (noise_start_step < decay_step)");
  }
  if (batch_size < 1) throw ConfigError("optimizer: batch_size must be >= 1");
}

double OptimizerConfig::lr_at(int64_t step) const {
  return step < decay_step ? lr0 : lr0 * 0.1;
}

bool OptimizerConfig::noise_at(int64_t step) const {
  return noise_std > 0.0 && step >= noise_start_step;
}

Adam::Adam(ParamRegistry& reg, OptimizerConfig cfg) : reg_(reg), cfg_(std::move(cfg)) {
  cfg_.validate();
  m_.reserve(reg_.params().size());
  v_.reserve(reg_.params().size());
  for (const auto& p : reg_.params()) {
    m_.push_back(Tensor::zeros(p.t->shape()));
    v_.push_back(Tensor::zeros(p.t->shape()));
  }
}

double Adam::apply(int64_t step) {
  if (step < 1) throw UsageError("Adam::apply: step is 1-based");
  const auto& params = reg_.params();
  if (params.size() != m_.size()) {
    throw StateError("Adam::apply: registry grew after optimizer construction");
  }

  // Pass 1: global norm of the L2-augmented gradient, with finiteness checks.
  double sq_sum = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.t->has_grad()) continue;
    const double lambda = p.decay ? cfg_.l2 : 0.0;
    double sq = 0.0;
    bool finite = true;
    for (int64_t j = 0; j < p.t->numel(); ++j) {
      const double gj = p.t->g[static_cast<size_t>(j)] + lambda * p.t->v[static_cast<size_t>(j)];
      if (!std::isfinite(gj)) finite = false;
      sq += gj * gj;
    }
    if (!finite) {
      std::ostringstream msg;
      msg << "step " << step << ": non-finite gradient for " << p.name << " (norm " << std::sqrt(sq) << ")";
      throw NumericError(msg.str());
    }
    sq_sum += sq;
  }
  const double norm = std::sqrt(sq_sum);
  const double scale = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

  const double lr = cfg_.lr_at(step);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step));

  // Pass 2: moment update and parameter step.
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.t->has_grad()) continue;
    const double lambda = p.decay ? cfg_.l2 : 0.0;
    double* th = p.t->data();
    double* mi = m_[i]->data();
    double* vi = v_[i]->data();
    for (int64_t j = 0; j < p.t->numel(); ++j) {
      const double gj = scale * (p.t->g[static_cast<size_t>(j)] + lambda * th[j]);
      mi[j] = cfg_.beta1 * mi[j] + (1.0 - cfg_.beta1) * gj;
      vi[j] = cfg_.beta2 * vi[j] + (1.0 - cfg_.beta2) * gj * gj;
      const double m_hat = mi[j] / bc1;
      const double v_hat = vi[j] / bc2;
      th[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
  return norm;
}

WeightNoiseGuard::WeightNoiseGuard(const std::vector<ParamInfo>& params, double std, Rng& rng) {
  if (std <= 0.0) return;
  for (const auto& p : params) {
    if (!p.noise) continue;
    saved_.emplace_back(p.t, p.t->v);
    for (double& x : p.t->v) x += rng.normal(0.0, std);
  }
}

WeightNoiseGuard::~WeightNoiseGuard() {
  for (auto& [t, clean] : saved_) t->v = std::move(clean);
}

}  // namespace sqt
