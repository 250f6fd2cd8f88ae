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

#include "sqt/layers.h"

#include <cmath>
#include <set>

#include "sqt/error.h"

namespace sqt {

namespace {

// Uniform Glorot range for a weight with the given fan counts.
double glorot_limit(int64_t fan_in, int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

TensorPtr ParamRegistry::add(const std::string& name, TensorPtr t, bool decay, bool noise) {
  for (const auto& p : params_) {
    if (p.name == name) throw ConfigError("duplicate parameter name " + name);
    if (p.t->id() == t->id()) {
      throw ConfigError("parameter " + name + " aliases already-registered " + p.name);
    }
  }
  t->set_requires_grad(true);
  params_.push_back({name, t, decay, noise});
  return params_.back().t;
}

TensorPtr ParamRegistry::add_state(const std::string& name, TensorPtr t) {
  for (const auto& s : state_) {
    if (s.name == name) throw ConfigError("duplicate state name " + name);
  }
  state_.push_back({name, t, false, false});
  return state_.back().t;
}

int64_t ParamRegistry::total_params() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p.t->numel();
  return n;
}

int64_t ParamRegistry::params_with_prefix(const std::string& prefix) const {
  int64_t n = 0;
  for (const auto& p : params_) {
    if (p.name.rfind(prefix, 0) == 0) n += p.t->numel();
  }
  return n;
}

Dense::Dense(int64_t in, int64_t out, Rng& rng, ParamRegistry& reg, const std::string& name,
             bool with_bias) {
  const double lim = glorot_limit(in, out);
  w = reg.add(name + ".w", Tensor::uniform({out, in}, -lim, lim, rng), /*decay=*/true,
              /*noise=*/false);
  // Layers feeding straight into batch norm go bias-free: the mean
  // subtraction cancels a bias exactly, so it would be dead weight.
  if (with_bias) b = reg.add(name + ".b", Tensor::zeros({out}, true), false, false);
}

TensorPtr Dense::apply_vec(Graph& g, const TensorPtr& x) const {
  auto y = matvec(g, w, x);
  return b ? add(g, y, b) : y;
}

TensorPtr Dense::apply_rows(Graph& g, const TensorPtr& x) const {
  auto y = matmul_nt(g, x, w);
  return b ? add_rowvec(g, y, b) : y;
}

BatchNorm::BatchNorm(int64_t channels, ParamRegistry& reg, const std::string& name) {
  gamma = reg.add(name + ".gamma", Tensor::full({channels}, 1.0, true), false, false);
  beta = reg.add(name + ".beta", Tensor::zeros({channels}, true), false, false);
  running_mean = reg.add_state(name + ".running_mean", Tensor::zeros({channels}));
  running_var = reg.add_state(name + ".running_var", Tensor::full({channels}, 1.0));
  updates = reg.add_state(name + ".updates", Tensor::zeros({1}));
}

TensorPtr BatchNorm::apply(Graph& g, const TensorPtr& x, bool train) {
  if (!train) {
    if (updates->v[0] == 0.0) {
      throw StateError("batch norm inference requested before any statistics were accumulated");
    }
    return batch_norm_infer(g, x, gamma, beta, running_mean->v, running_var->v, eps);
  }
  std::vector<double> mean, var;
  auto y = batch_norm_train(g, x, gamma, beta, eps, &mean, &var);
  const int64_t c = gamma->numel();
  if (updates->v[0] == 0.0) {
    running_mean->v = mean;
    running_var->v = var;
  } else {
    for (int64_t j = 0; j < c; ++j) {
      running_mean->v[j] = momentum * running_mean->v[j] + (1.0 - momentum) * mean[j];
      running_var->v[j] = momentum * running_var->v[j] + (1.0 - momentum) * var[j];
    }
  }
  updates->v[0] += 1.0;
  return y;
}

LstmCell::LstmCell(int64_t in, int64_t d, Rng& rng, ParamRegistry& reg, const std::string& name)
    : input_dim(in), dim(d) {
  const double li = glorot_limit(in, 4 * d);
  const double lr = glorot_limit(d, 4 * d);
  w.w_input = reg.add(name + ".w_input", Tensor::uniform({4 * d, in}, -li, li, rng), true, true);
  w.w_recur = reg.add(name + ".w_recur", Tensor::uniform({4 * d, d}, -lr, lr, rng), true, true);
  auto bias = Tensor::zeros({4 * d}, true);
  for (int64_t j = 0; j < d; ++j) bias->v[d + j] = 1.0;  // forget gate starts open
  w.bias = reg.add(name + ".bias", bias, false, true);
}

LstmOut LstmCell::step(Graph& g, const TensorPtr& x, const TensorPtr& h, const TensorPtr& c) const {
  return lstm_step(g, w, x, h, c);
}

TensorPtr LstmCell::input_pre(Graph& g, const TensorPtr& xs) const {
  return matmul_nt(g, xs, w.w_input);
}

LstmOut LstmCell::step_pre(Graph& g, const TensorPtr& pre_t, const TensorPtr& h,
                           const TensorPtr& c) const {
  auto pre = add(g, add(g, pre_t, matvec(g, w.w_recur, h)), w.bias);
  return lstm_gates(g, pre, c);
}

Conv2dLayer::Conv2dLayer(int64_t kh, int64_t kw, int64_t in, int64_t out, int64_t sh, int64_t sw,
                         Rng& rng, ParamRegistry& reg, const std::string& name)
    : bn(out, reg, name + ".bn"), stride_h(sh), stride_w(sw) {
  const double lim = glorot_limit(kh * kw * in, kh * kw * out);
  kern = reg.add(name + ".kern", Tensor::uniform({kh, kw, in, out}, -lim, lim, rng), true, false);
}

TensorPtr Conv2dLayer::apply(Graph& g, const TensorPtr& x, bool train) {
  return relu(g, bn.apply(g, conv2d(g, x, kern, stride_h, stride_w), train));
}

ConvLstm::ConvLstm(int64_t in_c, int64_t f, Rng& rng, ParamRegistry& reg, const std::string& name)
    : in_channels(in_c), filters(f) {
  auto make_dir = [&](const std::string& dir) {
    Direction d;
    const double li = glorot_limit(3 * in_c, 3 * 4 * f);
    const double lr = glorot_limit(3 * f, 3 * 4 * f);
    d.k_in = reg.add(name + "." + dir + ".k_in",
                     Tensor::uniform({1, 3, in_c, 4 * f}, -li, li, rng), true, true);
    d.k_rec = reg.add(name + "." + dir + ".k_rec",
                      Tensor::uniform({1, 3, f, 4 * f}, -lr, lr, rng), true, true);
    d.bias = reg.add(name + "." + dir + ".bias", Tensor::zeros({4 * f}, true), false, true);
    return d;
  };
  fwd = make_dir("fwd");
  bwd = make_dir("bwd");
}

TensorPtr ConvLstm::apply(Graph& g, const TensorPtr& x) const {
  if (x->rank() != 3 || x->extent(2) != in_channels) {
    throw DimensionError("conv-LSTM input " + shape_str(x->shape()) + " does not provide " +
                         std::to_string(in_channels) + " channels");
  }
  const int64_t T = x->extent(0), F = x->extent(1);
  if (F < 3) {
    throw DimensionError("conv-LSTM needs frequency extent >= 3, got " + std::to_string(F));
  }

  auto run_direction = [&](const Direction& d, bool reversed) {
    // Input convolution for all steps at once: [T, F, 4*filters].
    auto pre_x = conv2d(g, x, d.k_in, 1, 1);
    auto h = Tensor::zeros({F, filters});
    auto c = Tensor::zeros({F, filters});
    TensorPtr hp = h, cp = c;
    std::vector<TensorPtr> outs(static_cast<size_t>(T));
    for (int64_t i = 0; i < T; ++i) {
      const int64_t t = reversed ? T - 1 - i : i;
      auto pre_h = reshape(g, conv2d(g, reshape(g, hp, {1, F, filters}), d.k_rec, 1, 1),
                           {F, 4 * filters});
      auto pre = add_rowvec(g, add(g, take0(g, pre_x, t), pre_h), d.bias);
      auto out = lstm_gates(g, pre, cp);
      hp = out.h;
      cp = out.c;
      outs[static_cast<size_t>(t)] = hp;
    }
    return outs;
  };

  const auto f_outs = run_direction(fwd, false);
  const auto b_outs = run_direction(bwd, true);
  std::vector<TensorPtr> merged(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) {
    merged[static_cast<size_t>(t)] = concat_cols(g, f_outs[t], b_outs[t]);
  }
  return stack0(g, merged);  // [T, F, 2*filters]
}

}  // namespace sqt
