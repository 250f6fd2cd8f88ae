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

#include "sqt/encoder.h"

#include <cmath>

#include "sqt/error.h"

namespace sqt {

SpeechEncoderConfig SpeechEncoderConfig::scaled(int64_t k) const {
  if (k < 1) throw ConfigError("encoder scale divisor must be >= 1");
  SpeechEncoderConfig s = *this;
  s.conv_kernels = std::max<int64_t>(1, conv_kernels / k);
  s.conv_lstm_filters = std::max<int64_t>(1, conv_lstm_filters / k);
  s.lstm_units = std::max<int64_t>(1, lstm_units / k);
  s.proj_dim = 2 * s.lstm_units;
  return s;
}

void SpeechEncoderConfig::validate() const {
  if (n_mels < 4 || in_depth < 1) throw ConfigError("speech encoder needs n_mels >= 4, depth >= 1");
  if (conv_kernels < 1 || conv_lstm_filters < 1 || lstm_units < 1) {
    throw ConfigError("speech encoder widths must be positive");
  }
  if (num_lstm_layers < 1) throw ConfigError("speech encoder needs at least one LSTM layer");
  if (proj_dim != 2 * lstm_units) {
    throw ConfigError("projection width " + std::to_string(proj_dim) +
                      " must equal 2 * lstm_units = " + std::to_string(2 * lstm_units) +
                      " so the final biLSTM concatenation is the output");
  }
}

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace

SpeechEncoder::SpeechEncoder(const SpeechEncoderConfig& cfg, Rng& rng, ParamRegistry& reg,
                             const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  conv1_ = Conv2dLayer(3, 3, cfg.in_depth, cfg.conv_kernels, 2, 2, rng, reg, prefix + ".conv1");
  conv2_ = Conv2dLayer(3, 3, cfg.conv_kernels, cfg.conv_kernels, 2, 2, rng, reg, prefix + ".conv2");
  clstm_ = ConvLstm(cfg.conv_kernels, cfg.conv_lstm_filters, rng, reg, prefix + ".convlstm");

  const int64_t freq = ceil_div(ceil_div(cfg.n_mels, 2), 2);
  int64_t in_dim = freq * 2 * cfg.conv_lstm_filters;  // flattened per-frame width
  for (int64_t i = 0; i < cfg.num_lstm_layers; ++i) {
    const std::string nm = prefix + ".lstm" + std::to_string(i + 1);
    fwd_.emplace_back(in_dim, cfg.lstm_units, rng, reg, nm + ".fwd");
    bwd_.emplace_back(in_dim, cfg.lstm_units, rng, reg, nm + ".bwd");
    if (i + 1 < cfg.num_lstm_layers) {
      proj_.emplace_back(2 * cfg.lstm_units, cfg.proj_dim, rng, reg, nm + ".proj",
                         /*with_bias=*/false);
      proj_bn_.emplace_back(cfg.proj_dim, reg, nm + ".proj.bn");
      in_dim = cfg.proj_dim;
    }
  }
}

SpeechEncoder::SpeechEncoder(const SpeechEncoder& base, int64_t shared_lstm_layers, Rng& rng,
                             ParamRegistry& reg, const std::string& prefix)
    : cfg_(base.cfg_) {
  if (shared_lstm_layers < 0 || shared_lstm_layers > cfg_.num_lstm_layers) {
    throw ConfigError("shared LSTM layer count " + std::to_string(shared_lstm_layers) +
                      " outside 0.." + std::to_string(cfg_.num_lstm_layers));
  }
  // Conv stages and the conv-LSTM are always shared.
  conv1_ = base.conv1_;
  conv2_ = base.conv2_;
  clstm_ = base.clstm_;

  const int64_t freq = ceil_div(ceil_div(cfg_.n_mels, 2), 2);
  int64_t in_dim = freq * 2 * cfg_.conv_lstm_filters;
  for (int64_t i = 0; i < cfg_.num_lstm_layers; ++i) {
    const std::string nm = prefix + ".lstm" + std::to_string(i + 1);
    if (i < shared_lstm_layers) {
      fwd_.push_back(base.fwd_[i]);
      bwd_.push_back(base.bwd_[i]);
      if (i + 1 < cfg_.num_lstm_layers) {
        proj_.push_back(base.proj_[i]);
        proj_bn_.push_back(base.proj_bn_[i]);
      }
    } else {
      fwd_.emplace_back(in_dim, cfg_.lstm_units, rng, reg, nm + ".fwd");
      bwd_.emplace_back(in_dim, cfg_.lstm_units, rng, reg, nm + ".bwd");
      if (i + 1 < cfg_.num_lstm_layers) {
        proj_.emplace_back(2 * cfg_.lstm_units, cfg_.proj_dim, rng, reg, nm + ".proj",
                           /*with_bias=*/false);
        proj_bn_.emplace_back(cfg_.proj_dim, reg, nm + ".proj.bn");
      }
    }
    if (i + 1 < cfg_.num_lstm_layers) in_dim = cfg_.proj_dim;
  }
}

TensorPtr SpeechEncoder::bilstm(Graph& g, const TensorPtr& xs, int64_t layer) const {
  const int64_t T = xs->extent(0);
  const LstmCell& f = fwd_[layer];
  const LstmCell& b = bwd_[layer];

  auto run = [&](const LstmCell& cell, bool reversed) {
    auto pre_all = cell.input_pre(g, xs);  // [T, 4u]
    TensorPtr h = Tensor::zeros({cell.dim});
    TensorPtr c = Tensor::zeros({cell.dim});
    std::vector<TensorPtr> outs(static_cast<size_t>(T));
    for (int64_t i = 0; i < T; ++i) {
      const int64_t t = reversed ? T - 1 - i : i;
      auto out = cell.step_pre(g, take0(g, pre_all, t), h, c);
      h = out.h;
      c = out.c;
      outs[static_cast<size_t>(t)] = h;
    }
    return outs;
  };

  const auto fo = run(f, false);
  const auto bo = run(b, true);
  std::vector<TensorPtr> merged(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) merged[static_cast<size_t>(t)] = concat_vec(g, fo[t], bo[t]);
  return stack0(g, merged);  // [T, 2u]
}

TensorPtr SpeechEncoder::encode(Graph& g, const TensorPtr& feats, bool train) {
  if (feats->rank() != 3 || feats->extent(1) != cfg_.n_mels || feats->extent(2) != cfg_.in_depth) {
    throw DimensionError("speech encoder expects [T," + std::to_string(cfg_.n_mels) + "," +
                         std::to_string(cfg_.in_depth) + "] features, got " +
                         shape_str(feats->shape()));
  }
  if (feats->extent(0) < 1) throw InputError("speech encoder requires at least one frame");
  auto x = conv1_.apply(g, feats, train);
  x = conv2_.apply(g, x, train);
  x = clstm_.apply(g, x);  // [L, freq, 2*filters]
  const int64_t L = x->extent(0);
  x = reshape(g, x, {L, x->extent(1) * x->extent(2)});
  for (int64_t i = 0; i < cfg_.num_lstm_layers; ++i) {
    x = bilstm(g, x, i);
    if (i + 1 < cfg_.num_lstm_layers) {
      x = relu(g, proj_bn_[i].apply(g, proj_[i].apply_rows(g, x), train));
    }
  }
  return x;  // [ceil(T/4), 2u]
}

void TextEncoderConfig::validate() const {
  if (vocab < 2 || embed_dim < 1 || bi_units < 1 || num_uni_layers < 1) {
    throw ConfigError("text encoder dimensions must be positive");
  }
  if (uni_units != 2 * bi_units) {
    throw ConfigError("text encoder uni_units must equal 2 * bi_units so all layers are " +
                      std::to_string(2 * bi_units) + "-wide");
  }
}

TextEncoder::TextEncoder(const TextEncoderConfig& cfg, Rng& rng, ParamRegistry& reg,
                         const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  embedding_ = reg.add(prefix + ".embedding",
                       Tensor::uniform({cfg.vocab, cfg.embed_dim}, -0.1, 0.1, rng),
                       /*decay=*/true, /*noise=*/false);
  bi_fwd_ = LstmCell(cfg.embed_dim, cfg.bi_units, rng, reg, prefix + ".lstm1.fwd");
  bi_bwd_ = LstmCell(cfg.embed_dim, cfg.bi_units, rng, reg, prefix + ".lstm1.bwd");
  int64_t in_dim = 2 * cfg.bi_units;
  for (int64_t i = 0; i < cfg.num_uni_layers; ++i) {
    uni_.emplace_back(in_dim, cfg.uni_units, rng, reg,
                      prefix + ".lstm" + std::to_string(i + 2));
    in_dim = cfg.uni_units;
  }
}

TensorPtr TextEncoder::encode(Graph& g, const std::vector<int>& tokens, bool train) {
  (void)train;  // the text encoder has no mode-dependent stages
  if (tokens.empty()) throw InputError("text encoder requires a non-empty token sequence");
  const int64_t T = static_cast<int64_t>(tokens.size());
  for (int tok : tokens) {
    if (tok < 0 || tok >= cfg_.vocab) {
      throw InputError("token index " + std::to_string(tok) + " outside vocabulary of " +
                       std::to_string(cfg_.vocab));
    }
  }
  std::vector<TensorPtr> embs(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) embs[t] = take0(g, embedding_, tokens[static_cast<size_t>(t)]);
  auto xs = stack0(g, embs);  // [T, embed]

  auto run = [&](const LstmCell& cell, bool reversed) {
    auto pre_all = cell.input_pre(g, xs);
    TensorPtr h = Tensor::zeros({cell.dim});
    TensorPtr c = Tensor::zeros({cell.dim});
    std::vector<TensorPtr> outs(static_cast<size_t>(T));
    for (int64_t i = 0; i < T; ++i) {
      const int64_t t = reversed ? T - 1 - i : i;
      auto out = cell.step_pre(g, take0(g, pre_all, t), h, c);
      h = out.h;
      c = out.c;
      outs[static_cast<size_t>(t)] = h;
    }
    return outs;
  };
  const auto fo = run(bi_fwd_, false);
  const auto bo = run(bi_bwd_, true);
  std::vector<TensorPtr> merged(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) merged[static_cast<size_t>(t)] = concat_vec(g, fo[t], bo[t]);
  auto x = stack0(g, merged);  // [T, 2*bi]

  for (const auto& cell : uni_) {
    auto pre_all = cell.input_pre(g, x);
    TensorPtr h = Tensor::zeros({cell.dim});
    TensorPtr c = Tensor::zeros({cell.dim});
    std::vector<TensorPtr> outs(static_cast<size_t>(T));
    for (int64_t t = 0; t < T; ++t) {
      auto out = cell.step_pre(g, take0(g, pre_all, t), h, c);
      h = out.h;
      c = out.c;
      outs[static_cast<size_t>(t)] = h;
    }
    x = stack0(g, outs);
  }
  return x;  // [T, uni_units]
}

}  // namespace sqt
