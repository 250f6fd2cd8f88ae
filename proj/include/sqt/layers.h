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

#ifndef SQT_LAYERS_H_
#define SQT_LAYERS_H_

#include <string>
#include <vector>

#include "sqt/ops.h"
#include "sqt/tensor.h"

namespace sqt {

// One optimizable parameter plus its optimizer-facing tags:
//   decay  - L2 weight decay applies (dense/conv/recurrent matrices; never
//            biases or batch-norm scale/shift).
//   noise  - train-time Gaussian weight noise applies (LSTM cell parameters
//            and decoder embeddings only).
struct ParamInfo {
  std::string name;
  TensorPtr t;
  bool decay = false;
  bool noise = false;
};

// Flat, ordered inventory of a model's parameters and non-optimized state
// (batch-norm running moments).  Order of registration is the canonical
// order for updates and checkpoints, so training stays deterministic.
class ParamRegistry {
 public:
  TensorPtr add(const std::string& name, TensorPtr t, bool decay, bool noise);
  TensorPtr add_state(const std::string& name, TensorPtr t);

  const std::vector<ParamInfo>& params() const { return params_; }
  const std::vector<ParamInfo>& state() const { return state_; }

  int64_t total_params() const;

  // Counts parameters whose name starts with the prefix; drives `inspect`.
  int64_t params_with_prefix(const std::string& prefix) const;

 private:
  std::vector<ParamInfo> params_;
  std::vector<ParamInfo> state_;
};

// Fully connected y = W x + b with W: [out, in]; b is omitted when the layer
// is immediately batch-normalized.
struct Dense {
  TensorPtr w;
  TensorPtr b;  // null when constructed without a bias

  Dense() = default;
  Dense(int64_t in, int64_t out, Rng& rng, ParamRegistry& reg, const std::string& name,
        bool with_bias = true);

  TensorPtr apply_vec(Graph& g, const TensorPtr& x) const;   // [in] -> [out]
  TensorPtr apply_rows(Graph& g, const TensorPtr& x) const;  // [m, in] -> [m, out]
};

// Batch normalization over the trailing (channel) axis with running moments
// for inference.  The first train-mode call seeds the running moments with
// the batch statistics; later calls blend with momentum.
struct BatchNorm {
  TensorPtr gamma;
  TensorPtr beta;
  TensorPtr running_mean;  // state
  TensorPtr running_var;   // state
  TensorPtr updates;       // state; scalar count, gates infer mode
  double momentum = 0.99;
  double eps = 1e-5;

  BatchNorm() = default;
  BatchNorm(int64_t channels, ParamRegistry& reg, const std::string& name);

  TensorPtr apply(Graph& g, const TensorPtr& x, bool train);
};

// Single LSTM cell (non-peephole), gates packed [i|f|g|o].  Forget-gate bias
// starts at 1.0 so memory is initially carried.
struct LstmCell {
  LstmWeights w;
  int64_t input_dim = 0;
  int64_t dim = 0;

  LstmCell() = default;
  LstmCell(int64_t in, int64_t d, Rng& rng, ParamRegistry& reg, const std::string& name);

  LstmOut step(Graph& g, const TensorPtr& x, const TensorPtr& h, const TensorPtr& c) const;

  // Sequence helper: the input projection for every step in one product.
  // Returns [T, 4*dim]; feed rows to step_pre.
  TensorPtr input_pre(Graph& g, const TensorPtr& xs) const;
  LstmOut step_pre(Graph& g, const TensorPtr& pre_t, const TensorPtr& h, const TensorPtr& c) const;
};

// 2-D convolution stage: conv (same padding) + batch norm + ReLU.
struct Conv2dLayer {
  TensorPtr kern;  // [kh, kw, in, out]
  BatchNorm bn;
  int64_t stride_h = 1;
  int64_t stride_w = 1;

  Conv2dLayer() = default;
  Conv2dLayer(int64_t kh, int64_t kw, int64_t in, int64_t out, int64_t sh, int64_t sw,
              Rng& rng, ParamRegistry& reg, const std::string& name);

  TensorPtr apply(Graph& g, const TensorPtr& x, bool train);
};

// Bidirectional convolutional LSTM over time, gates computed by 1x3
// convolutions across frequency (same padding).  Output concatenates the two
// directions on depth: [T, F, C] -> [T, F, 2*filters].
struct ConvLstm {
  struct Direction {
    TensorPtr k_in;   // [1, 3, C, 4*filters]
    TensorPtr k_rec;  // [1, 3, filters, 4*filters]
    TensorPtr bias;   // [4*filters]
  };
  Direction fwd;
  Direction bwd;
  int64_t in_channels = 0;
  int64_t filters = 0;

  ConvLstm() = default;
  ConvLstm(int64_t in_channels, int64_t filters, Rng& rng, ParamRegistry& reg,
           const std::string& name);

  TensorPtr apply(Graph& g, const TensorPtr& x) const;
};

}  // namespace sqt

#endif  // SQT_LAYERS_H_
