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

#ifndef SQT_OPS_H_
#define SQT_OPS_H_

#include <functional>
#include <utility>
#include <vector>

#include "sqt/tensor.h"

namespace sqt {

// Differentiable primitives.  Every function runs the forward computation
// eagerly and, when `g` is a recording graph and any input requires grad,
// appends its backward rule to the tape.  Shape violations throw
// DimensionError naming both shapes.

// -- elementwise ------------------------------------------------------------
TensorPtr add(Graph& g, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Graph& g, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Graph& g, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Graph& g, const TensorPtr& a, double s);
TensorPtr relu(Graph& g, const TensorPtr& a);
TensorPtr tanh_op(Graph& g, const TensorPtr& a);
TensorPtr sigmoid(Graph& g, const TensorPtr& a);

// Broadcast-add a vector over the rows of a matrix: [m,n] + [n].
TensorPtr add_rowvec(Graph& g, const TensorPtr& m, const TensorPtr& v);

// Inverted dropout with keep-probability 1-p; masks are drawn from the graph
// RNG so a seeded graph replays bit-exactly.
TensorPtr dropout(Graph& g, const TensorPtr& a, double p);

// -- linear algebra ----------------------------------------------------------
// C[m,n] = A[m,k] * B[k,n]; backward dA = dC*B^T, dB = A^T*dC.
TensorPtr matmul(Graph& g, const TensorPtr& a, const TensorPtr& b);
// C[m,n] = A[m,k] * B[n,k]^T, avoiding a materialized transpose.
TensorPtr matmul_nt(Graph& g, const TensorPtr& a, const TensorPtr& b);
// y[m] = A[m,k] * x[k].
TensorPtr matvec(Graph& g, const TensorPtr& a, const TensorPtr& x);
// y[n] = x[m] * A[m,n].
TensorPtr vecmat(Graph& g, const TensorPtr& x, const TensorPtr& a);

// -- shape manipulation -------------------------------------------------------
TensorPtr reshape(Graph& g, const TensorPtr& a, Shape shape);
TensorPtr concat_vec(Graph& g, const TensorPtr& a, const TensorPtr& b);
// [m,n1] ++ [m,n2] -> [m,n1+n2] along the last axis.
TensorPtr concat_cols(Graph& g, const TensorPtr& a, const TensorPtr& b);
// Slice index i off axis 0: [d0,rest...] -> [rest...] (vector row for rank 2).
TensorPtr take0(Graph& g, const TensorPtr& a, int64_t i);
// Stack equal-shaped tensors along a new leading axis.
TensorPtr stack0(Graph& g, const std::vector<TensorPtr>& parts);

// -- reductions & losses ------------------------------------------------------
TensorPtr sum(Graph& g, const TensorPtr& a);
TensorPtr mean_of(Graph& g, const std::vector<TensorPtr>& scalars);
// Numerically stable softmax over a vector; outputs sum to 1 within 1e-12.
TensorPtr softmax_vec(Graph& g, const TensorPtr& a);
// -log softmax(logits)[target]; backward is softmax - onehot.
TensorPtr cross_entropy(Graph& g, const TensorPtr& logits, int64_t target);
// Log-probabilities of every class, computed outside the graph.
std::vector<double> log_softmax_values(const Tensor& logits);

// -- structured ops -----------------------------------------------------------
// Cross-correlation with zero 'same' padding.  input [T,F,C], kernels
// [kh,kw,C,N], output [ceil(T/sh), ceil(F/sw), N].
TensorPtr conv2d(Graph& g, const TensorPtr& input, const TensorPtr& kernels,
                 int64_t stride_h, int64_t stride_w);

// Fused LSTM gate nonlinearity.  `pre` carries the four pre-activations
// packed [i|f|g|o] along the last axis (4d); `c` is the previous cell state
// (d).  Returns (h', c') with c' = sig(f)*c + sig(i)*tanh(g) and
// h' = sig(o)*tanh(c').
struct LstmOut {
  TensorPtr h;
  TensorPtr c;
};
LstmOut lstm_gates(Graph& g, const TensorPtr& pre, const TensorPtr& c);

// Dense LSTM parameters: pre = w_input*x + w_recur*h + bias.
struct LstmWeights {
  TensorPtr w_input;  // [4d, d_in]
  TensorPtr w_recur;  // [4d, d]
  TensorPtr bias;     // [4d]
};
// Standard non-peephole LSTM step over vectors.
LstmOut lstm_step(Graph& g, const LstmWeights& w, const TensorPtr& x,
                  const TensorPtr& h, const TensorPtr& c);

// Batch normalization over the last axis (channels); statistics are taken
// over all leading positions.  Train mode requires at least two positions and
// reports the batch moments so the owning layer can update running stats.
// The backward rule differentiates through the batch statistics.
TensorPtr batch_norm_train(Graph& g, const TensorPtr& x, const TensorPtr& gamma,
                           const TensorPtr& beta, double eps,
                           std::vector<double>* batch_mean,
                           std::vector<double>* batch_var);
TensorPtr batch_norm_infer(Graph& g, const TensorPtr& x, const TensorPtr& gamma,
                           const TensorPtr& beta, const std::vector<double>& running_mean,
                           const std::vector<double>& running_var, double eps);

// -- verification --------------------------------------------------------------
struct GradCheckOptions {
  double eps = 1e-5;
  int max_coords = 100;   // sampled coordinates across all parameters
  uint64_t seed = 0x5eed; // coordinate sampling + graph RNG seed
};

// Compares analytic gradients of `f` against central finite differences at
// the current parameter values and returns the max relative error
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).  `f` must build
// the loss from scratch on the graph it is given.
double grad_check(const std::function<TensorPtr(Graph&)>& f,
                  const std::vector<TensorPtr>& params,
                  const GradCheckOptions& opt = {});

}  // namespace sqt

#endif  // SQT_OPS_H_
