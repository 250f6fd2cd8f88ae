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

#include "sqt/ops.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

namespace sqt {

namespace {

bool wants_grad(const Graph& g, std::initializer_list<const TensorPtr*> inputs) {
  if (!g.recording()) return false;
  for (const TensorPtr* t : inputs) {
    if ((*t)->requires_grad()) return true;
  }
  return false;
}

void check_same_shape(const char* op, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape() != b->shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a->shape()) +
                         " vs " + shape_str(b->shape()));
  }
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double dot_n(const double* a, const double* b, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_n(double alpha, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

TensorPtr add(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("add", a, b);
  const bool grad = wants_grad(g, {&a, &b});
  auto out = Tensor::zeros(a->shape(), grad);
  for (int64_t i = 0; i < a->numel(); ++i) out->v[i] = a->v[i] + b->v[i];
  if (grad) {
    g.record([a, b, out] {
      if (!out->has_grad()) return;
      const auto& go = out->g;
      if (a->requires_grad()) axpy_n(1.0, go.data(), a->grad().data(), a->numel());
      if (b->requires_grad()) axpy_n(1.0, go.data(), b->grad().data(), b->numel());
    });
  }
  return out;
}

TensorPtr sub(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("sub", a, b);
  const bool grad = wants_grad(g, {&a, &b});
  auto out = Tensor::zeros(a->shape(), grad);
  for (int64_t i = 0; i < a->numel(); ++i) out->v[i] = a->v[i] - b->v[i];
  if (grad) {
    g.record([a, b, out] {
      if (!out->has_grad()) return;
      const auto& go = out->g;
      if (a->requires_grad()) axpy_n(1.0, go.data(), a->grad().data(), a->numel());
      if (b->requires_grad()) axpy_n(-1.0, go.data(), b->grad().data(), b->numel());
    });
  }
  return out;
}

TensorPtr mul(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  check_same_shape("mul", a, b);
  const bool grad = wants_grad(g, {&a, &b});
  auto out = Tensor::zeros(a->shape(), grad);
  for (int64_t i = 0; i < a->numel(); ++i) out->v[i] = a->v[i] * b->v[i];
  if (grad) {
    g.record([a, b, out] {
      if (!out->has_grad()) return;
      const auto& go = out->g;
      if (a->requires_grad()) {
        auto& ga = a->grad();
        for (int64_t i = 0; i < a->numel(); ++i) ga[i] += go[i] * b->v[i];
      }
      if (b->requires_grad()) {
        auto& gb = b->grad();
        for (int64_t i = 0; i < b->numel(); ++i) gb[i] += go[i] * a->v[i];
      }
    });
  }
  return out;
}

TensorPtr scale(Graph& g, const TensorPtr& a, double s) {
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros(a->shape(), grad);
  for (int64_t i = 0; i < a->numel(); ++i) out->v[i] = a->v[i] * s;
  if (grad) {
    g.record([a, out, s] {
      if (!out->has_grad()) return;
      axpy_n(s, out->g.data(), a->grad().data(), a->numel());
    });
  }
  return out;
}

TensorPtr relu(Graph& g, const TensorPtr& a) {
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros(a->shape(), grad);
  for (int64_t i = 0; i < a->numel(); ++i) out->v[i] = a->v[i] > 0.0 ? a->v[i] : 0.0;
  if (grad) {
    g.record([a, out] {
      if (!out->has_grad()) return;
      auto& ga = a->grad();
      for (int64_t i = 0; i < a->numel(); ++i) {
        if (a->v[i] > 0.0) ga[i] += out->g[i];
      }
    });
  }
  return out;
}

TensorPtr tanh_op(Graph& g, const TensorPtr& a) {
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros(a->shape(), grad);
  for (int64_t i = 0; i < a->numel(); ++i) out->v[i] = std::tanh(a->v[i]);
  if (grad) {
    g.record([a, out] {
      if (!out->has_grad()) return;
      auto& ga = a->grad();
      for (int64_t i = 0; i < a->numel(); ++i) ga[i] += out->g[i] * (1.0 - out->v[i] * out->v[i]);
    });
  }
  return out;
}

TensorPtr sigmoid(Graph& g, const TensorPtr& a) {
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros(a->shape(), grad);
  for (int64_t i = 0; i < a->numel(); ++i) out->v[i] = sigmoid_scalar(a->v[i]);
  if (grad) {
    g.record([a, out] {
      if (!out->has_grad()) return;
      auto& ga = a->grad();
      for (int64_t i = 0; i < a->numel(); ++i) ga[i] += out->g[i] * out->v[i] * (1.0 - out->v[i]);
    });
  }
  return out;
}

TensorPtr add_rowvec(Graph& g, const TensorPtr& m, const TensorPtr& v) {
  if (m->rank() != 2 || v->rank() != 1 || m->extent(1) != v->extent(0)) {
    throw DimensionError("add_rowvec: " + shape_str(m->shape()) + " vs " + shape_str(v->shape()));
  }
  const int64_t rows = m->extent(0), cols = m->extent(1);
  const bool grad = wants_grad(g, {&m, &v});
  auto out = Tensor::zeros(m->shape(), grad);
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < cols; ++j) out->at(i, j) = m->at(i, j) + v->v[j];
  }
  if (grad) {
    g.record([m, v, out, rows, cols] {
      if (!out->has_grad()) return;
      if (m->requires_grad()) axpy_n(1.0, out->g.data(), m->grad().data(), m->numel());
      if (v->requires_grad()) {
        auto& gv = v->grad();
        for (int64_t i = 0; i < rows; ++i) axpy_n(1.0, out->g.data() + i * cols, gv.data(), cols);
      }
    });
  }
  return out;
}

TensorPtr dropout(Graph& g, const TensorPtr& a, double p) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must be in [0,1), got " + std::to_string(p));
  if (p == 0.0 || !g.recording()) return a;
  const double keep = 1.0 - p;
  auto mask = std::make_shared<std::vector<double>>(a->numel());
  for (auto& mv : *mask) mv = g.rng().uniform() < keep ? 1.0 / keep : 0.0;
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros(a->shape(), grad);
  for (int64_t i = 0; i < a->numel(); ++i) out->v[i] = a->v[i] * (*mask)[i];
  if (grad) {
    g.record([a, out, mask] {
      if (!out->has_grad()) return;
      auto& ga = a->grad();
      for (int64_t i = 0; i < a->numel(); ++i) ga[i] += out->g[i] * (*mask)[i];
    });
  }
  return out;
}

TensorPtr matmul(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->extent(1) != b->extent(0)) {
    throw DimensionError("matmul: " + shape_str(a->shape()) + " vs " + shape_str(b->shape()));
  }
  const int64_t m = a->extent(0), k = a->extent(1), n = b->extent(1);
  const bool grad = wants_grad(g, {&a, &b});
  auto out = Tensor::zeros({m, n}, grad);
  for (int64_t i = 0; i < m; ++i) {
    double* crow = out->data() + i * n;
    const double* arow = a->data() + i * k;
    for (int64_t p = 0; p < k; ++p) axpy_n(arow[p], b->data() + p * n, crow, n);
  }
  if (grad) {
    g.record([a, b, out, m, k, n] {
      if (!out->has_grad()) return;
      const double* go = out->g.data();
      if (a->requires_grad()) {
        double* ga = a->grad().data();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t p = 0; p < k; ++p) ga[i * k + p] += dot_n(go + i * n, b->data() + p * n, n);
        }
      }
      if (b->requires_grad()) {
        double* gb = b->grad().data();
        for (int64_t i = 0; i < m; ++i) {
          const double* arow = a->data() + i * k;
          for (int64_t p = 0; p < k; ++p) axpy_n(arow[p], go + i * n, gb + p * n, n);
        }
      }
    });
  }
  return out;
}

TensorPtr matmul_nt(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->extent(1) != b->extent(1)) {
    throw DimensionError("matmul_nt: " + shape_str(a->shape()) + " vs " + shape_str(b->shape()) +
                         " (inner extents are the last axis of both)");
  }
  const int64_t m = a->extent(0), k = a->extent(1), n = b->extent(0);
  const bool grad = wants_grad(g, {&a, &b});
  auto out = Tensor::zeros({m, n}, grad);
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a->data() + i * k;
    double* crow = out->data() + i * n;
    for (int64_t j = 0; j < n; ++j) crow[j] = dot_n(arow, b->data() + j * k, k);
  }
  if (grad) {
    g.record([a, b, out, m, k, n] {
      if (!out->has_grad()) return;
      const double* go = out->g.data();
      if (a->requires_grad()) {
        double* ga = a->grad().data();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < n; ++j) axpy_n(go[i * n + j], b->data() + j * k, ga + i * k, k);
        }
      }
      if (b->requires_grad()) {
        double* gb = b->grad().data();
        for (int64_t i = 0; i < m; ++i) {
          const double* arow = a->data() + i * k;
          for (int64_t j = 0; j < n; ++j) axpy_n(go[i * n + j], arow, gb + j * k, k);
        }
      }
    });
  }
  return out;
}

TensorPtr matvec(Graph& g, const TensorPtr& a, const TensorPtr& x) {
  if (a->rank() != 2 || x->rank() != 1 || a->extent(1) != x->extent(0)) {
    throw DimensionError("matvec: " + shape_str(a->shape()) + " vs " + shape_str(x->shape()));
  }
  const int64_t m = a->extent(0), k = a->extent(1);
  const bool grad = wants_grad(g, {&a, &x});
  auto out = Tensor::zeros({m}, grad);
  for (int64_t i = 0; i < m; ++i) out->v[i] = dot_n(a->data() + i * k, x->data(), k);
  if (grad) {
    g.record([a, x, out, m, k] {
      if (!out->has_grad()) return;
      const double* go = out->g.data();
      if (a->requires_grad()) {
        double* ga = a->grad().data();
        for (int64_t i = 0; i < m; ++i) axpy_n(go[i], x->data(), ga + i * k, k);
      }
      if (x->requires_grad()) {
        double* gx = x->grad().data();
        for (int64_t i = 0; i < m; ++i) axpy_n(go[i], a->data() + i * k, gx, k);
      }
    });
  }
  return out;
}

TensorPtr vecmat(Graph& g, const TensorPtr& x, const TensorPtr& a) {
  if (x->rank() != 1 || a->rank() != 2 || x->extent(0) != a->extent(0)) {
    throw DimensionError("vecmat: " + shape_str(x->shape()) + " vs " + shape_str(a->shape()));
  }
  const int64_t m = a->extent(0), n = a->extent(1);
  const bool grad = wants_grad(g, {&x, &a});
  auto out = Tensor::zeros({n}, grad);
  for (int64_t i = 0; i < m; ++i) axpy_n(x->v[i], a->data() + i * n, out->data(), n);
  if (grad) {
    g.record([x, a, out, m, n] {
      if (!out->has_grad()) return;
      const double* go = out->g.data();
      if (x->requires_grad()) {
        double* gx = x->grad().data();
        for (int64_t i = 0; i < m; ++i) gx[i] += dot_n(go, a->data() + i * n, n);
      }
      if (a->requires_grad()) {
        double* ga = a->grad().data();
        for (int64_t i = 0; i < m; ++i) axpy_n(x->v[i], go, ga + i * n, n);
      }
    });
  }
  return out;
}

TensorPtr reshape(Graph& g, const TensorPtr& a, Shape shape) {
  if (shape_numel(shape) != a->numel()) {
    throw DimensionError("reshape: " + shape_str(a->shape()) + " to " + shape_str(shape) +
                         " changes element count");
  }
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros(std::move(shape), grad);
  out->v = a->v;
  if (grad) {
    g.record([a, out] {
      if (!out->has_grad()) return;
      axpy_n(1.0, out->g.data(), a->grad().data(), a->numel());
    });
  }
  return out;
}

TensorPtr concat_vec(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 1 || b->rank() != 1) {
    throw DimensionError("concat_vec expects vectors, got " + shape_str(a->shape()) + " and " +
                         shape_str(b->shape()));
  }
  const int64_t na = a->numel(), nb = b->numel();
  const bool grad = wants_grad(g, {&a, &b});
  auto out = Tensor::zeros({na + nb}, grad);
  std::copy(a->v.begin(), a->v.end(), out->v.begin());
  std::copy(b->v.begin(), b->v.end(), out->v.begin() + na);
  if (grad) {
    g.record([a, b, out, na, nb] {
      if (!out->has_grad()) return;
      if (a->requires_grad()) axpy_n(1.0, out->g.data(), a->grad().data(), na);
      if (b->requires_grad()) axpy_n(1.0, out->g.data() + na, b->grad().data(), nb);
    });
  }
  return out;
}

TensorPtr concat_cols(Graph& g, const TensorPtr& a, const TensorPtr& b) {
  if (a->rank() != 2 || b->rank() != 2 || a->extent(0) != b->extent(0)) {
    throw DimensionError("concat_cols: " + shape_str(a->shape()) + " vs " + shape_str(b->shape()));
  }
  const int64_t rows = a->extent(0), na = a->extent(1), nb = b->extent(1);
  const bool grad = wants_grad(g, {&a, &b});
  auto out = Tensor::zeros({rows, na + nb}, grad);
  for (int64_t i = 0; i < rows; ++i) {
    std::copy(a->data() + i * na, a->data() + (i + 1) * na, out->data() + i * (na + nb));
    std::copy(b->data() + i * nb, b->data() + (i + 1) * nb, out->data() + i * (na + nb) + na);
  }
  if (grad) {
    g.record([a, b, out, rows, na, nb] {
      if (!out->has_grad()) return;
      for (int64_t i = 0; i < rows; ++i) {
        const double* go = out->g.data() + i * (na + nb);
        if (a->requires_grad()) axpy_n(1.0, go, a->grad().data() + i * na, na);
        if (b->requires_grad()) axpy_n(1.0, go + na, b->grad().data() + i * nb, nb);
      }
    });
  }
  return out;
}

TensorPtr take0(Graph& g, const TensorPtr& a, int64_t i) {
  if (a->rank() < 1) throw DimensionError("take0 on scalar");
  if (i < 0 || i >= a->extent(0)) {
    throw DimensionError("take0 index " + std::to_string(i) + " out of range for " +
                         shape_str(a->shape()));
  }
  Shape rest(a->shape().begin() + 1, a->shape().end());
  if (rest.empty()) rest = {1};
  const int64_t block = shape_numel(rest);
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros(std::move(rest), grad);
  std::copy(a->data() + i * block, a->data() + (i + 1) * block, out->data());
  if (grad) {
    g.record([a, out, i, block] {
      if (!out->has_grad()) return;
      axpy_n(1.0, out->g.data(), a->grad().data() + i * block, block);
    });
  }
  return out;
}

TensorPtr stack0(Graph& g, const std::vector<TensorPtr>& parts) {
  if (parts.empty()) throw UsageError("stack0 of zero tensors");
  for (const auto& p : parts) check_same_shape("stack0", parts[0], p);
  Shape shape = parts[0]->shape();
  shape.insert(shape.begin(), static_cast<int64_t>(parts.size()));
  const int64_t block = parts[0]->numel();
  bool grad = false;
  for (const auto& p : parts) grad = grad || wants_grad(g, {&p});
  auto out = Tensor::zeros(std::move(shape), grad);
  for (size_t i = 0; i < parts.size(); ++i) {
    std::copy(parts[i]->v.begin(), parts[i]->v.end(), out->data() + static_cast<int64_t>(i) * block);
  }
  if (grad) {
    g.record([parts, out, block] {
      if (!out->has_grad()) return;
      for (size_t i = 0; i < parts.size(); ++i) {
        if (parts[i]->requires_grad()) {
          axpy_n(1.0, out->g.data() + static_cast<int64_t>(i) * block, parts[i]->grad().data(), block);
        }
      }
    });
  }
  return out;
}

TensorPtr sum(Graph& g, const TensorPtr& a) {
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros({1}, grad);
  double s = 0.0;
  for (double x : a->v) s += x;
  out->v[0] = s;
  if (grad) {
    g.record([a, out] {
      if (!out->has_grad()) return;
      auto& ga = a->grad();
      const double go = out->g[0];
      for (int64_t i = 0; i < a->numel(); ++i) ga[i] += go;
    });
  }
  return out;
}

TensorPtr mean_of(Graph& g, const std::vector<TensorPtr>& scalars) {
  if (scalars.empty()) throw UsageError("mean_of zero scalars");
  bool grad = false;
  for (const auto& s : scalars) {
    if (s->numel() != 1) throw DimensionError("mean_of expects scalars, got " + shape_str(s->shape()));
    grad = grad || wants_grad(g, {&s});
  }
  auto out = Tensor::zeros({1}, grad);
  for (const auto& s : scalars) out->v[0] += s->v[0];
  out->v[0] /= static_cast<double>(scalars.size());
  if (grad) {
    g.record([scalars, out] {
      if (!out->has_grad()) return;
      const double go = out->g[0] / static_cast<double>(scalars.size());
      for (const auto& s : scalars) {
        if (s->requires_grad()) s->grad()[0] += go;
      }
    });
  }
  return out;
}

TensorPtr softmax_vec(Graph& g, const TensorPtr& a) {
  if (a->rank() != 1 || a->numel() < 1) {
    throw DimensionError("softmax expects a non-empty vector, got " + shape_str(a->shape()));
  }
  const int64_t n = a->numel();
  const bool grad = wants_grad(g, {&a});
  auto out = Tensor::zeros({n}, grad);
  const double mx = *std::max_element(a->v.begin(), a->v.end());
  double z = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    out->v[i] = std::exp(a->v[i] - mx);
    z += out->v[i];
  }
  for (int64_t i = 0; i < n; ++i) out->v[i] /= z;
  if (grad) {
    g.record([a, out, n] {
      if (!out->has_grad()) return;
      double dotp = 0.0;
      for (int64_t i = 0; i < n; ++i) dotp += out->g[i] * out->v[i];
      auto& ga = a->grad();
      for (int64_t i = 0; i < n; ++i) ga[i] += out->v[i] * (out->g[i] - dotp);
    });
  }
  return out;
}

std::vector<double> log_softmax_values(const Tensor& logits) {
  const int64_t n = logits.numel();
  std::vector<double> out(static_cast<size_t>(n));
  const double mx = *std::max_element(logits.v.begin(), logits.v.end());
  double z = 0.0;
  for (int64_t i = 0; i < n; ++i) z += std::exp(logits.v[i] - mx);
  const double lse = mx + std::log(z);
  for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = logits.v[i] - lse;
  return out;
}

TensorPtr cross_entropy(Graph& g, const TensorPtr& logits, int64_t target) {
  if (logits->rank() != 1) {
    throw DimensionError("cross_entropy expects a logit vector, got " + shape_str(logits->shape()));
  }
  if (target < 0 || target >= logits->numel()) {
    throw InputError("cross_entropy target " + std::to_string(target) + " out of range for " +
                     shape_str(logits->shape()));
  }
  const int64_t n = logits->numel();
  const bool grad = wants_grad(g, {&logits});
  auto out = Tensor::zeros({1}, grad);
  const double mx = *std::max_element(logits->v.begin(), logits->v.end());
  double z = 0.0;
  for (int64_t i = 0; i < n; ++i) z += std::exp(logits->v[i] - mx);
  const double lse = mx + std::log(z);
  out->v[0] = lse - logits->v[target];
  if (grad) {
    g.record([logits, out, target, n, mx, lse] {
      (void)mx;
      if (!out->has_grad()) return;
      auto& gl = logits->grad();
      const double go = out->g[0];
      for (int64_t i = 0; i < n; ++i) {
        const double p = std::exp(logits->v[i] - lse);
        gl[i] += go * (p - (i == target ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

TensorPtr conv2d(Graph& g, const TensorPtr& input, const TensorPtr& kernels,
                 int64_t stride_h, int64_t stride_w) {
  if (stride_h <= 0 || stride_w <= 0) {
    throw ConfigError("conv2d stride must be positive, got (" + std::to_string(stride_h) + "," +
                      std::to_string(stride_w) + ")");
  }
  if (input->rank() != 3 || kernels->rank() != 4 || input->extent(2) != kernels->extent(2)) {
    throw DimensionError("conv2d: input " + shape_str(input->shape()) + " vs kernels " +
                         shape_str(kernels->shape()));
  }
  const int64_t T = input->extent(0), F = input->extent(1), C = input->extent(2);
  const int64_t kh = kernels->extent(0), kw = kernels->extent(1), N = kernels->extent(3);
  const int64_t to_n = (T + stride_h - 1) / stride_h;
  const int64_t fo_n = (F + stride_w - 1) / stride_w;
  // 'same' padding, split with the smaller half in front.
  const int64_t pad_h = std::max<int64_t>(0, (to_n - 1) * stride_h + kh - T);
  const int64_t pad_w = std::max<int64_t>(0, (fo_n - 1) * stride_w + kw - F);
  const int64_t pad_top = pad_h / 2, pad_left = pad_w / 2;

  const bool grad = wants_grad(g, {&input, &kernels});
  auto out = Tensor::zeros({to_n, fo_n, N}, grad);
  for (int64_t to = 0; to < to_n; ++to) {
    for (int64_t dh = 0; dh < kh; ++dh) {
      const int64_t t = to * stride_h - pad_top + dh;
      if (t < 0 || t >= T) continue;
      for (int64_t fo = 0; fo < fo_n; ++fo) {
        double* orow = out->data() + (to * fo_n + fo) * N;
        for (int64_t dw = 0; dw < kw; ++dw) {
          const int64_t f = fo * stride_w - pad_left + dw;
          if (f < 0 || f >= F) continue;
          const double* in_pix = input->data() + (t * F + f) * C;
          const double* krow = kernels->data() + (dh * kw + dw) * C * N;
          for (int64_t c = 0; c < C; ++c) axpy_n(in_pix[c], krow + c * N, orow, N);
        }
      }
    }
  }
  if (grad) {
    g.record([input, kernels, out, T, F, C, kh, kw, N, stride_h, stride_w, pad_top, pad_left,
              to_n, fo_n] {
      if (!out->has_grad()) return;
      const double* go = out->g.data();
      const bool gi = input->requires_grad();
      const bool gk = kernels->requires_grad();
      double* gin = gi ? input->grad().data() : nullptr;
      double* gker = gk ? kernels->grad().data() : nullptr;
      for (int64_t to = 0; to < to_n; ++to) {
        for (int64_t dh = 0; dh < kh; ++dh) {
          const int64_t t = to * stride_h - pad_top + dh;
          if (t < 0 || t >= T) continue;
          for (int64_t fo = 0; fo < fo_n; ++fo) {
            const double* grow = go + (to * fo_n + fo) * N;
            for (int64_t dw = 0; dw < kw; ++dw) {
              const int64_t f = fo * stride_w - pad_left + dw;
              if (f < 0 || f >= F) continue;
              const double* in_pix = input->data() + (t * F + f) * C;
              const double* krow = kernels->data() + (dh * kw + dw) * C * N;
              for (int64_t c = 0; c < C; ++c) {
                if (gi) gin[(t * F + f) * C + c] += dot_n(grow, krow + c * N, N);
                if (gk) axpy_n(in_pix[c], grow, gker + (dh * kw + dw) * C * N + c * N, N);
              }
            }
          }
        }
      }
    });
  }
  return out;
}

LstmOut lstm_gates(Graph& g, const TensorPtr& pre, const TensorPtr& c) {
  const int64_t d = c->shape().back();
  Shape expect = c->shape();
  expect.back() = 4 * d;
  if (pre->shape() != expect) {
    throw DimensionError("lstm_gates: pre " + shape_str(pre->shape()) + " vs cell " +
                         shape_str(c->shape()) + " (want last axis 4x)");
  }
  const int64_t rows = c->numel() / d;
  const bool grad = wants_grad(g, {&pre, &c});
  auto h_out = Tensor::zeros(c->shape(), grad);
  auto c_out = Tensor::zeros(c->shape(), grad);
  // Gate activations are kept for the backward sweep.
  auto acts = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * 4 * d));
  for (int64_t r = 0; r < rows; ++r) {
    const double* p = pre->data() + r * 4 * d;
    const double* cp = c->data() + r * d;
    double* av = acts->data() + r * 4 * d;
    double* ho = h_out->data() + r * d;
    double* co = c_out->data() + r * d;
    for (int64_t j = 0; j < d; ++j) {
      const double gi = sigmoid_scalar(p[j]);
      const double gf = sigmoid_scalar(p[d + j]);
      const double gg = std::tanh(p[2 * d + j]);
      const double go = sigmoid_scalar(p[3 * d + j]);
      av[j] = gi;
      av[d + j] = gf;
      av[2 * d + j] = gg;
      av[3 * d + j] = go;
      co[j] = gf * cp[j] + gi * gg;
      ho[j] = go * std::tanh(co[j]);
    }
  }
  if (grad) {
    g.record([pre, c, h_out, c_out, acts, rows, d] {
      if (!h_out->has_grad() && !c_out->has_grad()) return;
      const bool want_c = c->requires_grad();
      const bool want_pre = pre->requires_grad();
      double* gpre = want_pre ? pre->grad().data() : nullptr;
      double* gc = want_c ? c->grad().data() : nullptr;
      for (int64_t r = 0; r < rows; ++r) {
        const double* av = acts->data() + r * 4 * d;
        const double* cp = c->data() + r * d;
        const double* co = c_out->data() + r * d;
        const double* dh = h_out->has_grad() ? h_out->g.data() + r * d : nullptr;
        const double* dco = c_out->has_grad() ? c_out->g.data() + r * d : nullptr;
        for (int64_t j = 0; j < d; ++j) {
          const double gi = av[j], gf = av[d + j], gg = av[2 * d + j], go = av[3 * d + j];
          const double tc = std::tanh(co[j]);
          const double dhj = dh ? dh[j] : 0.0;
          double dc = dco ? dco[j] : 0.0;
          dc += dhj * go * (1.0 - tc * tc);
          if (want_pre) {
            double* gp = gpre + r * 4 * d;
            gp[j] += dc * gg * gi * (1.0 - gi);
            gp[d + j] += dc * cp[j] * gf * (1.0 - gf);
            gp[2 * d + j] += dc * gi * (1.0 - gg * gg);
            gp[3 * d + j] += dhj * tc * go * (1.0 - go);
          }
          if (want_c) gc[r * d + j] += dc * gf;
        }
      }
    });
  }
  return {h_out, c_out};
}

LstmOut lstm_step(Graph& g, const LstmWeights& w, const TensorPtr& x,
                  const TensorPtr& h, const TensorPtr& c) {
  if (h->shape() != c->shape()) {
    throw DimensionError("lstm_step: state shapes differ, h " + shape_str(h->shape()) + " vs c " +
                         shape_str(c->shape()));
  }
  auto pre = add(g, add(g, matvec(g, w.w_input, x), matvec(g, w.w_recur, h)), w.bias);
  return lstm_gates(g, pre, c);
}

namespace {

struct BnDims {
  int64_t lead;
  int64_t channels;
};

BnDims bn_dims(const TensorPtr& x, const TensorPtr& gamma, const TensorPtr& beta) {
  if (x->rank() < 1) throw DimensionError("batch_norm on scalar");
  const int64_t c = x->shape().back();
  if (gamma->shape() != Shape{c} || beta->shape() != Shape{c}) {
    throw DimensionError("batch_norm: scale/shift " + shape_str(gamma->shape()) + "/" +
                         shape_str(beta->shape()) + " vs channels " + std::to_string(c));
  }
  return {x->numel() / c, c};
}

}  // namespace

TensorPtr batch_norm_train(Graph& g, const TensorPtr& x, const TensorPtr& gamma,
                           const TensorPtr& beta, double eps,
                           std::vector<double>* batch_mean, std::vector<double>* batch_var) {
  const auto [lead, c] = bn_dims(x, gamma, beta);
  if (lead < 2) {
    throw InputError("batch_norm train mode needs >= 2 positions per channel, got " +
                     std::to_string(lead));
  }
  std::vector<double> mean(static_cast<size_t>(c), 0.0), var(static_cast<size_t>(c), 0.0);
  for (int64_t r = 0; r < lead; ++r) {
    const double* px = x->data() + r * c;
    for (int64_t j = 0; j < c; ++j) mean[j] += px[j];
  }
  for (int64_t j = 0; j < c; ++j) mean[j] /= static_cast<double>(lead);
  for (int64_t r = 0; r < lead; ++r) {
    const double* px = x->data() + r * c;
    for (int64_t j = 0; j < c; ++j) {
      const double dlt = px[j] - mean[j];
      var[j] += dlt * dlt;
    }
  }
  for (int64_t j = 0; j < c; ++j) var[j] /= static_cast<double>(lead);

  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
  for (int64_t j = 0; j < c; ++j) (*inv_std)[j] = 1.0 / std::sqrt(var[j] + eps);
  auto xhat = std::make_shared<std::vector<double>>(x->v.size());
  const bool grad = wants_grad(g, {&x, &gamma, &beta});
  auto out = Tensor::zeros(x->shape(), grad);
  for (int64_t r = 0; r < lead; ++r) {
    const double* px = x->data() + r * c;
    double* ph = xhat->data() + r * c;
    double* po = out->data() + r * c;
    for (int64_t j = 0; j < c; ++j) {
      ph[j] = (px[j] - mean[j]) * (*inv_std)[j];
      po[j] = gamma->v[j] * ph[j] + beta->v[j];
    }
  }
  if (batch_mean) *batch_mean = mean;
  if (batch_var) *batch_var = var;
  if (grad) {
    g.record([x, gamma, beta, out, xhat, inv_std, lead, c] {
      if (!out->has_grad()) return;
      const double* go = out->g.data();
      std::vector<double> sum_dy(static_cast<size_t>(c), 0.0);
      std::vector<double> sum_dy_xhat(static_cast<size_t>(c), 0.0);
      for (int64_t r = 0; r < lead; ++r) {
        const double* pg = go + r * c;
        const double* ph = xhat->data() + r * c;
        for (int64_t j = 0; j < c; ++j) {
          sum_dy[j] += pg[j];
          sum_dy_xhat[j] += pg[j] * ph[j];
        }
      }
      if (beta->requires_grad()) {
        auto& gb = beta->grad();
        for (int64_t j = 0; j < c; ++j) gb[j] += sum_dy[j];
      }
      if (gamma->requires_grad()) {
        auto& gg = gamma->grad();
        for (int64_t j = 0; j < c; ++j) gg[j] += sum_dy_xhat[j];
      }
      if (x->requires_grad()) {
        auto& gx = x->grad();
        const double inv_n = 1.0 / static_cast<double>(lead);
        for (int64_t r = 0; r < lead; ++r) {
          const double* pg = go + r * c;
          const double* ph = xhat->data() + r * c;
          double* px = gx.data() + r * c;
          for (int64_t j = 0; j < c; ++j) {
            px[j] += gamma->v[j] * (*inv_std)[j] *
                     (pg[j] - inv_n * sum_dy[j] - ph[j] * inv_n * sum_dy_xhat[j]);
          }
        }
      }
    });
  }
  return out;
}

TensorPtr batch_norm_infer(Graph& g, const TensorPtr& x, const TensorPtr& gamma,
                           const TensorPtr& beta, const std::vector<double>& running_mean,
                           const std::vector<double>& running_var, double eps) {
  const auto [lead, c] = bn_dims(x, gamma, beta);
  if (static_cast<int64_t>(running_mean.size()) != c ||
      static_cast<int64_t>(running_var.size()) != c) {
    throw DimensionError("batch_norm_infer: running stats size mismatch");
  }
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(c));
  for (int64_t j = 0; j < c; ++j) (*inv_std)[j] = 1.0 / std::sqrt(running_var[j] + eps);
  auto xhat = std::make_shared<std::vector<double>>(x->v.size());
  const bool grad = wants_grad(g, {&x, &gamma, &beta});
  auto out = Tensor::zeros(x->shape(), grad);
  for (int64_t r = 0; r < lead; ++r) {
    const double* px = x->data() + r * c;
    double* ph = xhat->data() + r * c;
    double* po = out->data() + r * c;
    for (int64_t j = 0; j < c; ++j) {
      ph[j] = (px[j] - running_mean[j]) * (*inv_std)[j];
      po[j] = gamma->v[j] * ph[j] + beta->v[j];
    }
  }
  if (grad) {
    g.record([x, gamma, beta, out, xhat, inv_std, lead, c] {
      if (!out->has_grad()) return;
      const double* go = out->g.data();
      for (int64_t r = 0; r < lead; ++r) {
        const double* pg = go + r * c;
        const double* ph = xhat->data() + r * c;
        for (int64_t j = 0; j < c; ++j) {
          if (x->requires_grad()) x->grad()[r * c + j] += pg[j] * gamma->v[j] * (*inv_std)[j];
          if (gamma->requires_grad()) gamma->grad()[j] += pg[j] * ph[j];
          if (beta->requires_grad()) beta->grad()[j] += pg[j];
        }
      }
    });
  }
  return out;
}

double grad_check(const std::function<TensorPtr(Graph&)>& f,
                  const std::vector<TensorPtr>& params, const GradCheckOptions& opt) {
  for (const auto& p : params) p->zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Graph g(opt.seed);
    auto loss = f(g);
    if (!loss->all_finite()) throw NumericError("grad_check: non-finite loss at base point");
    g.backward(loss);
    for (const auto& p : params) analytic.push_back(p->has_grad() ? p->g : std::vector<double>(p->v.size(), 0.0));
  }

  int64_t total = 0;
  std::vector<int64_t> prefix;
  for (const auto& p : params) {
    prefix.push_back(total);
    total += p->numel();
  }
  std::vector<int64_t> coords;
  if (total <= opt.max_coords) {
    for (int64_t i = 0; i < total; ++i) coords.push_back(i);
  } else {
    Rng rng(opt.seed);
    std::set<int64_t> chosen;
    while (static_cast<int>(chosen.size()) < opt.max_coords) {
      chosen.insert(static_cast<int64_t>(rng.below(static_cast<uint64_t>(total))));
    }
    coords.assign(chosen.begin(), chosen.end());
  }

  auto eval = [&]() {
    Graph g(opt.seed);
    auto loss = f(g);
    const double v = loss->item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss at probe point");
    return v;
  };

  double max_rel = 0.0;
  for (int64_t flat : coords) {
    size_t pi = 0;
    while (pi + 1 < params.size() && prefix[pi + 1] <= flat) ++pi;
    const int64_t idx = flat - prefix[pi];
    double& slot = params[pi]->v[static_cast<size_t>(idx)];
    const double saved = slot;
    slot = saved + opt.eps;
    const double lp = eval();
    slot = saved - opt.eps;
    const double lm = eval();
    slot = saved;
    const double numeric = (lp - lm) / (2.0 * opt.eps);
    const double a = analytic[pi][static_cast<size_t>(idx)];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace sqt
