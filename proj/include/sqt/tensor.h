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

#ifndef SQT_TENSOR_H_
#define SQT_TENSOR_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sqt/error.h"
#include "sqt/rng.h"

namespace sqt {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major 64-bit float tensor.  Values and the optional gradient
// accumulator share one shape.  Tensors are the only numeric currency in the
// library; layers are thin parameter bundles around them.
class Tensor {
 public:
  explicit Tensor(Shape shape, bool requires_grad = false);

  static TensorPtr zeros(Shape shape, bool requires_grad = false);
  static TensorPtr full(Shape shape, double value, bool requires_grad = false);
  static TensorPtr scalar(double value, bool requires_grad = false);
  static TensorPtr from(Shape shape, std::vector<double> values, bool requires_grad = false);
  // Uniform in [lo, hi); the canonical parameter initializer.
  static TensorPtr uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = true);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t extent(int axis) const { return shape_[axis]; }
  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  uint64_t id() const { return id_; }
  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool r) { requires_grad_ = r; }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  // Gradient accumulator, allocated (zeroed) on first touch.
  std::vector<double>& grad();
  bool has_grad() const { return !g.empty(); }
  // Drops the accumulator entirely; has_grad() turns false until the next
  // backward pass touches this tensor again.
  void zero_grad();

  bool all_finite() const;
  double item() const;  // value of a one-element tensor

  // Flat element accessors for tests and small code paths.
  double& at(int64_t i) { return v[i]; }
  double at(int64_t i) const { return v[i]; }
  double& at(int64_t i, int64_t j) { return v[i * shape_[1] + j]; }
  double at(int64_t i, int64_t j) const { return v[i * shape_[1] + j]; }
  double& at(int64_t i, int64_t j, int64_t k) {
    return v[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(int64_t i, int64_t j, int64_t k) const {
    return v[(i * shape_[1] + j) * shape_[2] + k];
  }

  std::vector<double> v;  // row-major values
  std::vector<double> g;  // gradient; empty until touched

 private:
  Shape shape_;
  bool requires_grad_ = false;
  uint64_t id_ = 0;  // process-unique identity, used for sharing checks
};

// Binary tensor format: magic "SQT1", u32 rank, u64 extents, f64 payload,
// all little-endian.  Shared by checkpoints and the feature cache.
void write_tensor(std::ostream& os, const Tensor& t);
void write_tensor_file(const std::string& path, const Tensor& t);
TensorPtr read_tensor(std::istream& is, const std::string& what);
TensorPtr read_tensor_file(const std::string& path);

// Reverse-mode differentiation tape.  Operations append themselves during the
// forward pass; backward() replays them in exact reverse order.  One graph
// instance is single-threaded; tensors that never require grad are immutable
// after creation and may be shared freely.
class Graph {
 public:
  explicit Graph(uint64_t seed = 0) : rng_(seed) {}

  // Inference tape: nothing is recorded, outputs never require grad.
  static Graph inference() {
    Graph g;
    g.recording_ = false;
    return g;
  }

  bool recording() const { return recording_; }

  // Appends one operation record.  `backward` reads the output grads and
  // accumulates into the input grads.
  void record(std::function<void()> backward) {
    if (recording_) tape_.push_back(std::move(backward));
  }

  // Seeds d(loss)/d(loss) = seed and sweeps the tape once.  Running backward
  // a second time without a fresh graph is an error, not silent accumulation.
  void backward(const TensorPtr& loss, double seed = 1.0);

  size_t size() const { return tape_.size(); }
  Rng& rng() { return rng_; }

 private:
  std::vector<std::function<void()>> tape_;
  Rng rng_;
  bool recording_ = true;
  bool backward_done_ = false;
};

}  // namespace sqt

#endif  // SQT_TENSOR_H_
