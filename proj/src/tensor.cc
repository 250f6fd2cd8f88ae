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

#include "sqt/tensor.h"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sqt {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts are unsupported");

namespace {
std::atomic<uint64_t> g_next_id{1};
}  // namespace

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : shape_(std::move(shape)), requires_grad_(requires_grad) {
  for (int64_t e : shape_) {
    if (e <= 0) throw DimensionError("tensor extent must be positive, got shape " + shape_str(shape_));
  }
  v.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
  id_ = g_next_id.fetch_add(1, std::memory_order_relaxed);
}

TensorPtr Tensor::zeros(Shape shape, bool requires_grad) {
  return std::make_shared<Tensor>(std::move(shape), requires_grad);
}

TensorPtr Tensor::full(Shape shape, double value, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), requires_grad);
  std::fill(t->v.begin(), t->v.end(), value);
  return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

TensorPtr Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), requires_grad);
  if (static_cast<int64_t>(values.size()) != t->numel()) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(t->shape()));
  }
  t->v = std::move(values);
  return t;
}

TensorPtr Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  auto t = std::make_shared<Tensor>(std::move(shape), requires_grad);
  for (double& x : t->v) x = rng.uniform(lo, hi);
  return t;
}

std::vector<double>& Tensor::grad() {
  if (g.empty()) g.assign(v.size(), 0.0);
  return g;
}

void Tensor::zero_grad() {
  // Deallocates rather than fills: has_grad() afterwards reports whether any
  // gradient has flowed since the reset, which is what optimizers key off to
  // leave untouched parameters alone.
  g.clear();
  g.shrink_to_fit();
}

bool Tensor::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() called on tensor of shape " + shape_str(shape_));
  return v[0];
}

void Graph::backward(const TensorPtr& loss, double seed) {
  if (backward_done_) throw StateError("backward already executed on this graph");
  if (!recording_) throw UsageError("backward on an inference graph");
  if (loss->numel() != 1) {
    throw UsageError("backward requires a scalar loss, got shape " + shape_str(loss->shape()));
  }
  backward_done_ = true;
  loss->grad()[0] += seed;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
}

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'T', '1'};

template <typename T>
void write_raw(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const std::string& what) {
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw CorruptionError("truncated tensor data in " + what);
  return value;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write(kMagic, 4);
  write_raw<uint32_t>(os, static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) write_raw<uint64_t>(os, static_cast<uint64_t>(t.extent(i)));
  os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

void write_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open " + path + " for writing");
  write_tensor(os, t);
  if (!os) throw InputError("short write to " + path);
}

TensorPtr read_tensor(std::istream& is, const std::string& what) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw CorruptionError("bad tensor magic in " + what + " (expected \"SQT1\")");
  }
  const uint32_t rank = read_raw<uint32_t>(is, what);
  if (rank > 8) throw CorruptionError("implausible tensor rank " + std::to_string(rank) + " in " + what);
  Shape shape(rank);
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    const uint64_t e = read_raw<uint64_t>(is, what);
    if (e == 0 || e > (1ull << 40) || numel > (int64_t{1} << 40) / static_cast<int64_t>(e)) {
      throw CorruptionError("implausible tensor extents in " + what);
    }
    shape[i] = static_cast<int64_t>(e);
    numel *= shape[i];
  }
  auto t = Tensor::zeros(std::move(shape));
  is.read(reinterpret_cast<char*>(t->data()), static_cast<std::streamsize>(numel * sizeof(double)));
  if (!is) throw CorruptionError("truncated tensor payload in " + what);
  return t;
}

TensorPtr read_tensor_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open tensor file " + path);
  return read_tensor(is, path);
}

std::string to_hex(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace sqt
