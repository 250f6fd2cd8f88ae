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
//
// Tensor engine tests: forward values against hand-computed oracles, backward
// rules against central finite differences, and the serialization format.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sqt/ops.h"
#include "sqt/tensor.h"

using namespace sqt;

TEST_CASE("tensor basics") {
  auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t->numel() == 6);
  CHECK(t->rank() == 2);
  CHECK(t->at(1, 2) == 6.0);
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(t->item(), UsageError);
  CHECK(Tensor::scalar(7.0)->item() == 7.0);
  auto u = Tensor::zeros({3});
  CHECK(u->id() != t->id());
}

TEST_CASE("matmul forward") {
  Graph g;
  // Identity case.
  auto a = Tensor::from({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto eye = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  auto r = matmul(g, a, eye);
  for (int64_t i = 0; i < 9; ++i) CHECK(r->v[i] == a->v[i]);
  // Hand-expanded 2x2 product.
  auto p = matmul(g, Tensor::from({2, 2}, {1, 2, 3, 4}), Tensor::from({2, 2}, {5, 6, 7, 8}));
  CHECK(p->v == std::vector<double>{19, 22, 43, 50});
  // Zero case.
  auto z = matmul(g, Tensor::zeros({2, 3}), Tensor::full({3, 4}, 2.5));
  for (double x : z->v) CHECK(x == 0.0);
  CHECK_THROWS_AS(matmul(g, Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), DimensionError);
}

TEST_CASE("matmul_nt matches matmul with transposed operand") {
  Graph g;
  Rng rng(11);
  auto a = Tensor::uniform({3, 5}, -1, 1, rng, false);
  auto b = Tensor::uniform({4, 5}, -1, 1, rng, false);
  auto bt = Tensor::zeros({5, 4});
  for (int64_t i = 0; i < 4; ++i) {
    for (int64_t j = 0; j < 5; ++j) bt->at(j, i) = b->at(i, j);
  }
  auto r1 = matmul_nt(g, a, b);
  auto r2 = matmul(g, a, bt);
  for (int64_t i = 0; i < r1->numel(); ++i) CHECK(r1->v[i] == doctest::Approx(r2->v[i]).epsilon(1e-14));
}

TEST_CASE("conv2d forward") {
  Graph g;
  // 1x1 identity kernel passes input through.
  Rng rng(3);
  auto in = Tensor::uniform({4, 5, 1}, -1, 1, rng, false);
  auto ident = Tensor::from({1, 1, 1, 1}, {1.0});
  auto out = conv2d(g, in, ident, 1, 1);
  CHECK(out->shape() == Shape{4, 5, 1});
  for (int64_t i = 0; i < in->numel(); ++i) CHECK(out->v[i] == in->v[i]);

  // All-ones 3x3 kernel on a constant-1 5x5 input: interior 9, corners 4.
  auto ones = Tensor::full({5, 5, 1}, 1.0);
  auto k33 = Tensor::full({3, 3, 1, 1}, 1.0);
  auto s = conv2d(g, ones, k33, 1, 1);
  CHECK(s->at(2, 2, 0) == 9.0);
  CHECK(s->at(0, 0, 0) == 4.0);
  CHECK(s->at(4, 4, 0) == 4.0);
  CHECK(s->at(0, 2, 0) == 6.0);

  // T=100 downsampled by two stride-2 layers -> 25.
  auto long_in = Tensor::full({100, 8, 1}, 1.0);
  auto k = Tensor::full({3, 3, 1, 2}, 0.1);
  auto c1 = conv2d(g, long_in, k, 2, 2);
  CHECK(c1->extent(0) == 50);
  auto k2 = Tensor::full({3, 3, 2, 2}, 0.1);
  auto c2 = conv2d(g, c1, k2, 2, 2);
  CHECK(c2->extent(0) == 25);

  CHECK_THROWS_AS(conv2d(g, ones, k33, 0, 1), ConfigError);
  CHECK_THROWS_AS(conv2d(g, ones, Tensor::zeros({3, 3, 2, 1}), 1, 1), DimensionError);
}

TEST_CASE("conv2d stride-2 twice gives ceil(T/4) for T in 1..1000") {
  Graph g = Graph::inference();
  auto k1 = Tensor::full({3, 3, 1, 1}, 0.5);
  auto k2 = Tensor::full({3, 3, 1, 1}, 0.5);
  for (int64_t t = 1; t <= 1000; ++t) {
    auto in = Tensor::full({t, 2, 1}, 1.0);
    auto out = conv2d(g, conv2d(g, in, k1, 2, 2), k2, 2, 2);
    CHECK(out->extent(0) == (t + 3) / 4);
  }
}

TEST_CASE("lstm_step zero and saturation cases") {
  Graph g;
  const int64_t din = 3, d = 4;
  LstmWeights w{Tensor::zeros({4 * d, din}), Tensor::zeros({4 * d, d}), Tensor::zeros({4 * d})};
  auto x = Tensor::full({din}, 0.7);
  auto h0 = Tensor::zeros({d});
  auto c0 = Tensor::zeros({d});
  auto out = lstm_step(g, w, x, h0, c0);
  for (double v : out.h->v) CHECK(v == 0.0);
  for (double v : out.c->v) CHECK(v == 0.0);

  // Forget bias 50 with zero input/candidate weights: cell state carried over.
  auto c1 = Tensor::from({d}, {0.3, -0.4, 1.2, 0.0});
  LstmWeights w2{Tensor::zeros({4 * d, din}), Tensor::zeros({4 * d, d}), Tensor::zeros({4 * d})};
  for (int64_t j = 0; j < d; ++j) w2.bias->v[d + j] = 50.0;  // forget gate slice
  auto out2 = lstm_step(g, w2, x, h0, c1);
  for (int64_t j = 0; j < d; ++j) CHECK(out2.c->v[j] == doctest::Approx(c1->v[j]).epsilon(1e-12));

  CHECK_THROWS_AS(lstm_step(g, w, x, h0, Tensor::zeros({d + 1})), DimensionError);
}

// Straight-line re-implementation of the gate equations, used as a
// duplicate-implementation oracle against the fused op.
static void lstm_reference(const std::vector<double>& pre, const std::vector<double>& c,
                           std::vector<double>* h_out, std::vector<double>* c_out) {
  const size_t d = c.size();
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  h_out->resize(d);
  c_out->resize(d);
  for (size_t j = 0; j < d; ++j) {
    const double i = sig(pre[j]);
    const double f = sig(pre[d + j]);
    const double gg = std::tanh(pre[2 * d + j]);
    const double o = sig(pre[3 * d + j]);
    (*c_out)[j] = f * c[j] + i * gg;
    (*h_out)[j] = o * std::tanh((*c_out)[j]);
  }
}

TEST_CASE("lstm_gates agrees with straight-line reference") {
  Graph g;
  Rng rng(17);
  auto pre = Tensor::uniform({16}, -2, 2, rng, false);
  auto c = Tensor::uniform({4}, -1, 1, rng, false);
  auto out = lstm_gates(g, pre, c);
  std::vector<double> h_ref, c_ref;
  lstm_reference(pre->v, c->v, &h_ref, &c_ref);
  for (int64_t j = 0; j < 4; ++j) {
    CHECK(std::abs(out.h->v[j] - h_ref[j]) < 1e-12);
    CHECK(std::abs(out.c->v[j] - c_ref[j]) < 1e-12);
    CHECK(out.h->v[j] > -1.0);
    CHECK(out.h->v[j] < 1.0);
  }
}

TEST_CASE("softmax values") {
  Graph g;
  auto u = softmax_vec(g, Tensor::zeros({3}));
  for (double x : u->v) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  auto stable = softmax_vec(g, Tensor::from({2}, {1000.0, 0.0}));
  CHECK(stable->v[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(stable->v[1] < 1e-300);
  CHECK(stable->all_finite());

  auto s = softmax_vec(g, Tensor::from({3}, {1, 2, 3}));
  CHECK(s->v[0] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
  CHECK(s->v[1] == doctest::Approx(0.24472847105479767).epsilon(1e-12));
  CHECK(s->v[2] == doctest::Approx(0.66524095577482190).epsilon(1e-12));

  // Sum-to-one and permutation equivariance over random draws.
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = Tensor::uniform({7}, -8, 8, rng, false);
    auto y = softmax_vec(g, x);
    double total = 0.0;
    for (double v : y->v) total += v;
    CHECK(std::abs(total - 1.0) <= 1e-12);
    // Reverse the input; the output must reverse too.
    auto xr = Tensor::zeros({7});
    for (int64_t i = 0; i < 7; ++i) xr->v[i] = x->v[6 - i];
    auto yr = softmax_vec(g, xr);
    for (int64_t i = 0; i < 7; ++i) CHECK(yr->v[i] == doctest::Approx(y->v[6 - i]).epsilon(1e-13));
  }
}

TEST_CASE("log_softmax_values matches log of softmax") {
  Graph g;
  Rng rng(23);
  auto x = Tensor::uniform({9}, -5, 5, rng, false);
  auto p = softmax_vec(g, x);
  auto lp = log_softmax_values(*x);
  for (int64_t i = 0; i < 9; ++i) CHECK(lp[i] == doctest::Approx(std::log(p->v[i])).epsilon(1e-12));
}

TEST_CASE("batch_norm train-mode values") {
  Graph g;
  const double eps = 1e-5;
  auto gamma = Tensor::full({1}, 1.0);
  auto beta = Tensor::zeros({1});

  // Constant input: output equals the shift everywhere.
  auto beta2 = Tensor::full({1}, 0.25);
  auto con = Tensor::full({4, 1}, 3.0);
  auto yc = batch_norm_train(g, con, gamma, beta2, eps, nullptr, nullptr);
  for (double v : yc->v) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

  // Batch {1, 3} with eps 1e-5 normalizes to +/- 0.9999950000374997.
  auto x = Tensor::from({2, 1}, {1.0, 3.0});
  std::vector<double> mean, var;
  auto y = batch_norm_train(g, x, gamma, beta, eps, &mean, &var);
  CHECK(y->v[0] == doctest::Approx(-0.9999950000374997).epsilon(1e-14));
  CHECK(y->v[1] == doctest::Approx(+0.9999950000374997).epsilon(1e-14));
  CHECK(mean[0] == 2.0);
  CHECK(var[0] == 1.0);

  // Already-normalized input passes through up to the eps-induced factor.
  auto xn = Tensor::from({2, 1}, {-1.0, 1.0});
  auto yn = batch_norm_train(g, xn, gamma, beta, eps, nullptr, nullptr);
  for (int64_t i = 0; i < 2; ++i) CHECK(yn->v[i] == doctest::Approx(xn->v[i]).epsilon(1e-4));

  CHECK_THROWS_AS(batch_norm_train(g, Tensor::zeros({1, 3}), Tensor::zeros({3}),
                                   Tensor::zeros({3}), eps, nullptr, nullptr),
                  InputError);
}

TEST_CASE("batch_norm infer-mode uses supplied moments") {
  Graph g;
  auto gamma = Tensor::from({2}, {2.0, 1.0});
  auto beta = Tensor::from({2}, {0.5, -0.5});
  auto x = Tensor::from({1, 2}, {3.0, 1.0});
  auto y = batch_norm_infer(g, x, gamma, beta, {1.0, 1.0}, {4.0, 0.0}, 1e-5);
  CHECK(y->v[0] == doctest::Approx(0.5 + 2.0 * 2.0 / std::sqrt(4.0 + 1e-5)).epsilon(1e-12));
  CHECK(y->v[1] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("backward on linear and quadratic losses") {
  {
    Graph g;
    auto w = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
    auto loss = sum(g, w);
    g.backward(loss);
    for (double gv : w->g) CHECK(gv == 1.0);
  }
  {
    Graph g;
    auto w = Tensor::from({2, 2}, {1, 2, 3, 4}, true);
    auto loss = sum(g, mul(g, w, w));
    g.backward(loss);
    CHECK(w->g == std::vector<double>{2, 4, 6, 8});
  }
}

TEST_CASE("backward twice is a state error") {
  Graph g;
  auto w = Tensor::from({2}, {1, 2}, true);
  auto loss = sum(g, w);
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), StateError);
}

TEST_CASE("backward misuse") {
  {
    Graph g;
    auto w = Tensor::from({2}, {1, 2}, true);
    auto y = mul(g, w, w);
    CHECK_THROWS_AS(g.backward(y), UsageError);  // non-scalar loss
  }
  {
    Graph g = Graph::inference();
    auto w = Tensor::from({1}, {2}, true);
    CHECK_THROWS_AS(g.backward(w), UsageError);
    // Inference graphs flow no gradients and record nothing.
    auto y = mul(g, w, w);
    CHECK(!y->requires_grad());
    CHECK(g.size() == 0);
  }
}

TEST_CASE("grad_check: quadratic is exact under central differences") {
  Rng rng(41);
  auto theta = Tensor::uniform({3, 3}, -1, 1, rng);
  auto f = [&](Graph& g) { return scale(g, sum(g, mul(g, theta, theta)), 0.5); };
  CHECK(grad_check(f, {theta}) < 1e-9);
}

TEST_CASE("grad_check: single LSTM step") {
  Rng rng(42);
  const int64_t din = 3, d = 4;
  LstmWeights w{Tensor::uniform({4 * d, din}, -0.4, 0.4, rng),
                Tensor::uniform({4 * d, d}, -0.4, 0.4, rng),
                Tensor::uniform({4 * d}, -0.2, 0.2, rng)};
  auto x = Tensor::uniform({din}, -1, 1, rng);
  auto h0 = Tensor::uniform({d}, -0.5, 0.5, rng);
  auto c0 = Tensor::uniform({d}, -0.5, 0.5, rng);
  auto f = [&](Graph& g) {
    auto s1 = lstm_step(g, w, x, h0, c0);
    auto s2 = lstm_step(g, w, x, s1.h, s1.c);
    return sum(g, mul(g, concat_vec(g, s2.h, s2.c), concat_vec(g, s2.h, s2.c)));
  };
  CHECK(grad_check(f, {w.w_input, w.w_recur, w.bias, x, h0, c0}) < 1e-4);
}

TEST_CASE("grad_check: matrix and vector product chain") {
  Rng rng(43);
  auto a = Tensor::uniform({3, 4}, -1, 1, rng);
  auto b = Tensor::uniform({4, 5}, -1, 1, rng);
  auto d = Tensor::uniform({2, 5}, -1, 1, rng);
  auto x = Tensor::uniform({2}, -1, 1, rng);
  auto e = Tensor::uniform({3, 4}, -1, 1, rng);
  auto f = [&](Graph& g) {
    auto ab = matmul(g, a, b);              // [3,5]
    auto nt = matmul_nt(g, ab, d);          // [3,2]
    auto mv = matvec(g, nt, x);             // [3]
    auto vm = vecmat(g, mv, e);             // [4]
    auto logits = concat_vec(g, vm, mv);    // [7]
    auto probs = softmax_vec(g, logits);
    return add(g, cross_entropy(g, logits, 2), sum(g, mul(g, probs, probs)));
  };
  CHECK(grad_check(f, {a, b, d, x, e}) < 1e-4);
}

TEST_CASE("grad_check: conv + batch norm + elementwise soup") {
  Rng rng(44);
  auto in = Tensor::uniform({6, 5, 2}, -1, 1, rng);
  auto k = Tensor::uniform({3, 3, 2, 3}, -0.5, 0.5, rng);
  auto gamma = Tensor::uniform({3}, 0.5, 1.5, rng);
  auto beta = Tensor::uniform({3}, -0.2, 0.2, rng);
  auto bias = Tensor::uniform({3}, -0.2, 0.2, rng);
  auto f = [&](Graph& g) {
    auto c = conv2d(g, in, k, 2, 2);  // [3,3,3]
    auto n = batch_norm_train(g, c, gamma, beta, 1e-5, nullptr, nullptr);
    auto r = relu(g, n);
    auto flat = reshape(g, r, {9, 3});
    auto shifted = add_rowvec(g, flat, bias);
    auto t = tanh_op(g, shifted);
    auto sgm = sigmoid(g, flat);
    auto prod = mul(g, t, sgm);
    auto row = take0(g, prod, 4);
    auto stacked = stack0(g, {row, row});
    return add(g, sum(g, prod), scale(g, sum(g, stacked), 0.25));
  };
  CHECK(grad_check(f, {in, k, gamma, beta, bias}) < 1e-4);
}

TEST_CASE("grad_check: concat, sub, mean_of, dropout") {
  Rng rng(45);
  auto a = Tensor::uniform({3, 4}, -1, 1, rng);
  auto b = Tensor::uniform({3, 2}, -1, 1, rng);
  auto f = [&](Graph& g) {
    auto cat = concat_cols(g, a, b);  // [3,6]
    auto dp = dropout(g, cat, 0.25);  // mask fixed by the graph seed
    auto diff = sub(g, dp, scale(g, dp, 0.5));
    std::vector<TensorPtr> parts;
    for (int64_t i = 0; i < 3; ++i) parts.push_back(sum(g, mul(g, take0(g, diff, i), take0(g, diff, i))));
    return mean_of(g, parts);
  };
  CHECK(grad_check(f, {a, b}) < 1e-4);
}

TEST_CASE("grad_check: batch_norm infer-mode backward") {
  Rng rng(46);
  auto x = Tensor::uniform({4, 3}, -1, 1, rng);
  auto gamma = Tensor::uniform({3}, 0.5, 1.5, rng);
  auto beta = Tensor::uniform({3}, -0.2, 0.2, rng);
  std::vector<double> rm = {0.1, -0.2, 0.3}, rv = {1.2, 0.8, 2.0};
  auto f = [&](Graph& g) {
    auto y = batch_norm_infer(g, x, gamma, beta, rm, rv, 1e-5);
    return sum(g, mul(g, y, y));
  };
  CHECK(grad_check(f, {x, gamma, beta}) < 1e-4);
}

TEST_CASE("cross_entropy matches log-softmax pick") {
  Graph g;
  auto logits = Tensor::from({4}, {0.5, -1.0, 2.0, 0.0});
  auto lp = log_softmax_values(*logits);
  for (int64_t t = 0; t < 4; ++t) {
    auto loss = cross_entropy(g, logits, t);
    CHECK(loss->item() == doctest::Approx(-lp[t]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(cross_entropy(g, logits, 4), InputError);
  CHECK_THROWS_AS(cross_entropy(g, logits, -1), InputError);
}

TEST_CASE("forward and backward are deterministic") {
  auto run = [](std::vector<double>* grads) {
    Rng rng(7);
    auto a = Tensor::uniform({4, 4}, -1, 1, rng);
    auto b = Tensor::uniform({4, 4}, -1, 1, rng);
    Graph g(99);
    auto y = dropout(g, tanh_op(g, matmul(g, a, b)), 0.3);
    auto loss = sum(g, mul(g, y, y));
    g.backward(loss);
    *grads = a->g;
    return loss->item();
  };
  std::vector<double> g1, g2;
  const double l1 = run(&g1);
  const double l2 = run(&g2);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("tensor serialization round trip") {
  Rng rng(8);
  auto t = Tensor::uniform({3, 2, 4}, -10, 10, rng, false);
  std::stringstream ss;
  write_tensor(ss, *t);
  auto back = read_tensor(ss, "roundtrip");
  CHECK(back->shape() == t->shape());
  CHECK(back->v == t->v);  // bit-exact

  // Bad magic.
  std::stringstream bad("XXXXjunkjunkjunk");
  CHECK_THROWS_AS(read_tensor(bad, "bad"), CorruptionError);

  // Truncated payload.
  std::string blob = ss.str();
  (void)blob;
  std::stringstream ss2;
  write_tensor(ss2, *t);
  std::string full = ss2.str();
  std::stringstream cut(full.substr(0, full.size() - 5));
  CHECK_THROWS_AS(read_tensor(cut, "cut"), CorruptionError);

  // File round trip.
  const std::string path = "test_tensor_roundtrip.bin";
  write_tensor_file(path, *t);
  auto from_file = read_tensor_file(path);
  CHECK(from_file->v == t->v);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_tensor_file("does_not_exist.bin"), InputError);
}

TEST_CASE("rng determinism and state round trip") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
  for (int i = 0; i < 7; ++i) a.normal();  // leave a Box-Muller spare cached
  Rng c;
  c.set_state(a.state());
  for (int i = 0; i < 100; ++i) {
    CHECK(a.normal() == c.normal());
    CHECK(a.uniform() == c.uniform());
  }
  Rng d(123);
  for (int i = 0; i < 1000; ++i) {
    const double u = d.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const uint64_t k = d.below(13);
    CHECK(k < 13);
  }
}

TEST_CASE("fnv1a64 matches reference values") {
  // Reference digests from the published FNV test vectors.
  CHECK(fnv1a64(std::string("")) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64(std::string("foobar")) == 0x85944171f73967e8ull);
  CHECK(to_hex(0xdeadbeefull) == "00000000deadbeef");
}
