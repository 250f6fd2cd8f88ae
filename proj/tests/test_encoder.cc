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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "sqt/encoder.h"
#include "sqt/error.h"

using namespace sqt;

namespace {

// Small geometry-preserving config: freq after the conv stages is 3, so the
// conv-LSTM still fits, but every width is tiny.
SpeechEncoderConfig toy_cfg() {
  SpeechEncoderConfig c;
  c.n_mels = 12;
  c.in_depth = 3;
  c.conv_kernels = 2;
  c.conv_lstm_filters = 2;
  c.lstm_units = 4;
  c.proj_dim = 8;
  c.num_lstm_layers = 3;
  return c;
}

TensorPtr random_feats(int64_t t, const SpeechEncoderConfig& c, Rng& rng) {
  return Tensor::uniform({t, c.n_mels, c.in_depth}, -1.0, 1.0, rng);
}

}  // namespace

TEST_CASE("speech encoder: paper-scale shapes, T=40 -> (10, 512)") {
  SpeechEncoderConfig cfg;  // defaults are the full-size architecture
  Rng rng(1);
  ParamRegistry reg;
  SpeechEncoder enc(cfg, rng, reg, "encoder");
  Graph g;
  auto h = enc.encode(g, random_feats(40, cfg, rng), /*train=*/true);
  CHECK(h->rank() == 2);
  CHECK(h->extent(0) == 10);
  CHECK(h->extent(1) == 512);
  CHECK(h->all_finite());
}

TEST_CASE("speech encoder: L = ceil(T/4) for every T in 1..200") {
  auto cfg = toy_cfg();
  Rng rng(2);
  ParamRegistry reg;
  SpeechEncoder enc(cfg, rng, reg, "encoder");
  {
    Graph g;  // one train pass seeds the batch-norm running moments
    enc.encode(g, random_feats(16, cfg, rng), true);
  }
  for (int64_t t = 1; t <= 200; ++t) {
    Graph g = Graph::inference();
    auto h = enc.encode(g, random_feats(t, cfg, rng), false);
    CHECK(h->extent(0) == (t + 3) / 4);
    CHECK(h->extent(1) == cfg.output_dim());
  }
}

TEST_CASE("speech encoder: input validation") {
  auto cfg = toy_cfg();
  Rng rng(3);
  ParamRegistry reg;
  SpeechEncoder enc(cfg, rng, reg, "encoder");
  Graph g;
  // An empty feature sequence cannot even be represented as a tensor.
  CHECK_THROWS_AS(Tensor::zeros({0, cfg.n_mels, 3}), DimensionError);
  CHECK_THROWS_AS(enc.encode(g, Tensor::zeros({5, cfg.n_mels + 1, 3}), true), DimensionError);
  CHECK_THROWS_AS(enc.encode(g, Tensor::zeros({5, cfg.n_mels}), true), DimensionError);
}

TEST_CASE("speech encoder: distinct inputs give distinct states") {
  auto cfg = toy_cfg();
  Rng rng(4);
  ParamRegistry reg;
  SpeechEncoder enc(cfg, rng, reg, "encoder");
  Graph g;
  auto ha = enc.encode(g, random_feats(12, cfg, rng), true);
  auto hb = enc.encode(g, random_feats(12, cfg, rng), true);
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < ha->v.size(); ++i) {
    dot += ha->v[i] * hb->v[i];
    na += ha->v[i] * ha->v[i];
    nb += hb->v[i] * hb->v[i];
  }
  CHECK(dot / std::sqrt(na * nb) < 1.0 - 1e-6);
}

TEST_CASE("speech encoder: infer mode is deterministic") {
  auto cfg = toy_cfg();
  Rng rng(5);
  ParamRegistry reg;
  SpeechEncoder enc(cfg, rng, reg, "encoder");
  auto x = random_feats(9, cfg, rng);
  {
    Graph g;
    enc.encode(g, random_feats(16, cfg, rng), true);
  }
  Graph g1 = Graph::inference();
  Graph g2 = Graph::inference();
  auto a = enc.encode(g1, x, false);
  auto b = enc.encode(g2, x, false);
  REQUIRE(a->v.size() == b->v.size());
  for (size_t i = 0; i < a->v.size(); ++i) CHECK(a->v[i] == b->v[i]);
}

TEST_CASE("conv-LSTM: zero weights give zero output") {
  Rng rng(6);
  ParamRegistry reg;
  ConvLstm cl(2, 2, rng, reg, "cl");
  for (auto* d : {&cl.fwd, &cl.bwd}) {
    std::fill(d->k_in->v.begin(), d->k_in->v.end(), 0.0);
    std::fill(d->k_rec->v.begin(), d->k_rec->v.end(), 0.0);
    std::fill(d->bias->v.begin(), d->bias->v.end(), 0.0);
  }
  Graph g;
  auto y = cl.apply(g, Tensor::uniform({4, 5, 2}, -2.0, 2.0, rng));
  for (double v : y->v) CHECK(v == 0.0);
}

TEST_CASE("conv-LSTM: (25, 20, 32) input with 32 filters gives (25, 20, 64)") {
  Rng rng(7);
  ParamRegistry reg;
  ConvLstm cl(32, 32, rng, reg, "cl");
  Graph g;
  auto y = cl.apply(g, Tensor::uniform({25, 20, 32}, -1.0, 1.0, rng));
  CHECK(y->extent(0) == 25);
  CHECK(y->extent(1) == 20);
  CHECK(y->extent(2) == 64);
  CHECK(y->all_finite());
}

TEST_CASE("conv-LSTM: narrow frequency axis is rejected") {
  Rng rng(8);
  ParamRegistry reg;
  ConvLstm cl(2, 2, rng, reg, "cl");
  Graph g;
  CHECK_THROWS_AS(cl.apply(g, Tensor::zeros({4, 2, 2})), DimensionError);
}

TEST_CASE("conv-LSTM: time reversal swaps the directions under mirrored weights") {
  Rng rng(9);
  ParamRegistry reg;
  ConvLstm a(2, 2, rng, reg, "a");
  ConvLstm b(2, 2, rng, reg, "b");
  // Mirror: b's forward direction carries a's backward weights and vice versa.
  b.fwd.k_in->v = a.bwd.k_in->v;
  b.fwd.k_rec->v = a.bwd.k_rec->v;
  b.fwd.bias->v = a.bwd.bias->v;
  b.bwd.k_in->v = a.fwd.k_in->v;
  b.bwd.k_rec->v = a.fwd.k_rec->v;
  b.bwd.bias->v = a.fwd.bias->v;

  const int64_t T = 5, F = 4, C = 2;
  auto x = Tensor::uniform({T, F, C}, -1.0, 1.0, rng);
  auto xr = Tensor::zeros({T, F, C});
  for (int64_t t = 0; t < T; ++t)
    for (int64_t f = 0; f < F; ++f)
      for (int64_t c = 0; c < C; ++c) xr->at(T - 1 - t, f, c) = x->at(t, f, c);

  Graph g;
  auto ya = a.apply(g, x);        // [T, F, 2*filters]
  auto yb = b.apply(g, xr);
  const int64_t half = ya->extent(2) / 2;
  for (int64_t t = 0; t < T; ++t) {
    for (int64_t f = 0; f < F; ++f) {
      for (int64_t d = 0; d < half; ++d) {
        // reversed-time output, directions swapped on the depth axis
        CHECK(ya->at(t, f, d) == doctest::Approx(yb->at(T - 1 - t, f, half + d)).epsilon(1e-12));
        CHECK(ya->at(t, f, half + d) == doctest::Approx(yb->at(T - 1 - t, f, d)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("speech encoder: gradient check on a T=8 toy input") {
  SpeechEncoderConfig cfg;
  cfg.n_mels = 12;
  cfg.in_depth = 3;
  cfg.conv_kernels = 2;
  cfg.conv_lstm_filters = 1;
  cfg.lstm_units = 2;
  cfg.proj_dim = 4;
  cfg.num_lstm_layers = 2;
  Rng rng(10);
  ParamRegistry reg;
  SpeechEncoder enc(cfg, rng, reg, "encoder");
  auto x = random_feats(8, cfg, rng);

  auto f = [&](Graph& g) { return sum(g, enc.encode(g, x, true)); };
  std::vector<TensorPtr> wrt;
  for (const auto& p : reg.params()) wrt.push_back(p.t);
  wrt.push_back(x);
  GradCheckOptions opt;
  opt.max_coords = 120;
  CHECK(grad_check(f, wrt, opt) < 1e-4);
}

TEST_CASE("speech encoder: scaled config shrinks widths but keeps geometry") {
  SpeechEncoderConfig cfg;
  auto s = cfg.scaled(4);
  CHECK(s.conv_kernels == 8);
  CHECK(s.conv_lstm_filters == 8);
  CHECK(s.lstm_units == 64);
  CHECK(s.proj_dim == 128);
  CHECK(s.num_lstm_layers == cfg.num_lstm_layers);
  CHECK(s.n_mels == cfg.n_mels);
  s.validate();
  CHECK_THROWS_AS(cfg.scaled(0), ConfigError);

  SpeechEncoderConfig bad;
  bad.proj_dim = 100;  // must be 2 * lstm_units
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("text encoder: length 7 gives (7, 512) at the default size") {
  TextEncoderConfig cfg;
  Rng rng(11);
  ParamRegistry reg;
  TextEncoder enc(cfg, rng, reg, "text");
  Graph g;
  auto h = enc.encode(g, {4, 9, 17, 3, 22, 30, 5}, false);
  CHECK(h->extent(0) == 7);
  CHECK(h->extent(1) == 512);
  CHECK(h->all_finite());
}

TEST_CASE("text encoder: token order matters and single tokens work") {
  TextEncoderConfig cfg;
  cfg.vocab = 11;
  cfg.embed_dim = 4;
  cfg.bi_units = 3;
  cfg.uni_units = 6;
  cfg.num_uni_layers = 2;
  Rng rng(12);
  ParamRegistry reg;
  TextEncoder enc(cfg, rng, reg, "text");

  Graph g;
  auto ha = enc.encode(g, {1, 2, 3, 4}, false);
  auto hb = enc.encode(g, {1, 3, 2, 4}, false);
  double diff = 0;
  for (size_t i = 0; i < ha->v.size(); ++i) diff = std::max(diff, std::abs(ha->v[i] - hb->v[i]));
  CHECK(diff > 1e-9);

  auto h1 = enc.encode(g, {7}, false);
  CHECK(h1->extent(0) == 1);
  CHECK(h1->extent(1) == 6);

  CHECK_THROWS_AS(enc.encode(g, {}, false), InputError);
  CHECK_THROWS_AS(enc.encode(g, {11}, false), InputError);
  CHECK_THROWS_AS(enc.encode(g, {-1}, false), InputError);

  TextEncoderConfig bad = cfg;
  bad.uni_units = 7;  // must be 2 * bi_units
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
