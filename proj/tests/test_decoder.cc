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
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "sqt/error.h"
#include "sqt/model.h"
#include "sqt/vocab.h"

using namespace sqt;

namespace {

DecoderConfig toy_dec(int64_t depth = 2, int64_t enc_dim = 6) {
  DecoderConfig c;
  c.depth = depth;
  c.lstm_units = 5;
  c.embed_dim = 4;
  c.attn_hidden = 3;
  c.vocab = 6;
  c.enc_dim = enc_dim;
  return c;
}

}  // namespace

TEST_CASE("attend: single encoder frame gets all the attention") {
  Rng rng(1);
  ParamRegistry reg;
  AttentionDecoder dec(toy_dec(), rng, reg, "dec");
  Graph g;
  auto h = Tensor::uniform({1, 6}, -1.0, 1.0, rng);
  auto keys = dec.attention_keys(g, h);
  auto o1 = Tensor::uniform({5}, -1.0, 1.0, rng);
  auto att = dec.attend(g, h, keys, o1);
  CHECK(att.alpha->v.size() == 1);
  CHECK(att.alpha->v[0] == doctest::Approx(1.0).epsilon(1e-15));
  for (int64_t d = 0; d < 6; ++d) CHECK(att.context->v[d] == doctest::Approx(h->at(0, d)));
}

TEST_CASE("attend: zeroed query network gives uniform attention") {
  Rng rng(2);
  ParamRegistry reg;
  AttentionDecoder dec(toy_dec(), rng, reg, "dec");
  // Zero the a_d output layer so every score is key . 0 = 0.
  for (const auto& p : reg.params()) {
    if (p.name.find(".ad.out") != std::string::npos) {
      std::fill(p.t->v.begin(), p.t->v.end(), 0.0);
    }
  }
  Graph g;
  const int64_t L = 7;
  auto h = Tensor::uniform({L, 6}, -1.0, 1.0, rng);
  auto att = dec.attend(g, h, dec.attention_keys(g, h), Tensor::uniform({5}, -1.0, 1.0, rng));
  for (int64_t l = 0; l < L; ++l) {
    CHECK(att.alpha->v[static_cast<size_t>(l)] == doctest::Approx(1.0 / L).epsilon(1e-12));
  }
}

TEST_CASE("attend: context stays inside the convex hull of the encoder states") {
  Rng rng(3);
  ParamRegistry reg;
  AttentionDecoder dec(toy_dec(), rng, reg, "dec");
  for (int rep = 0; rep < 20; ++rep) {
    Graph g;
    const int64_t L = 1 + static_cast<int64_t>(rng.below(9));
    auto h = Tensor::uniform({L, 6}, -2.0, 2.0, rng);
    auto att = dec.attend(g, h, dec.attention_keys(g, h), Tensor::uniform({5}, -1.0, 1.0, rng));
    double sum = 0;
    for (double a : att.alpha->v) sum += a;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (int64_t d = 0; d < 6; ++d) {
      double lo = h->at(0, d), hi = h->at(0, d);
      for (int64_t l = 1; l < L; ++l) {
        lo = std::min(lo, h->at(l, d));
        hi = std::max(hi, h->at(l, d));
      }
      CHECK(att.context->v[static_cast<size_t>(d)] >= lo - 1e-12);
      CHECK(att.context->v[static_cast<size_t>(d)] <= hi + 1e-12);
    }
  }
}

TEST_CASE("decode step: logits shape, determinism, softmax normalization") {
  Rng rng(4);
  ParamRegistry reg;
  DecoderConfig cfg;  // full-size: vocab 90, 4 layers
  AttentionDecoder dec(cfg, rng, reg, "dec");
  auto h = Tensor::uniform({5, cfg.enc_dim}, -1.0, 1.0, rng);

  auto run_once = [&]() {
    Graph g = Graph::inference();
    auto keys = dec.attention_keys(g, h);
    DecoderState st = dec.initial_state();
    return dec.step(g, h, keys, /*y_prev=*/0, st);
  };
  auto a = run_once();
  auto b = run_once();
  CHECK(a.logits->rank() == 1);
  CHECK(a.logits->extent(0) == 90);
  for (size_t i = 0; i < a.logits->v.size(); ++i) CHECK(a.logits->v[i] == b.logits->v[i]);

  Graph g;
  auto p = softmax_vec(g, a.logits);
  double sum = 0;
  for (double x : p->v) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("decode step: state advances and context is refreshed") {
  Rng rng(5);
  ParamRegistry reg;
  AttentionDecoder dec(toy_dec(3), rng, reg, "dec");
  Graph g;
  auto h = Tensor::uniform({4, 6}, -1.0, 1.0, rng);
  auto keys = dec.attention_keys(g, h);
  DecoderState st = dec.initial_state();
  CHECK(st.k == 0);
  for (double v : st.context->v) CHECK(v == 0.0);
  auto r1 = dec.step(g, h, keys, 0, st);
  CHECK(st.k == 1);
  double ctx_norm = 0;
  for (double v : st.context->v) ctx_norm += v * v;
  CHECK(ctx_norm > 0.0);
  CHECK(r1.alpha->extent(0) == 4);

  CHECK_THROWS_AS(dec.step(g, h, keys, 6, st), InputError);
  CHECK_THROWS_AS(dec.step(g, h, keys, -1, st), InputError);
  DecoderState wrong = dec.initial_state();
  wrong.h.pop_back();
  wrong.c.pop_back();
  CHECK_THROWS_AS(dec.step(g, h, keys, 0, wrong), DimensionError);
}

TEST_CASE("decode step: depth 1 still feeds [o1; c] to the softmax") {
  Rng rng(6);
  ParamRegistry reg;
  AttentionDecoder dec(toy_dec(1), rng, reg, "dec");
  Graph g;
  auto h = Tensor::uniform({3, 6}, -1.0, 1.0, rng);
  auto keys = dec.attention_keys(g, h);
  DecoderState st = dec.initial_state();
  auto r = dec.step(g, h, keys, 2, st);
  CHECK(r.logits->extent(0) == 6);
  CHECK(r.logits->all_finite());
}

TEST_CASE("teacher forcing: zeroed output layer scores ln(vocab) per step") {
  Rng rng(7);
  ParamRegistry reg;
  DecoderConfig cfg;  // vocab 90
  cfg.depth = 2;
  cfg.lstm_units = 8;
  cfg.embed_dim = 4;
  cfg.attn_hidden = 4;
  cfg.enc_dim = 10;
  AttentionDecoder dec(cfg, rng, reg, "dec");
  for (const auto& p : reg.params()) {
    if (p.name.find(".output") != std::string::npos) {
      std::fill(p.t->v.begin(), p.t->v.end(), 0.0);
    }
  }
  Vocabulary vocab = Vocabulary::builtin();
  Graph g;
  auto h = Tensor::uniform({6, 10}, -1.0, 1.0, rng);
  auto res = dec.teacher_forced_loss(g, h, vocab.encode("hola"), vocab);
  CHECK(res.loss->item() == doctest::Approx(std::log(90.0)).epsilon(1e-12));
  CHECK(res.loss->item() >= 0.0);
}

TEST_CASE("teacher forcing: loss matches the stored per-step log-probs") {
  Rng rng(8);
  ParamRegistry reg;
  AttentionDecoder dec(toy_dec(), rng, reg, "dec");
  Vocabulary vocab = Vocabulary::builtin();
  Graph g;
  auto h = Tensor::uniform({5, 6}, -1.0, 1.0, rng);
  std::vector<int> target = {4, 5, 4};  // body tokens for the 6-token decoder
  auto res = dec.teacher_forced_loss(g, h, target, vocab);

  REQUIRE(res.step_logprobs.size() == target.size() + 1);  // + EOS
  double mean_nll = 0;
  for (double lp : res.step_logprobs) {
    CHECK(lp <= 0.0);
    mean_nll -= lp;
  }
  mean_nll /= static_cast<double>(res.step_logprobs.size());
  CHECK(res.loss->item() == doctest::Approx(mean_nll).epsilon(1e-12));

  // Alignment rows are the per-step attention; each sums to 1.
  CHECK(res.alignment.alpha->extent(0) == 4);
  CHECK(res.alignment.alpha->extent(1) == 5);
  for (int64_t k = 0; k < 4; ++k) {
    double s = 0;
    for (int64_t l = 0; l < 5; ++l) s += res.alignment.alpha->at(k, l);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("teacher forcing: SOS/EOS in the body and bad tokens are rejected") {
  Rng rng(9);
  ParamRegistry reg;
  AttentionDecoder dec(toy_dec(), rng, reg, "dec");
  Vocabulary vocab = Vocabulary::builtin();
  Graph g;
  auto h = Tensor::uniform({3, 6}, -1.0, 1.0, rng);
  CHECK_THROWS_AS(dec.teacher_forced_loss(g, h, {}, vocab), InputError);
  CHECK_THROWS_AS(dec.teacher_forced_loss(g, h, {vocab.sos()}, vocab), InputError);
  CHECK_THROWS_AS(dec.teacher_forced_loss(g, h, {4, vocab.eos()}, vocab), InputError);
  CHECK_THROWS_AS(dec.teacher_forced_loss(g, h, {7}, vocab), InputError);  // >= vocab 6
  CHECK_THROWS_AS(dec.attention_keys(g, Tensor::zeros({3, 7})), DimensionError);
}

TEST_CASE("full ST model: gradient check on a T=8, D=2, vocab-6 toy") {
  MultiTaskConfig cfg;
  cfg.encoder.n_mels = 12;
  cfg.encoder.in_depth = 3;
  cfg.encoder.conv_kernels = 2;
  cfg.encoder.conv_lstm_filters = 1;
  cfg.encoder.lstm_units = 3;
  cfg.encoder.proj_dim = 6;
  cfg.encoder.num_lstm_layers = 2;
  cfg.tasks.push_back({"st", toy_dec(2, 6)});
  cfg.shared_lstm_layers = 2;
  MultiTaskModel model(cfg, 0x7001);

  Vocabulary vocab = Vocabulary::builtin();
  Rng rng(10);
  auto x = Tensor::uniform({8, 12, 3}, -1.0, 1.0, rng);
  std::vector<int> target = {4, 5};

  auto f = [&](Graph& g) { return model.task_loss(g, x, target, "st", true, vocab).loss; };

  // A brief descent first: at initialization the attention-path gradients sit
  // near 1e-9, under the finite-difference noise floor, so the check would
  // measure probe noise rather than gradient correctness.
  for (int step = 0; step < 50; ++step) {
    for (const auto& p : model.registry().params()) p.t->zero_grad();
    Graph g;
    auto loss = f(g);
    g.backward(loss);
    for (const auto& p : model.registry().params()) {
      if (!p.t->has_grad()) continue;
      for (size_t i = 0; i < p.t->v.size(); ++i) p.t->v[i] -= 0.3 * p.t->g[i];
    }
  }

  std::vector<TensorPtr> wrt;
  for (const auto& p : model.registry().params()) wrt.push_back(p.t);
  GradCheckOptions opt;
  opt.max_coords = 150;
  opt.eps = 1e-4;  // a deep composition accumulates rounding noise ~ |f|*u/eps
  CHECK(grad_check(f, wrt, opt) < 1e-4);
}

TEST_CASE("multi-task: share-all aliases the whole encoder across tasks") {
  MultiTaskConfig cfg;
  cfg.encoder.n_mels = 12;
  cfg.encoder.conv_kernels = 2;
  cfg.encoder.conv_lstm_filters = 1;
  cfg.encoder.lstm_units = 3;
  cfg.encoder.proj_dim = 6;
  cfg.encoder.num_lstm_layers = 3;
  cfg.shared_lstm_layers = 3;
  cfg.tasks.push_back({"st", toy_dec(2, 6)});
  cfg.tasks.push_back({"asr", toy_dec(2, 6)});
  MultiTaskModel share_all(cfg, 0x7002);

  // Perturbing a parameter through one task's encoder view changes the other
  // task's encoding.
  Rng rng(11);
  auto x = Tensor::uniform({6, 12, 3}, -1.0, 1.0, rng);
  Graph g0;
  auto before = share_all.encode(g0, x, "asr", true);
  for (const auto& p : share_all.registry().params()) {
    if (p.name == "encoder.lstm3.fwd.w_input") {
      for (double& v : p.t->v) v += 0.05;
    }
  }
  Graph g1;
  auto after = share_all.encode(g1, x, "asr", true);
  double diff = 0;
  for (size_t i = 0; i < before->v.size(); ++i)
    diff = std::max(diff, std::abs(before->v[i] - after->v[i]));
  CHECK(diff > 1e-9);

  // share-all registers no per-task encoder parameters at all.
  CHECK(share_all.registry().params_with_prefix("encoder.asr") == 0);

  MultiTaskConfig cfg0 = cfg;
  cfg0.shared_lstm_layers = 0;
  MultiTaskModel share_0(cfg0, 0x7002);
  CHECK(share_0.registry().params_with_prefix("encoder.asr") > 0);

  // Counting oracle: share-all = encoder + 2 x decoder.
  ParamRegistry enc_only, dec_only;
  Rng r1(1), r2(2);
  SpeechEncoder e(cfg.encoder, r1, enc_only, "e");
  AttentionDecoder d(toy_dec(2, 6), r2, dec_only, "d");
  CHECK(share_all.registry().total_params() ==
        enc_only.total_params() + 2 * dec_only.total_params());
  CHECK(share_all.registry().total_params() < share_0.registry().total_params());

  // Disjoint ids above the boundary for share-0: flattened parameter sets of
  // the two per-task LSTM stacks do not intersect.
  std::set<const Tensor*> st_ids, asr_ids;
  for (const auto& p : share_0.registry().params()) {
    if (p.name.rfind("encoder.asr.", 0) == 0) asr_ids.insert(p.t.get());
    if (p.name.rfind("encoder.lstm", 0) == 0) st_ids.insert(p.t.get());
  }
  CHECK(!st_ids.empty());
  CHECK(!asr_ids.empty());
  for (const Tensor* t : asr_ids) CHECK(st_ids.count(t) == 0);
}

TEST_CASE("multi-task: config validation") {
  MultiTaskConfig cfg;
  cfg.encoder.n_mels = 12;
  cfg.encoder.conv_kernels = 2;
  cfg.encoder.conv_lstm_filters = 1;
  cfg.encoder.lstm_units = 3;
  cfg.encoder.proj_dim = 6;
  cfg.encoder.num_lstm_layers = 2;
  cfg.shared_lstm_layers = 2;

  SUBCASE("no tasks") { CHECK_THROWS_AS(MultiTaskModel(cfg, 1), ConfigError); }
  SUBCASE("duplicate names") {
    cfg.tasks.push_back({"st", toy_dec(2, 6)});
    cfg.tasks.push_back({"st", toy_dec(2, 6)});
    CHECK_THROWS_AS(MultiTaskModel(cfg, 1), ConfigError);
  }
  SUBCASE("encoder/decoder width mismatch") {
    cfg.tasks.push_back({"st", toy_dec(2, 8)});
    CHECK_THROWS_AS(MultiTaskModel(cfg, 1), ConfigError);
  }
  SUBCASE("sharing beyond the stack") {
    cfg.tasks.push_back({"st", toy_dec(2, 6)});
    cfg.shared_lstm_layers = 3;
    CHECK_THROWS_AS(MultiTaskModel(cfg, 1), ConfigError);
  }
  SUBCASE("unknown task at use") {
    cfg.tasks.push_back({"st", toy_dec(2, 6)});
    MultiTaskModel m(cfg, 1);
    CHECK(m.has_task("st"));
    CHECK(!m.has_task("asr"));
    CHECK_THROWS_AS(m.decoder("asr"), ConfigError);
  }
}

TEST_CASE("nmt model: loss runs and config is validated") {
  NmtConfig cfg;
  cfg.encoder.vocab = 90;
  cfg.encoder.embed_dim = 4;
  cfg.encoder.bi_units = 3;
  cfg.encoder.uni_units = 6;
  cfg.encoder.num_uni_layers = 2;
  cfg.decoder = toy_dec(2, 6);
  cfg.decoder.vocab = 90;
  NmtModel model(cfg, 0x7003);

  Vocabulary vocab = Vocabulary::builtin();
  Graph g;
  auto res = model.loss(g, vocab.encode("hola"), vocab.encode("hello"), true, vocab);
  CHECK(res.loss->item() > 0.0);
  CHECK(res.alignment.alpha->extent(1) == 4);  // source length

  NmtConfig bad = cfg;
  bad.decoder.enc_dim = 5;
  CHECK_THROWS_AS(NmtModel(bad, 1), ConfigError);
}

TEST_CASE("alignment export: tab-separated matrix with labels") {
  AlignmentMatrix am;
  am.alpha = Tensor::from({2, 3}, {0.5, 0.25, 0.25, 0.1, 0.2, 0.7});
  am.utterance_id = "utt-1";
  am.decoder_name = "st";
  const std::string path = "alignment_test.tsv";
  write_alignment(path, am, {"h", "<eos>"});

  std::ifstream is(path);
  REQUIRE(is.good());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# utterance\tutt-1\tdecoder\tst");
  std::getline(is, line);
  CHECK(line == "token\t0\t1\t2");
  std::getline(is, line);
  CHECK(line.rfind("h\t0.5\t0.25\t0.25", 0) == 0);
  std::getline(is, line);
  CHECK(line.rfind("<eos>\t0.1\t0.2\t0.7", 0) == 0);
  is.close();
  std::remove(path.c_str());

  CHECK_THROWS_AS(write_alignment(path, am, {"only-one"}), DimensionError);
}
