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

#include "sqt/decoder.h"

#include <fstream>

#include "sqt/error.h"
#include "sqt/vocab.h"

namespace sqt {

void DecoderConfig::validate() const {
  if (depth < 1) throw ConfigError("decoder depth must be >= 1");
  if (lstm_units < 1 || embed_dim < 1 || attn_hidden < 1 || vocab < 2 || enc_dim < 1) {
    throw ConfigError("decoder dimensions must be positive");
  }
}

void write_alignment(const std::string& path, const AlignmentMatrix& am,
                     const std::vector<std::string>& row_labels) {
  const int64_t K = am.alpha->extent(0), L = am.alpha->extent(1);
  if (static_cast<int64_t>(row_labels.size()) != K) {
    throw DimensionError("alignment has " + std::to_string(K) + " rows but " +
                         std::to_string(row_labels.size()) + " labels");
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot open " + path + " for writing");
  os << "# utterance\t" << am.utterance_id << "\tdecoder\t" << am.decoder_name << "\n";
  os << "token";
  for (int64_t l = 0; l < L; ++l) os << '\t' << l;
  os << '\n';
  os.precision(8);
  for (int64_t k = 0; k < K; ++k) {
    os << row_labels[static_cast<size_t>(k)];
    for (int64_t l = 0; l < L; ++l) os << '\t' << am.alpha->at(k, l);
    os << '\n';
  }
  if (!os) throw InputError("short write to " + path);
}

AttentionDecoder::AttentionDecoder(const DecoderConfig& cfg, Rng& rng, ParamRegistry& reg,
                                   const std::string& prefix)
    : cfg_(cfg) {
  cfg_.validate();
  embedding_ = reg.add(prefix + ".embedding",
                       Tensor::uniform({cfg.vocab, cfg.embed_dim}, -0.1, 0.1, rng),
                       /*decay=*/true, /*noise=*/true);  // decoder embeddings get weight noise
  int64_t in_dim = cfg.embed_dim + cfg.enc_dim;  // layer 1: [embedding; c_{k-1}]
  for (int64_t i = 0; i < cfg.depth; ++i) {
    layers_.emplace_back(in_dim, cfg.lstm_units, rng, reg,
                         prefix + ".lstm" + std::to_string(i + 1));
    in_dim = cfg.lstm_units + cfg.enc_dim;  // layers 2..D: [o^{n-1}; c_k]
  }
  ae_hidden_ = Dense(cfg.enc_dim, cfg.attn_hidden, rng, reg, prefix + ".ae.hidden");
  ae_out_ = Dense(cfg.attn_hidden, cfg.attn_hidden, rng, reg, prefix + ".ae.out");
  ad_hidden_ = Dense(cfg.lstm_units, cfg.attn_hidden, rng, reg, prefix + ".ad.hidden");
  ad_out_ = Dense(cfg.attn_hidden, cfg.attn_hidden, rng, reg, prefix + ".ad.out");
  out_ = Dense(cfg.lstm_units + cfg.enc_dim, cfg.vocab, rng, reg, prefix + ".output");
}

DecoderState AttentionDecoder::initial_state() const {
  DecoderState st;
  for (int64_t i = 0; i < cfg_.depth; ++i) {
    st.h.push_back(Tensor::zeros({cfg_.lstm_units}));
    st.c.push_back(Tensor::zeros({cfg_.lstm_units}));
  }
  st.context = Tensor::zeros({cfg_.enc_dim});
  st.k = 0;
  return st;
}

TensorPtr AttentionDecoder::attention_keys(Graph& g, const TensorPtr& h) const {
  if (h->rank() != 2 || h->extent(1) != cfg_.enc_dim) {
    throw DimensionError("encoder states " + shape_str(h->shape()) + " do not match decoder enc_dim " +
                         std::to_string(cfg_.enc_dim));
  }
  return ae_out_.apply_rows(g, tanh_op(g, ae_hidden_.apply_rows(g, h)));  // [L, attn]
}

AttentionDecoder::Attended AttentionDecoder::attend(Graph& g, const TensorPtr& h,
                                                    const TensorPtr& keys,
                                                    const TensorPtr& o1) const {
  auto query = ad_out_.apply_vec(g, tanh_op(g, ad_hidden_.apply_vec(g, o1)));  // [attn]
  auto scores = matvec(g, keys, query);                                        // [L]
  auto alpha = softmax_vec(g, scores);
  auto context = vecmat(g, alpha, h);  // [enc_dim]
  return {context, alpha};
}

AttentionDecoder::StepResult AttentionDecoder::step(Graph& g, const TensorPtr& h,
                                                    const TensorPtr& keys, int y_prev,
                                                    DecoderState& st) const {
  if (static_cast<int64_t>(st.h.size()) != cfg_.depth) {
    throw DimensionError("decoder state has " + std::to_string(st.h.size()) + " layers, want " +
                         std::to_string(cfg_.depth));
  }
  if (y_prev < 0 || y_prev >= cfg_.vocab) {
    throw InputError("previous token " + std::to_string(y_prev) + " outside vocabulary");
  }
  // Layer 1 sees the previous step's context c_{k-1}.
  auto x1 = concat_vec(g, take0(g, embedding_, y_prev), st.context);
  auto s1 = layers_[0].step(g, x1, st.h[0], st.c[0]);
  st.h[0] = s1.h;
  st.c[0] = s1.c;

  // Attention from layer 1's output gives this step's context c_k, which is
  // skip-connected into every later layer.
  auto att = attend(g, h, keys, s1.h);
  auto prev_out = s1.h;
  for (int64_t n = 1; n < cfg_.depth; ++n) {
    auto xn = concat_vec(g, prev_out, att.context);
    auto sn = layers_[n].step(g, xn, st.h[n], st.c[n]);
    st.h[n] = sn.h;
    st.c[n] = sn.c;
    prev_out = sn.h;
  }

  auto logits = out_.apply_vec(g, concat_vec(g, prev_out, att.context));
  st.context = att.context;
  st.k += 1;
  return {logits, att.alpha};
}

AttentionDecoder::LossResult AttentionDecoder::teacher_forced_loss(
    Graph& g, const TensorPtr& h, const std::vector<int>& target, const Vocabulary& vocab) const {
  if (target.empty()) throw InputError("teacher forcing requires a non-empty target");
  for (int tok : target) {
    if (tok < 0 || tok >= cfg_.vocab) {
      throw InputError("target token " + std::to_string(tok) + " outside vocabulary");
    }
    if (tok == vocab.sos() || tok == vocab.eos()) {
      throw InputError("target body must not contain <sos>/<eos>");
    }
  }
  auto keys = attention_keys(g, h);
  DecoderState st = initial_state();

  const int64_t K = static_cast<int64_t>(target.size()) + 1;  // + EOS step
  std::vector<TensorPtr> step_losses;
  std::vector<TensorPtr> alpha_rows;
  std::vector<double> logprobs;
  int y_prev = vocab.sos();
  for (int64_t k = 0; k < K; ++k) {
    const int want = k < K - 1 ? target[static_cast<size_t>(k)] : vocab.eos();
    auto res = step(g, h, keys, y_prev, st);
    step_losses.push_back(cross_entropy(g, res.logits, want));
    logprobs.push_back(-step_losses.back()->item());
    alpha_rows.push_back(res.alpha);
    y_prev = want;  // ground truth feeds the next step
  }
  LossResult out;
  out.loss = mean_of(g, step_losses);
  out.step_logprobs = std::move(logprobs);
  out.alignment.alpha = stack0(g, alpha_rows);
  return out;
}

}  // namespace sqt
