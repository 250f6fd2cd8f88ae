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

#include "sqt/beam.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sqt/error.h"
#include "sqt/vocab.h"

namespace sqt {
namespace {

std::vector<double> log_probs(const Tensor& logits) {
  double mx = logits.v[0];
  for (double x : logits.v) mx = std::max(mx, x);
  double sum = 0.0;
  for (double x : logits.v) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.v.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = logits.v[i] - lse;
  return out;
}

// Token indices ordered by descending log-probability; ties break toward the
// smaller index so the search is deterministic.
std::vector<int> rank_tokens(const std::vector<double>& logp) {
  std::vector<int> order(logp.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (logp[static_cast<size_t>(a)] != logp[static_cast<size_t>(b)]) {
      return logp[static_cast<size_t>(a)] > logp[static_cast<size_t>(b)];
    }
    return a < b;
  });
  return order;
}

// One live hypothesis plus the decoder state that produces its next logits.
struct Beam {
  std::vector<int> tokens;
  double logprob = 0.0;
  std::vector<std::vector<double>> attention;
  DecoderState st;
  int feed = 0;  // token fed to the next step
};

void keep_best(std::vector<Hypothesis>& pool, size_t n) {
  std::sort(pool.begin(), pool.end(),
            [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
  if (pool.size() > n) pool.resize(n);
}

Hypothesis force_finish(const Beam& b, double alpha) {
  Hypothesis hyp;
  hyp.tokens = b.tokens;
  hyp.logprob = b.logprob;
  hyp.attention = b.attention;
  hyp.finished = false;
  hyp.forced = true;
  hyp.score = gnmt_score(b.logprob, std::max<int64_t>(1, static_cast<int64_t>(b.tokens.size())),
                         alpha);
  return hyp;
}

}  // namespace

void DecodeConfig::validate() const {
  if (beam_width < 1) throw ConfigError("decode: beam_width must be >= 1");
  if (rank_prune < 1) throw ConfigError("decode: rank_prune must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) throw ConfigError("decode: alpha must be in [0, 1]");
  if (eos_margin && *eos_margin < 0.0) throw ConfigError("decode: eos_margin must be >= 0");
  if (max_len < 0) throw ConfigError("decode: max_len must be >= 0");
}

int64_t DecodeConfig::max_len_for(int64_t enc_len) const {
  if (max_len > 0) return max_len;
  return std::max<int64_t>(20, static_cast<int64_t>(std::ceil(2.5 * static_cast<double>(enc_len))));
}

DecodeConfig DecodeConfig::asr_defaults() {
  DecodeConfig cfg;
  cfg.alpha = 0.0;
  cfg.eos_margin = 3.0;
  return cfg;
}

DecodeConfig DecodeConfig::st_defaults() {
  DecodeConfig cfg;
  cfg.alpha = 0.6;
  cfg.eos_margin.reset();
  return cfg;
}

std::vector<int> Hypothesis::body(int eos_id) const {
  if (!tokens.empty() && tokens.back() == eos_id) {
    return std::vector<int>(tokens.begin(), tokens.end() - 1);
  }
  return tokens;
}

double gnmt_score(double logprob, int64_t length, double alpha) {
  if (length < 1) throw UsageError("gnmt_score: length must be >= 1");
  if (alpha == 0.0) return logprob;
  const double lp = std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
  return logprob / lp;
}

bool eos_allowed(const Tensor& logits, int eos_id, double margin) {
  if (eos_id < 0 || eos_id >= logits.numel()) throw UsageError("eos_allowed: eos id out of range");
  double best_other = -std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < logits.numel(); ++i) {
    if (i != eos_id) best_other = std::max(best_other, logits.at(i));
  }
  return logits.at(eos_id) >= best_other + margin;
}

std::vector<Hypothesis> beam_decode(const AttentionDecoder& dec, const TensorPtr& h,
                                    const Vocabulary& vocab, const DecodeConfig& cfg) {
  cfg.validate();
  Graph g = Graph::inference();
  const auto keys = dec.attention_keys(g, h);
  const int64_t max_len = cfg.max_len_for(h->extent(0));
  const int vocab_size = static_cast<int>(dec.config().vocab);
  const int eos = vocab.eos();
  const int expand = std::min(cfg.rank_prune, vocab_size);
  const size_t width = static_cast<size_t>(cfg.beam_width);

  std::vector<Beam> live(1);
  live[0].st = dec.initial_state();
  live[0].feed = vocab.sos();
  std::vector<Hypothesis> finished;

  for (int64_t step = 0; step < max_len && !live.empty(); ++step) {
    // Advance every live hypothesis once; all of its token expansions share
    // the advanced state.
    struct Stepped {
      DecoderState st;
      std::vector<double> logp;
      std::vector<double> alpha_row;
      TensorPtr logits;
    };
    std::vector<Stepped> stepped(live.size());
    struct Candidate {
      size_t parent;
      int token;
      double logprob;
    };
    std::vector<Candidate> next;
    for (size_t b = 0; b < live.size(); ++b) {
      stepped[b].st = live[b].st;
      auto r = dec.step(g, h, keys, live[b].feed, stepped[b].st);
      stepped[b].logits = r.logits;
      stepped[b].logp = log_probs(*r.logits);
      stepped[b].alpha_row = r.alpha->v;
      const auto order = rank_tokens(stepped[b].logp);
      for (int rank = 0; rank < expand; ++rank) {
        const int t = order[static_cast<size_t>(rank)];
        const double total = live[b].logprob + stepped[b].logp[static_cast<size_t>(t)];
        if (t == eos) {
          if (!cfg.eos_margin || eos_allowed(*r.logits, eos, *cfg.eos_margin)) {
            Hypothesis hyp;
            hyp.tokens = live[b].tokens;
            hyp.tokens.push_back(eos);
            hyp.logprob = total;
            hyp.attention = live[b].attention;
            hyp.attention.push_back(stepped[b].alpha_row);
            hyp.finished = true;
            hyp.score = gnmt_score(total, static_cast<int64_t>(hyp.tokens.size()), cfg.alpha);
            finished.push_back(std::move(hyp));
          }
          continue;  // a gated-off EOS slot is dropped, not re-filled
        }
        next.push_back({b, t, total});
      }
    }
    keep_best(finished, width);

    std::sort(next.begin(), next.end(), [](const Candidate& a, const Candidate& b) {
      if (a.logprob != b.logprob) return a.logprob > b.logprob;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });
    if (next.size() > width) next.resize(width);

    if (next.empty()) {
      // Every expansion either finished or was gated off.  If nothing ever
      // finished, surface the current beams rather than returning nothing.
      if (finished.empty()) {
        for (const auto& b : live) finished.push_back(force_finish(b, cfg.alpha));
        keep_best(finished, width);
      }
      live.clear();
      break;
    }

    std::vector<Beam> fresh;
    fresh.reserve(next.size());
    for (const auto& c : next) {
      Beam nb;
      nb.tokens = live[c.parent].tokens;
      nb.tokens.push_back(c.token);
      nb.logprob = c.logprob;
      nb.attention = live[c.parent].attention;
      nb.attention.push_back(stepped[c.parent].alpha_row);
      nb.st = stepped[c.parent].st;
      nb.feed = c.token;
      fresh.push_back(std::move(nb));
    }
    live = std::move(fresh);

    // Even finishing instantly at the most favorable length, the best live
    // hypothesis cannot beat the worst kept finished one: stop.
    if (finished.size() >= width) {
      const double bound = gnmt_score(live[0].logprob, max_len, cfg.alpha);
      if (bound <= finished.back().score) break;
    }
  }

  for (const auto& b : live) finished.push_back(force_finish(b, cfg.alpha));
  keep_best(finished, width);
  if (finished.empty()) throw StateError("beam_decode: empty result");  // unreachable by design
  return finished;
}

Hypothesis greedy_decode(const AttentionDecoder& dec, const TensorPtr& h,
                         const Vocabulary& vocab, int64_t max_len) {
  Graph g = Graph::inference();
  const auto keys = dec.attention_keys(g, h);
  const int64_t cap = max_len > 0 ? max_len : DecodeConfig{}.max_len_for(h->extent(0));

  Hypothesis hyp;
  DecoderState st = dec.initial_state();
  int feed = vocab.sos();
  for (int64_t k = 0; k < cap; ++k) {
    auto r = dec.step(g, h, keys, feed, st);
    const auto logp = log_probs(*r.logits);
    const auto order = rank_tokens(logp);
    const int t = order[0];
    hyp.tokens.push_back(t);
    hyp.logprob += logp[static_cast<size_t>(t)];
    hyp.attention.push_back(r.alpha->v);
    if (t == vocab.eos()) {
      hyp.finished = true;
      break;
    }
    feed = t;
  }
  hyp.forced = !hyp.finished;
  hyp.score = gnmt_score(hyp.logprob, std::max<int64_t>(1, static_cast<int64_t>(hyp.tokens.size())),
                         0.0);
  return hyp;
}

std::vector<Hypothesis> beam_decode_speech(MultiTaskModel& model, const std::string& task,
                                           const TensorPtr& feats, const Vocabulary& vocab,
                                           const DecodeConfig& cfg) {
  Graph g = Graph::inference();
  auto h = model.encode(g, feats, task, /*train=*/false);
  return beam_decode(model.decoder(task), h, vocab, cfg);
}

std::vector<Hypothesis> beam_decode_text(NmtModel& model, const std::vector<int>& source,
                                         const Vocabulary& vocab, const DecodeConfig& cfg) {
  Graph g = Graph::inference();
  auto h = model.encode(g, source, /*train=*/false);
  return beam_decode(model.decoder(), h, vocab, cfg);
}

CascadeResult decode_cascade(MultiTaskModel& asr_model, const std::string& asr_task,
                             NmtModel& nmt_model, const TensorPtr& feats,
                             const Vocabulary& vocab, const DecodeConfig& asr_cfg,
                             const DecodeConfig& st_cfg) {
  CascadeResult out;
  const auto t0 = std::chrono::steady_clock::now();
  out.asr = beam_decode_speech(asr_model, asr_task, feats, vocab, asr_cfg)[0];
  const auto t1 = std::chrono::steady_clock::now();
  out.asr_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  const auto body = out.asr.body(vocab.eos());
  out.transcript = normalize_text(vocab.decode(body));
  const auto source = vocab.encode(out.transcript);
  if (source.empty()) {
    out.empty_transcript = true;
    return out;
  }
  out.translation = beam_decode_text(nmt_model, source, vocab, st_cfg)[0];
  out.nmt_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t1).count();
  return out;
}

std::string nbest_line(const std::string& id, int rank, const Hypothesis& hyp,
                       const Vocabulary& vocab) {
  std::ostringstream os;
  os.precision(10);
  os << id << '\t' << rank << '\t' << hyp.score << '\t' << hyp.logprob << '\t'
     << vocab.decode(hyp.body(vocab.eos()));
  return os.str();
}

NbestEntry parse_nbest_line(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  for (int i = 0; i < 4; ++i) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string::npos) throw InputError("malformed n-best line: " + line);
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  fields.push_back(line.substr(start));
  NbestEntry e;
  e.id = fields[0];
  e.rank = std::stoi(fields[1]);
  e.score = std::stod(fields[2]);
  e.logprob = std::stod(fields[3]);
  e.text = fields[4];
  return e;
}

}  // namespace sqt
