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

#ifndef SQT_BEAM_H_
#define SQT_BEAM_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sqt/model.h"

namespace sqt {

// Beam-search settings.  The EOS margin gate is optional: absent means EOS
// competes like any other token (translation default); present means EOS may
// only be emitted when it beats the best other token by the margin
// (recognition default 3.0).
struct DecodeConfig {
  int beam_width = 3;   // live hypotheses kept per step
  int rank_prune = 8;   // token expansions per live hypothesis per step
  double alpha = 0.0;   // length-normalization exponent
  std::optional<double> eos_margin;
  int64_t max_len = 0;  // 0: max(20, ceil(2.5 * encoder length))

  // beam_width >= 1, rank_prune >= 1, alpha in [0, 1], margin >= 0 when
  // present, max_len >= 0.  rank_prune larger than the vocabulary is allowed
  // and caps at the vocabulary (a no-op prune).  Throws ConfigError.
  void validate() const;

  int64_t max_len_for(int64_t enc_len) const;

  static DecodeConfig asr_defaults();  // margin 3.0, alpha 0
  static DecodeConfig st_defaults();   // no gate, alpha 0.6
};

// One decoded hypothesis.  Tokens include the trailing <eos> when the search
// finished normally; a hypothesis cut off at max_len carries forced = true
// and no <eos>.
struct Hypothesis {
  std::vector<int> tokens;
  double logprob = 0.0;  // sum of chosen-token log-probabilities
  double score = 0.0;    // logprob / lp(len)
  std::vector<std::vector<double>> attention;  // one row per token
  bool finished = false;
  bool forced = false;

  // Tokens without the trailing <eos>.
  std::vector<int> body(int eos_id) const;
};

// Length penalty lp(len) = ((5 + len) / 6)^alpha; score = logprob / lp.
double gnmt_score(double logprob, int64_t length, double alpha);

// EOS gate on raw logits.  Log-probability gaps equal logit gaps (the
// normalizer cancels), so no softmax is needed.
bool eos_allowed(const Tensor& logits, int eos_id, double margin);

// Beam search over a decoder attending to encoder states h [L, enc_dim].
// Per step each of the <= B live hypotheses expands its top-R tokens; EOS
// expansions pass the margin gate into a finished pool pruned to the best B
// by normalized score.  The search stops when even an instantly-finished
// best live hypothesis could not beat the worst kept finished one, or at
// max_len, where surviving live hypotheses are force-finished.  Returns up
// to B hypotheses sorted by normalized score, never empty.
std::vector<Hypothesis> beam_decode(const AttentionDecoder& dec, const TensorPtr& h,
                                    const Vocabulary& vocab, const DecodeConfig& cfg);

// Argmax decoding; emits until <eos> is the argmax or max_len.
Hypothesis greedy_decode(const AttentionDecoder& dec, const TensorPtr& h,
                         const Vocabulary& vocab, int64_t max_len = 0);

// Encode-then-decode conveniences (inference mode).
std::vector<Hypothesis> beam_decode_speech(MultiTaskModel& model, const std::string& task,
                                           const TensorPtr& feats, const Vocabulary& vocab,
                                           const DecodeConfig& cfg);
std::vector<Hypothesis> beam_decode_text(NmtModel& model, const std::vector<int>& source,
                                         const Vocabulary& vocab, const DecodeConfig& cfg);

// Recognition 1-best piped through the text-to-text model.  An empty
// recognized transcript short-circuits to an empty, flagged translation.
struct CascadeResult {
  Hypothesis asr;
  Hypothesis translation;
  std::string transcript;  // normalized intermediate text
  bool empty_transcript = false;
  double asr_ms = 0.0;
  double nmt_ms = 0.0;
};
CascadeResult decode_cascade(MultiTaskModel& asr_model, const std::string& asr_task,
                             NmtModel& nmt_model, const TensorPtr& feats,
                             const Vocabulary& vocab, const DecodeConfig& asr_cfg,
                             const DecodeConfig& st_cfg);

// N-best line: id <TAB> rank <TAB> score <TAB> logprob <TAB> text.
std::string nbest_line(const std::string& id, int rank, const Hypothesis& hyp,
                       const Vocabulary& vocab);
struct NbestEntry {
  std::string id;
  int rank = 0;
  double score = 0.0;
  double logprob = 0.0;
  std::string text;
};
NbestEntry parse_nbest_line(const std::string& line);

}  // namespace sqt

#endif  // SQT_BEAM_H_
