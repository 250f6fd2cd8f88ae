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

#ifndef SQT_METRICS_H_
#define SQT_METRICS_H_

#include <cstdint>
#include <string>
#include <vector>

namespace sqt {

// Word error rate over whitespace tokens: unit-cost Levenshtein alignment,
// divided by the reference length.
struct WerResult {
  double rate = 0.0;
  int64_t substitutions = 0;
  int64_t insertions = 0;
  int64_t deletions = 0;
  int64_t ref_words = 0;
  bool degenerate = false;  // empty reference with a non-empty hypothesis

  int64_t edits() const { return substitutions + insertions + deletions; }
};
WerResult wer(const std::string& ref, const std::string& hyp);

// One scored utterance: a hypothesis against one or more references.
// Strings are expected pre-normalized; scoring normalizes again, which is
// idempotent.
struct EvalPair {
  std::string id;
  std::string hypothesis;
  std::vector<std::string> references;
};

// Corpus BLEU in the Moses multi-bleu convention: corpus-level modified
// n-gram precision with per-segment multi-reference clipping, closest
// reference length for the brevity penalty (ties toward the shorter), a
// geometric mean over n = 1..max_n, and no smoothing (any zero precision
// zeroes the score).
struct BleuResult {
  double bleu = 0.0;  // 0..100
  std::vector<double> precisions;
  double brevity_penalty = 1.0;
  int64_t hyp_len = 0;
  int64_t ref_len = 0;
};
BleuResult corpus_bleu(const std::vector<EvalPair>& pairs, int max_n = 4);

// Scores a decoded run against reference files.  The n-best file contributes
// its best-ranked line per utterance; each reference file holds one
// "id<TAB>text" line per utterance, and several files stack up as multiple
// references.  task is "asr" (corpus WER over the first reference) or "st"
// (corpus BLEU over all references).  An id present on one side only is an
// InputError listing the ids.
struct EvalReport {
  std::string task;
  double score = 0.0;  // WER or BLEU, both on the 0..100 scale
  int64_t segments = 0;
  WerResult wer_totals;              // aggregated counts (asr)
  BleuResult bleu;                   // corpus result (st)
  std::vector<std::pair<std::string, double>> per_utterance;

  // Stable tab-separated rendering, one "key<TAB>value" line per field plus
  // one "utt<TAB>id<TAB>score" line per utterance.
  std::string text() const;
};
EvalReport evaluate_run(const std::string& nbest_path,
                        const std::vector<std::string>& reference_paths, const std::string& task);

}  // namespace sqt

#endif  // SQT_METRICS_H_
