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

#include "sqt/metrics.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sqt/beam.h"
#include "sqt/error.h"
#include "sqt/vocab.h"

namespace sqt {
namespace {

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

// n-gram counts keyed by the joined tokens; '\x1f' cannot appear in words.
std::map<std::string, int64_t> ngram_counts(const std::vector<std::string>& toks, int n) {
  std::map<std::string, int64_t> out;
  if (static_cast<int>(toks.size()) < n) return out;
  for (size_t i = 0; i + static_cast<size_t>(n) <= toks.size(); ++i) {
    std::string key = toks[i];
    for (int j = 1; j < n; ++j) {
      key += '\x1f';
      key += toks[i + static_cast<size_t>(j)];
    }
    ++out[key];
  }
  return out;
}

}  // namespace

WerResult wer(const std::string& ref, const std::string& hyp) {
  const auto r = words(ref);
  const auto h = words(hyp);
  const size_t nr = r.size();
  const size_t nh = h.size();

  // dist[i][j]: edit distance between r[0..i) and h[0..j).
  std::vector<std::vector<int64_t>> dist(nr + 1, std::vector<int64_t>(nh + 1, 0));
  for (size_t i = 0; i <= nr; ++i) dist[i][0] = static_cast<int64_t>(i);
  for (size_t j = 0; j <= nh; ++j) dist[0][j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= nr; ++i) {
    for (size_t j = 1; j <= nh; ++j) {
      const int64_t sub = dist[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1);
      const int64_t del = dist[i - 1][j] + 1;  // reference word missing from hyp
      const int64_t ins = dist[i][j - 1] + 1;  // extra hyp word
      dist[i][j] = std::min({sub, del, ins});
    }
  }

  // Backtrace, preferring matches/substitutions, then deletions.
  WerResult res;
  res.ref_words = static_cast<int64_t>(nr);
  size_t i = nr;
  size_t j = nh;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && dist[i][j] == dist[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1)) {
      res.substitutions += r[i - 1] != h[j - 1];
      --i;
      --j;
    } else if (i > 0 && dist[i][j] == dist[i - 1][j] + 1) {
      ++res.deletions;
      --i;
    } else {
      ++res.insertions;
      --j;
    }
  }

  if (nr == 0) {
    res.degenerate = nh > 0;
    res.rate = static_cast<double>(res.edits());  // insertions over a unit floor
  } else {
    res.rate = static_cast<double>(res.edits()) / static_cast<double>(nr);
  }
  return res;
}

BleuResult corpus_bleu(const std::vector<EvalPair>& pairs, int max_n) {
  if (pairs.empty()) throw InputError("corpus_bleu: no pairs");
  if (max_n < 1) throw ConfigError("corpus_bleu: max_n must be >= 1");
  for (const auto& p : pairs) {
    if (p.references.empty()) throw InputError("corpus_bleu: pair " + p.id + " has no references");
  }

  std::vector<int64_t> matched(static_cast<size_t>(max_n), 0);
  std::vector<int64_t> total(static_cast<size_t>(max_n), 0);
  int64_t hyp_len = 0;
  int64_t ref_len = 0;

  for (const auto& p : pairs) {
    const auto hyp = words(normalize_text(p.hypothesis));
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : p.references) refs.push_back(words(normalize_text(r)));

    hyp_len += static_cast<int64_t>(hyp.size());
    // Closest reference length; ties resolve toward the shorter reference.
    int64_t closest = static_cast<int64_t>(refs[0].size());
    for (const auto& r : refs) {
      const int64_t len = static_cast<int64_t>(r.size());
      const int64_t d_new = std::abs(len - static_cast<int64_t>(hyp.size()));
      const int64_t d_old = std::abs(closest - static_cast<int64_t>(hyp.size()));
      if (d_new < d_old || (d_new == d_old && len < closest)) closest = len;
    }
    ref_len += closest;

    for (int n = 1; n <= max_n; ++n) {
      const auto hyp_counts = ngram_counts(hyp, n);
      std::map<std::string, int64_t> clip;
      for (const auto& r : refs) {
        for (const auto& [gram, c] : ngram_counts(r, n)) {
          auto& best = clip[gram];
          best = std::max(best, c);
        }
      }
      for (const auto& [gram, c] : hyp_counts) {
        const auto it = clip.find(gram);
        matched[static_cast<size_t>(n - 1)] += std::min(c, it == clip.end() ? 0 : it->second);
      }
      const int64_t slots = static_cast<int64_t>(hyp.size()) - n + 1;
      total[static_cast<size_t>(n - 1)] += std::max<int64_t>(0, slots);
    }
  }

  BleuResult res;
  res.hyp_len = hyp_len;
  res.ref_len = ref_len;
  res.precisions.resize(static_cast<size_t>(max_n), 0.0);
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < max_n; ++n) {
    const auto i = static_cast<size_t>(n);
    res.precisions[i] =
        total[i] > 0 ? static_cast<double>(matched[i]) / static_cast<double>(total[i]) : 0.0;
    if (res.precisions[i] <= 0.0) {
      zero = true;
    } else {
      log_sum += std::log(res.precisions[i]);
    }
  }
  res.brevity_penalty =
      hyp_len < ref_len && hyp_len > 0
          ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
          : (hyp_len == 0 ? 0.0 : 1.0);
  res.bleu = zero ? 0.0 : 100.0 * res.brevity_penalty * std::exp(log_sum / max_n);
  return res;
}

namespace {

std::map<std::string, std::string> read_reference_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open reference file " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected id<TAB>text");
    }
    const auto id = line.substr(0, tab);
    if (!out.emplace(id, line.substr(tab + 1)).second) {
      throw InputError(path + ":" + std::to_string(lineno) + ": duplicate id " + id);
    }
  }
  return out;
}

}  // namespace

std::string EvalReport::text() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "task\t" << task << '\n';
  os << "segments\t" << segments << '\n';
  if (task == "asr") {
    os << "WER\t" << score << '\n';
    os << "substitutions\t" << wer_totals.substitutions << '\n';
    os << "insertions\t" << wer_totals.insertions << '\n';
    os << "deletions\t" << wer_totals.deletions << '\n';
    os << "ref_words\t" << wer_totals.ref_words << '\n';
  } else {
    os << "BLEU\t" << score << '\n';
    os.precision(4);
    for (size_t n = 0; n < bleu.precisions.size(); ++n) {
      os << 'p' << (n + 1) << '\t' << bleu.precisions[n] << '\n';
    }
    os << "BP\t" << bleu.brevity_penalty << '\n';
    os << "hyp_len\t" << bleu.hyp_len << '\n';
    os << "ref_len\t" << bleu.ref_len << '\n';
    os.precision(2);
  }
  for (const auto& [id, s] : per_utterance) os << "utt\t" << id << '\t' << s << '\n';
  return os.str();
}

EvalReport evaluate_run(const std::string& nbest_path,
                        const std::vector<std::string>& reference_paths, const std::string& task) {
  if (task != "asr" && task != "st") throw ConfigError("evaluate_run: task must be asr or st");
  if (reference_paths.empty()) throw InputError("evaluate_run: no reference files");

  // Best-ranked hypothesis per utterance.
  std::ifstream is(nbest_path);
  if (!is) throw InputError("cannot open n-best file " + nbest_path);
  std::map<std::string, NbestEntry> best;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto e = parse_nbest_line(line);
    auto it = best.find(e.id);
    if (it == best.end() || e.rank < it->second.rank) best[e.id] = std::move(e);
  }
  if (best.empty()) throw InputError("n-best file is empty: " + nbest_path);

  std::vector<std::map<std::string, std::string>> refs;
  for (const auto& p : reference_paths) refs.push_back(read_reference_file(p));

  // Ids must agree between the hypothesis side and the primary reference.
  std::vector<std::string> missing;
  for (const auto& [id, text] : refs[0]) {
    (void)text;
    if (!best.count(id)) missing.push_back("hypothesis missing " + id);
  }
  for (const auto& [id, e] : best) {
    (void)e;
    if (!refs[0].count(id)) missing.push_back("reference missing " + id);
  }
  if (!missing.empty()) {
    std::string msg = "evaluate_run: id mismatch:";
    for (const auto& m : missing) msg += " " + m + ";";
    throw InputError(msg);
  }

  EvalReport report;
  report.task = task;
  report.segments = static_cast<int64_t>(best.size());

  if (task == "asr") {
    for (const auto& [id, e] : best) {
      const auto w = wer(normalize_text(refs[0].at(id)), normalize_text(e.text));
      report.per_utterance.emplace_back(id, 100.0 * w.rate);
      report.wer_totals.substitutions += w.substitutions;
      report.wer_totals.insertions += w.insertions;
      report.wer_totals.deletions += w.deletions;
      report.wer_totals.ref_words += w.ref_words;
    }
    report.wer_totals.rate =
        report.wer_totals.ref_words > 0
            ? static_cast<double>(report.wer_totals.edits()) /
                  static_cast<double>(report.wer_totals.ref_words)
            : static_cast<double>(report.wer_totals.edits());
    report.score = 100.0 * report.wer_totals.rate;
  } else {
    std::vector<EvalPair> pairs;
    for (const auto& [id, e] : best) {
      EvalPair p;
      p.id = id;
      p.hypothesis = e.text;
      for (const auto& r : refs) {
        const auto it = r.find(id);
        if (it != r.end()) p.references.push_back(it->second);
      }
      pairs.push_back(std::move(p));
    }
    report.bleu = corpus_bleu(pairs);
    report.score = report.bleu.bleu;
    for (const auto& p : pairs) {
      report.per_utterance.emplace_back(p.id, corpus_bleu({p}).bleu);
    }
  }
  return report;
}

}  // namespace sqt
