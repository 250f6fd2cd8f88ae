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

#include "sqt/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sqt/error.h"
#include "sqt/rng.h"
#include "sqt/wav.h"

namespace sqt {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string line_tag(const std::string& path, int line) {
  return path + ":" + std::to_string(line) + ": ";
}

ManifestEntry parse_entry(const std::string& path, int line, const std::string& text,
                          const fs::path& base) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(line_tag(path, line) + "malformed manifest line: " + e.what());
  }
  if (!obj.is_object()) throw InputError(line_tag(path, line) + "manifest line is not an object");

  static const std::set<std::string> kKeys = {"id", "audio", "source", "targets", "split"};
  for (const auto& item : obj.items()) {
    if (!kKeys.count(item.key()))
      throw InputError(line_tag(path, line) + "unknown manifest key '" + item.key() + "'");
  }

  auto want_string = [&](const char* key, bool required) -> std::string {
    if (!obj.contains(key)) {
      if (required) throw InputError(line_tag(path, line) + "missing required key '" + key + "'");
      return "";
    }
    if (!obj[key].is_string())
      throw InputError(line_tag(path, line) + "key '" + std::string(key) + "' must be a string");
    return obj[key].get<std::string>();
  };

  ManifestEntry e;
  e.id = want_string("id", true);
  if (e.id.empty()) throw InputError(line_tag(path, line) + "empty utterance id");
  e.source = want_string("source", true);

  if (!obj.contains("targets") || !obj["targets"].is_array())
    throw InputError(line_tag(path, line) + "key 'targets' must be an array of strings");
  for (const auto& t : obj["targets"]) {
    if (!t.is_string())
      throw InputError(line_tag(path, line) + "key 'targets' must be an array of strings");
    e.targets.push_back(t.get<std::string>());
  }
  if (e.targets.empty() || e.targets.size() > 4)
    throw InputError(line_tag(path, line) + "entry needs 1..4 targets, got " +
                     std::to_string(e.targets.size()));

  e.audio = want_string("audio", false);
  if (!e.audio.empty()) {
    fs::path p(e.audio);
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p))
      throw InputError(line_tag(path, line) + "missing audio file '" + p.string() + "'");
    e.audio = p.string();
  }

  auto split = want_string("split", false);
  if (!split.empty()) e.split = split;
  return e;
}

// Deterministic integer in [0, n); the tiny modulo bias is irrelevant for
// shuffling.
int pick(Rng& rng, size_t n) { return static_cast<int>(rng.bits() % n); }

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[pick(rng, i)]);
}

std::string join_words(const std::vector<std::string>& ws) {
  std::string out;
  for (size_t i = 0; i < ws.size(); ++i) {
    if (i) out += ' ';
    out += ws[i];
  }
  return out;
}

// One tone per character, the 26 letters spread uniformly on the mel scale
// across 300..3500 Hz so neighbours stay a filterbank-width apart even with
// few mel channels.
double tone_hz(char c) {
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  double m = mel(300.0) + (c - 'a') * (mel(3500.0) - mel(300.0)) / 25.0;
  return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
}

void append_tone(std::vector<double>& samples, double hz, int n, int rate) {
  const int ramp = rate / 200;  // 5 ms linear attack/release against clicks
  const double w = 2.0 * M_PI * hz / rate;
  for (int i = 0; i < n; ++i) {
    double env = 1.0;
    if (i < ramp) env = static_cast<double>(i) / ramp;
    if (n - 1 - i < ramp) env = std::min(env, static_cast<double>(n - 1 - i) / ramp);
    samples.push_back(0.3 * env * std::sin(w * i));
  }
}

Waveform render_transcript(const std::string& transcript, int rate) {
  const int tone_n = rate * 30 / 1000;  // 30 ms per character
  const int gap_n = rate * 10 / 1000;   // 10 ms between characters
  const int word_n = rate * 40 / 1000;  // 40 ms between words
  const int pad_n = rate * 20 / 1000;   // 20 ms of leading/trailing silence

  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(pad_n, 0.0);
  for (size_t i = 0; i < transcript.size(); ++i) {
    char c = transcript[i];
    if (c == ' ') {
      w.samples.insert(w.samples.end(), word_n, 0.0);
    } else {
      append_tone(w.samples, tone_hz(c), tone_n, rate);
      bool last = i + 1 == transcript.size() || transcript[i + 1] == ' ';
      if (!last) w.samples.insert(w.samples.end(), gap_n, 0.0);
    }
  }
  w.samples.insert(w.samples.end(), pad_n, 0.0);
  return w;
}

std::string slurp_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string("cannot open ") + what + ": " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest: " + path);
  fs::path base = fs::path(path).parent_path();

  CorpusManifest m;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestEntry e = parse_entry(path, lineno, line, base);
    if (!seen.insert(e.id).second)
      throw InputError(line_tag(path, lineno) + "duplicate id '" + e.id + "'");
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const CorpusManifest& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write manifest: " + path);
  for (const auto& e : m.entries) {
    json obj;
    obj["id"] = e.id;
    if (!e.audio.empty()) obj["audio"] = e.audio;
    obj["source"] = e.source;
    obj["targets"] = e.targets;
    obj["split"] = e.split;
    out << obj.dump() << '\n';
  }
  if (!out) throw InputError("short write on manifest: " + path);
}

void ToySpec::validate() const {
  if (words.empty()) throw ConfigError("toy corpus needs a non-empty word list");
  std::set<std::string> uniq;
  for (const auto& w : words) {
    if (w.empty()) throw ConfigError("toy corpus word list contains an empty word");
    for (char c : w)
      if (c < 'a' || c > 'z')
        throw ConfigError("toy corpus words must be lowercase a-z, got '" + w + "'");
    if (!uniq.insert(w).second) throw ConfigError("duplicate toy corpus word '" + w + "'");
  }
  if (utterances < 1) throw ConfigError("toy corpus needs at least one utterance");
  if (min_words < 1 || max_words < min_words)
    throw ConfigError("toy corpus word-count bounds must satisfy 1 <= min <= max");
  if (sample_rate != 8000 && sample_rate != 16000)
    throw ConfigError("toy corpus sample rate must be 8000 or 16000");
}

CorpusManifest make_toy_corpus(const ToySpec& spec, const std::string& out_dir) {
  spec.validate();
  fs::create_directories(fs::path(out_dir) / "wav");

  Rng rng(spec.seed);
  CorpusManifest m;
  for (int i = 0; i < spec.utterances; ++i) {
    int n = spec.min_words + pick(rng, spec.max_words - spec.min_words + 1);
    std::vector<std::string> ws;
    for (int k = 0; k < n; ++k) ws.push_back(spec.words[pick(rng, spec.words.size())]);

    char id[32];
    std::snprintf(id, sizeof(id), "toy-%04d", i);
    ManifestEntry e;
    e.id = id;
    e.audio = std::string("wav/") + id + ".wav";
    e.source = join_words(ws);
    if (spec.reverse_targets) std::reverse(ws.begin(), ws.end());
    e.targets = {join_words(ws)};
    write_wav((fs::path(out_dir) / e.audio).string(), render_transcript(e.source, spec.sample_rate));
    m.entries.push_back(std::move(e));
  }
  save_manifest(m, (fs::path(out_dir) / "manifest.jsonl").string());
  // Reload so returned audio paths are resolved and the writer/loader pair
  // stays exercised.
  return load_manifest((fs::path(out_dir) / "manifest.jsonl").string());
}

std::string cache_feature_path(const std::string& dir, const std::string& id) {
  return (fs::path(dir) / (id + ".feat")).string();
}

std::string cache_key_path(const std::string& dir, const std::string& id) {
  return (fs::path(dir) / (id + ".key")).string();
}

std::string feature_fingerprint(const std::string& audio_path, const FrontendConfig& cfg) {
  auto bytes = slurp_file(audio_path, "audio file");
  uint64_t h = fnv1a64(bytes);
  char settings[256];
  std::snprintf(settings, sizeof(settings),
                "n_mels=%d;frame_length_ms=%.17g;frame_shift_ms=%.17g;mel_low_hz=%.17g;"
                "mel_high_frac=%.17g;log_floor=%.17g;delta_window=%d",
                cfg.n_mels, cfg.frame_length_ms, cfg.frame_shift_ms, cfg.mel_low_hz,
                cfg.mel_high_frac, cfg.log_floor, cfg.delta_window);
  return to_hex(fnv1a64(settings, std::strlen(settings), h));
}

bool cache_fresh(const std::string& dir, const ManifestEntry& e, const FrontendConfig& cfg) {
  if (e.audio.empty()) return false;
  auto feat = cache_feature_path(dir, e.id);
  auto key = cache_key_path(dir, e.id);
  if (!fs::exists(feat) || !fs::exists(key)) return false;
  return slurp_file(key, "cache key") == feature_fingerprint(e.audio, cfg);
}

void featurize_entry(const std::string& dir, const ManifestEntry& e, const FrontendConfig& cfg) {
  if (e.audio.empty()) throw InputError("entry '" + e.id + "' has no audio to featurize");
  fs::create_directories(dir);
  auto feats = stack_features(read_wav(e.audio), cfg);
  write_tensor_file(cache_feature_path(dir, e.id), *feats);
  std::ofstream key(cache_key_path(dir, e.id), std::ios::binary);
  key << feature_fingerprint(e.audio, cfg);
  if (!key) throw InputError("cannot write cache key for '" + e.id + "'");
}

std::string cmvn_path(const std::string& dir) {
  return (fs::path(dir) / "cmvn.stats").string();
}

TensorPtr load_cached_features(const std::string& dir, const ManifestEntry& e) {
  auto path = cache_feature_path(dir, e.id);
  if (!fs::exists(path))
    throw InputError("no cached features for '" + e.id + "' (run featurize first)");
  auto feats = read_tensor_file(path);
  if (fs::exists(cmvn_path(dir))) Cmvn::load(cmvn_path(dir)).apply(*feats);
  return feats;
}

void BatchingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (bucket_width < 1) throw ConfigError("bucket_width must be >= 1");
}

BatchIterator::BatchIterator(std::vector<int64_t> lengths, const BatchingConfig& cfg)
    : lengths_(std::move(lengths)), cfg_(cfg) {
  cfg_.validate();
  if (lengths_.empty()) throw InputError("batch iterator needs a non-empty corpus");
  for (auto len : lengths_)
    if (len < 0) throw InputError("negative utterance length");
  build_plan();
}

void BatchIterator::build_plan() {
  std::map<int64_t, std::vector<int>> buckets;
  for (size_t i = 0; i < lengths_.size(); ++i)
    buckets[lengths_[i] / cfg_.bucket_width].push_back(static_cast<int>(i));

  Rng rng(derive_seed(cfg_.seed, "epoch-" + std::to_string(epoch_)));
  plan_.clear();
  for (auto& [bucket, idx] : buckets) {
    shuffle_vec(idx, rng);
    for (size_t at = 0; at < idx.size(); at += cfg_.batch_size) {
      size_t end = std::min(at + cfg_.batch_size, idx.size());
      plan_.emplace_back(idx.begin() + at, idx.begin() + end);
    }
  }
  shuffle_vec(plan_, rng);
}

std::vector<int> BatchIterator::next_batch() {
  std::vector<int> batch = plan_[cursor_++];
  if (cursor_ >= static_cast<int64_t>(plan_.size())) {
    ++epoch_;
    cursor_ = 0;
    build_plan();
  }
  return batch;
}

void BatchIterator::seek(int64_t epoch, int64_t cursor) {
  if (epoch < 0 || cursor < 0) throw UsageError("batch iterator seek to negative position");
  epoch_ = epoch;
  build_plan();
  if (cursor > static_cast<int64_t>(plan_.size()))
    throw UsageError("batch cursor " + std::to_string(cursor) + " past epoch end (" +
                     std::to_string(plan_.size()) + " batches)");
  if (cursor == static_cast<int64_t>(plan_.size())) {
    ++epoch_;
    cursor_ = 0;
    build_plan();
  } else {
    cursor_ = cursor;
  }
}

Example make_example(const ManifestEntry& e, const std::string& task, const Vocabulary& vocab,
                     const std::string& cache_dir) {
  Example ex;
  ex.id = e.id;
  const std::string* target_text = nullptr;
  if (task == "asr") {
    target_text = &e.source;
  } else if (task == "st" || task == "nmt") {
    if (e.targets.empty()) throw InputError("entry '" + e.id + "' has no target translation");
    target_text = &e.targets[0];
  } else {
    throw ConfigError("unknown task '" + task + "' (want asr, st, or nmt)");
  }
  ex.target = vocab.encode(normalize_text(*target_text));
  if (task == "nmt") {
    ex.source = vocab.encode(normalize_text(e.source));
  } else {
    ex.features = load_cached_features(cache_dir, e);
  }
  return ex;
}

}  // namespace sqt
