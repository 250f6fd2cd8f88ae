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

#ifndef SQT_DATA_H_
#define SQT_DATA_H_

#include <cstdint>
#include <string>
#include <vector>

#include "sqt/features.h"
#include "sqt/tensor.h"
#include "sqt/trainer.h"
#include "sqt/vocab.h"

namespace sqt {

// One corpus utterance.  Speech entries carry an audio path (and, once
// featurized, a cache entry keyed by id); text-only entries leave it empty.
// `targets` holds one translation for training and up to four for
// multi-reference evaluation.
struct ManifestEntry {
  std::string id;
  std::string audio;                 // WAV path; empty for text-only data
  std::string source;                // source-language transcript
  std::vector<std::string> targets;  // 1..4 target-language translations
  std::string split = "train";
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;

  bool empty() const { return entries.empty(); }
  size_t size() const { return entries.size(); }
};

// Reads a JSON-lines manifest: one object per line with keys "id" (string),
// "source" (string), "targets" (array of 1..4 strings), and optionally
// "audio" (string) and "split" (string).  Blank lines are skipped.  A
// malformed line, an unknown key, a duplicate id, or a missing audio file is
// an InputError naming the line number.  An empty file is a valid empty
// manifest.  Relative audio paths resolve against the manifest's directory.
CorpusManifest load_manifest(const std::string& path);

// Writes the manifest in the same JSON-lines schema, one entry per line in
// order.  Audio paths are written as given.
void save_manifest(const CorpusManifest& m, const std::string& path);

// Recipe for a synthetic spoken-digit-style corpus.  Each word in the
// vocabulary maps to a fixed tone sequence (one tone per character), so an
// utterance's waveform is fully determined by its transcript and the corpus
// is byte-identical across runs with the same spec.  With `reverse_targets`
// the translation is the transcript with word order reversed, which forces a
// translation model's attention to run anti-monotonically while the
// recognition task stays monotonic.
struct ToySpec {
  std::vector<std::string> words = {"uno", "dos", "tres", "agua", "gato"};
  int utterances = 50;
  int min_words = 2;   // words per utterance, inclusive bounds
  int max_words = 5;
  bool reverse_targets = true;
  int sample_rate = 8000;
  uint64_t seed = 0;

  void validate() const;  // ConfigError on bad counts/bounds/words
};

// Generates WAVs under <out_dir>/wav/ and writes <out_dir>/manifest.jsonl;
// returns the manifest (with audio paths pointing into out_dir).
CorpusManifest make_toy_corpus(const ToySpec& spec, const std::string& out_dir);

// --- Feature cache -----------------------------------------------------
//
// A cache directory holds one tensor file per utterance, "<id>.feat", plus a
// freshness key "<id>.key" recording a hash of the audio bytes and the
// frontend settings.  Featurization skips entries whose key still matches,
// so a rerun over a complete cache does no work.  The featurize command also
// drops corpus normalization stats ("cmvn.stats") next to the tensors;
// load_cached_features applies them when present, so training and decoding
// see normalized features without either having to ask.

std::string cache_feature_path(const std::string& dir, const std::string& id);
std::string cache_key_path(const std::string& dir, const std::string& id);
std::string cmvn_path(const std::string& dir);

// Hex fingerprint of the audio file content chained with the frontend
// settings that produced the features.
std::string feature_fingerprint(const std::string& audio_path, const FrontendConfig& cfg);

// True when the cached features for `e` exist and their key matches the
// current audio bytes and frontend settings.
bool cache_fresh(const std::string& dir, const ManifestEntry& e, const FrontendConfig& cfg);

// Extracts [T, n_mels, 3] features for one entry and writes the tensor and
// key files.  InputError if the entry has no audio path.
void featurize_entry(const std::string& dir, const ManifestEntry& e, const FrontendConfig& cfg);

// Loads cached features for an entry, normalized by the cache's cmvn.stats
// when that file exists; InputError if the features are absent.
TensorPtr load_cached_features(const std::string& dir, const ManifestEntry& e);

// --- Batching -----------------------------------------------------------

struct BatchingConfig {
  int batch_size = 8;
  int bucket_width = 16;  // max length spread within one batch
  uint64_t seed = 0;

  void validate() const;  // ConfigError on non-positive sizes
};

// Length-bucketed epoch iterator over utterance indices.  Entries whose
// lengths fall in the same bucket ([b*w, (b+1)*w) for width w) are shuffled
// and grouped into batches, then the batch order is shuffled; both shuffles
// are seeded per (seed, epoch), so iteration order is reproducible and every
// index appears exactly once per epoch.  `seek` repositions onto any
// (epoch, batch) pair for checkpoint resume.
class BatchIterator {
 public:
  // `lengths[i]` is the sort key for entry i: feature frames for speech,
  // source tokens for text.  InputError when empty.
  BatchIterator(std::vector<int64_t> lengths, const BatchingConfig& cfg);

  // Returns the next batch of entry indices, rolling into the next epoch
  // after the last batch.
  std::vector<int> next_batch();

  // Position of the NEXT batch; after the last batch of an epoch this
  // already reports (epoch+1, 0), so the pair is directly checkpointable.
  int64_t epoch() const { return epoch_; }
  int64_t cursor() const { return cursor_; }
  int64_t batches_per_epoch() const { return static_cast<int64_t>(plan_.size()); }

  void seek(int64_t epoch, int64_t cursor);

 private:
  void build_plan();  // lays out plan_ for epoch_

  std::vector<int64_t> lengths_;
  BatchingConfig cfg_;
  int64_t epoch_ = 0;
  int64_t cursor_ = 0;
  std::vector<std::vector<int>> plan_;
};

// Assembles a trainer example from a manifest entry.  Tasks: "asr" pairs
// cached features with the normalized source transcript, "st" with the first
// target translation, and "nmt" pairs encoded source tokens with the first
// target (no features touched).
Example make_example(const ManifestEntry& e, const std::string& task, const Vocabulary& vocab,
                     const std::string& cache_dir);

}  // namespace sqt

#endif  // SQT_DATA_H_
