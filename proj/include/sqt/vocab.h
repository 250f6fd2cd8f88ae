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

#ifndef SQT_VOCAB_H_
#define SQT_VOCAB_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sqt {

// UTF-8 <-> codepoint helpers.  Invalid byte sequences are input errors; the
// text path never silently drops bytes.
std::vector<uint32_t> utf8_decode(const std::string& s);
std::string utf8_encode(uint32_t cp);

// Lowercases (ASCII and Latin-1 letters), removes punctuation except
// apostrophes (typographic U+2019 becomes ASCII '), collapses whitespace
// runs to single spaces, and strips the ends.  Idempotent.
std::string normalize_text(const std::string& s);

// The shared 90-token character inventory for both languages: specials
// (<sos>, <eos>, <unk>, <spc>), apostrophe, a-z, the accented Spanish
// letters, digits, and punctuation padding.  Indices are stable and the
// token list travels inside checkpoints.
class Vocabulary {
 public:
  static constexpr int kSize = 90;

  // The canonical inventory compiled into the library.
  static Vocabulary builtin();
  // One token per line, UTF-8, index = line number.
  static Vocabulary load(const std::string& path);
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  void save(const std::string& path) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  int sos() const { return 0; }
  int eos() const { return 1; }
  int unk() const { return 2; }
  int space() const { return 3; }

  // Token for an index; out-of-range indices mean a damaged sequence.
  const std::string& token(int id) const;
  // Index for a token, or -1 when absent.
  int id(const std::string& token) const;

  // Codepoints of normalized text to indices; unknown characters map to
  // <unk>.  No <sos>/<eos> framing is added here.
  std::vector<int> encode(const std::string& normalized) const;
  // Inverse of encode over the in-vocabulary alphabet (<spc> renders as a
  // space; other specials render literally).
  std::string decode(const std::vector<int>& ids) const;

  // FNV-1a over the newline-joined token list; pins the inventory.
  uint64_t content_hash() const;

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

}  // namespace sqt

#endif  // SQT_VOCAB_H_
