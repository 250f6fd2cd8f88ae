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

#include "sqt/vocab.h"

#include <fstream>
#include <sstream>

#include "sqt/error.h"
#include "sqt/rng.h"

namespace sqt {

std::vector<uint32_t> utf8_decode(const std::string& s) {
  std::vector<uint32_t> out;
  const auto* p = reinterpret_cast<const unsigned char*>(s.data());
  const size_t n = s.size();
  size_t i = 0;
  while (i < n) {
    const unsigned char b0 = p[i];
    uint32_t cp = 0;
    size_t len = 0;
    if (b0 < 0x80) {
      cp = b0;
      len = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      len = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      len = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      len = 4;
    } else {
      throw InputError("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    if (i + len > n) throw InputError("truncated UTF-8 sequence at offset " + std::to_string(i));
    for (size_t k = 1; k < len; ++k) {
      if ((p[i + k] & 0xC0) != 0x80) {
        throw InputError("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      }
      cp = (cp << 6) | (p[i + k] & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(uint32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s += static_cast<char>(cp);
  } else if (cp < 0x800) {
    s += static_cast<char>(0xC0 | (cp >> 6));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    s += static_cast<char>(0xE0 | (cp >> 12));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    s += static_cast<char>(0xF0 | (cp >> 18));
    s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return s;
}

namespace {

bool is_space_cp(uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
         cp == 0xA0;  // no-break space
}

// Punctuation stripped by normalization.  The apostrophe (0x27) survives.
bool is_punct_cp(uint32_t cp) {
  if (cp >= 0x21 && cp <= 0x2F) return cp != 0x27;
  if (cp >= 0x3A && cp <= 0x40) return true;
  if (cp >= 0x5B && cp <= 0x60) return true;
  if (cp >= 0x7B && cp <= 0x7E) return true;
  switch (cp) {
    case 0xA1:  // inverted exclamation
    case 0xBF:  // inverted question
    case 0xAB:  // left guillemet
    case 0xBB:  // right guillemet
    case 0xA7:  // section sign
    case 0xB7:  // middle dot
      return true;
    default:
      break;
  }
  return cp >= 0x2000 && cp <= 0x206F;  // general punctuation block
}

uint32_t lower_cp(uint32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;  // Latin-1 uppercase
  return cp;
}

}  // namespace

std::string normalize_text(const std::string& s) {
  std::string out;
  bool pending_space = false;
  for (uint32_t cp : utf8_decode(s)) {
    cp = lower_cp(cp);
    if (cp == 0x2019) cp = '\'';  // typographic apostrophe
    if (is_space_cp(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (is_punct_cp(cp)) continue;
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += utf8_encode(cp);
  }
  return out;
}

Vocabulary Vocabulary::builtin() {
  static const char* kTokens[] = {
      "<sos>", "<eos>", "<unk>", "<spc>", "'",
      "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m",
      "n", "o", "p", "q", "r", "s", "t", "u", "v", "w", "x", "y", "z",
      "á", "é", "í", "ó", "ú", "ü", "ñ",
      "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
      "!", "\"", "#", "$", "%", "&", "(", ")", "*", "+", ",", "-", ".", "/",
      ":", ";", "<", "=", ">", "?", "@", "[", "\\", "]", "^", "_", "`",
      "{", "|", "}", "~",
      "¡", "¿", "«", "»", "°", "º", "ª", "€", "£", "§", "·",
  };
  std::vector<std::string> tokens(std::begin(kTokens), std::end(kTokens));
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (static_cast<int>(tokens.size()) != kSize) {
    throw CorruptionError("vocabulary must have exactly " + std::to_string(kSize) +
                          " tokens, got " + std::to_string(tokens.size()));
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (int i = 0; i < kSize; ++i) {
    if (v.tokens_[i].empty()) throw CorruptionError("empty vocabulary token at index " + std::to_string(i));
    if (!v.index_.emplace(v.tokens_[i], i).second) {
      throw CorruptionError("duplicate vocabulary token \"" + v.tokens_[i] + "\"");
    }
  }
  const char* specials[] = {"<sos>", "<eos>", "<unk>", "<spc>"};
  for (int i = 0; i < 4; ++i) {
    if (v.tokens_[i] != specials[i]) {
      throw CorruptionError("vocabulary index " + std::to_string(i) + " must be " +
                            specials[i] + ", got \"" + v.tokens_[i] + "\"");
    }
  }
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open vocabulary file " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) tokens.push_back(line);
  return from_tokens(std::move(tokens));
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw InputError("cannot open " + path + " for writing");
  for (const auto& t : tokens_) os << t << '\n';
  if (!os) throw InputError("short write to " + path);
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw CorruptionError("token index " + std::to_string(id) + " outside the " +
                          std::to_string(size()) + "-token vocabulary");
  }
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> Vocabulary::encode(const std::string& normalized) const {
  std::vector<int> out;
  for (uint32_t cp : utf8_decode(normalized)) {
    if (cp == ' ') {
      out.push_back(space());
      continue;
    }
    const int idx = id(utf8_encode(cp));
    out.push_back(idx >= 0 ? idx : unk());
  }
  return out;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int idx : ids) {
    const std::string& t = token(idx);
    if (idx == space()) {
      out += ' ';
    } else {
      out += t;
    }
  }
  return out;
}

uint64_t Vocabulary::content_hash() const {
  std::string joined;
  for (size_t i = 0; i < tokens_.size(); ++i) {
    if (i) joined += '\n';
    joined += tokens_[i];
  }
  return fnv1a64(joined);
}

}  // namespace sqt
