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
//
// Vocabulary and text normalization tests.  The 90-token inventory is pinned
// by content hash so an accidental edit of the data file fails loudly.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "sqt/error.h"
#include "sqt/rng.h"
#include "sqt/vocab.h"

using namespace sqt;

TEST_CASE("builtin inventory shape and pinned hash") {
  auto v = Vocabulary::builtin();
  CHECK(v.size() == 90);
  CHECK(v.token(v.sos()) == "<sos>");
  CHECK(v.token(v.eos()) == "<eos>");
  CHECK(v.token(v.unk()) == "<unk>");
  CHECK(v.token(v.space()) == "<spc>");
  CHECK(v.content_hash() == 0xd2e4cf933432be3aull);

  // Everything the normalizer can emit for Spanish/English text is present.
  for (char c = 'a'; c <= 'z'; ++c) CHECK(v.id(std::string(1, c)) >= 0);
  for (char c = '0'; c <= '9'; ++c) CHECK(v.id(std::string(1, c)) >= 0);
  for (const char* accent : {"á", "é", "í", "ó", "ú", "ü", "ñ"}) CHECK(v.id(accent) >= 0);
  CHECK(v.id("'") >= 0);
}

TEST_CASE("shipped vocabulary file matches the builtin inventory") {
  auto file = Vocabulary::load(std::string(SQT_SOURCE_DIR) + "/data/vocab90.txt");
  auto builtin = Vocabulary::builtin();
  CHECK(file.tokens() == builtin.tokens());
  CHECK(file.content_hash() == builtin.content_hash());
}

TEST_CASE("normalize_text applies the documented rules") {
  CHECK(normalize_text("¿Qué tal?") == "qué tal");
  CHECK(normalize_text("don't STOP.") == "don't stop");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("  hola ,  mundo !! ") == "hola mundo");
  CHECK(normalize_text("A\tB\nC") == "a b c");
  CHECK(normalize_text("ÁRBOL Ñandú ÜBER") == "árbol ñandú über");
  CHECK(normalize_text("it’s") == "it's");  // typographic apostrophe
  CHECK(normalize_text("1,234.56") == "123456");
  CHECK(normalize_text("...") == "");
}

TEST_CASE("normalize_text is idempotent") {
  Rng rng(3);
  const std::vector<std::string> pool = {"a", "Z", ".", "?", " ", "'", "\t",
                                         "Á", "e", "1", "!", "ñ", "Q", "¿"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    const auto n = rng.below(30);
    for (uint64_t i = 0; i < n; ++i) s += pool[static_cast<size_t>(rng.below(pool.size()))];
    const std::string once = normalize_text(s);
    CHECK(normalize_text(once) == once);
  }
}

TEST_CASE("encode and decode") {
  auto v = Vocabulary::builtin();
  CHECK(v.decode(v.encode("hola")) == "hola");
  CHECK(v.encode("a b").size() == 3);
  CHECK(v.encode("a b")[1] == v.space());

  // Snowman is out of inventory.
  auto ids = v.encode("hola☃");
  REQUIRE(ids.size() == 5);
  CHECK(ids[4] == v.unk());

  // Accented round trip.
  CHECK(v.decode(v.encode("qué año")) == "qué año");

  CHECK_THROWS_AS(v.token(90), CorruptionError);
  CHECK_THROWS_AS(v.token(-1), CorruptionError);
  CHECK_THROWS_AS(v.decode({0, 91}), CorruptionError);
}

TEST_CASE("round-trip identity over random in-vocabulary strings") {
  auto v = Vocabulary::builtin();
  std::vector<std::string> alphabet;
  for (char c = 'a'; c <= 'z'; ++c) alphabet.push_back(std::string(1, c));
  for (char c = '0'; c <= '9'; ++c) alphabet.push_back(std::string(1, c));
  for (const char* a : {"á", "é", "í", "ó", "ú", "ü", "ñ", "'", " "}) alphabet.push_back(a);
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::string s;
    const auto n = rng.below(40);
    for (uint64_t i = 0; i < n; ++i) s += alphabet[static_cast<size_t>(rng.below(alphabet.size()))];
    CHECK(v.decode(v.encode(s)) == s);
  }
}

TEST_CASE("vocabulary file round trip and validation") {
  auto v = Vocabulary::builtin();
  const std::string path = "test_vocab_roundtrip.txt";
  v.save(path);
  auto back = Vocabulary::load(path);
  CHECK(back.tokens() == v.tokens());
  std::remove(path.c_str());

  // Wrong token count.
  const std::string short_path = "test_vocab_short.txt";
  {
    std::ofstream os(short_path);
    os << "<sos>\n<eos>\n<unk>\n<spc>\na\n";
  }
  CHECK_THROWS_AS(Vocabulary::load(short_path), CorruptionError);
  std::remove(short_path.c_str());

  // Duplicate token.
  auto tokens = v.tokens();
  tokens[89] = "a";
  CHECK_THROWS_AS(Vocabulary::from_tokens(tokens), CorruptionError);

  // Specials must sit at the reserved indices.
  tokens = v.tokens();
  std::swap(tokens[0], tokens[1]);
  CHECK_THROWS_AS(Vocabulary::from_tokens(tokens), CorruptionError);

  CHECK_THROWS_AS(Vocabulary::load("no_such_vocab.txt"), InputError);
}

TEST_CASE("utf8 helpers reject mangled input") {
  CHECK(utf8_decode("qué").size() == 3);
  CHECK(utf8_encode(0xE9) == "é");
  CHECK_THROWS_AS(utf8_decode("\xC3"), InputError);        // truncated sequence
  CHECK_THROWS_AS(utf8_decode("\xFF\xFF"), InputError);    // invalid lead byte
  CHECK_THROWS_AS(utf8_decode("\xC3\x41"), InputError);    // bad continuation
}
