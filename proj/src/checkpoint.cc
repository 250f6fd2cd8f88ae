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

#include "sqt/checkpoint.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>
#include <vector>

#include "sqt/error.h"
#include "sqt/rng.h"

namespace sqt {
namespace {

constexpr char kBundleMagic[4] = {'S', 'Q', 'T', 'C'};
constexpr const char* kFormat = "sqt-checkpoint-v1";

std::string join(const std::string& dir, const std::string& leaf) {
  return (std::filesystem::path(dir) / leaf).string();
}

// Bundle layout: magic, u64 record count, then per record a u32 name length,
// the name bytes, and one tensor in the shared binary tensor format.
void write_bundle(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write " + path);
  os.write(kBundleMagic, 4);
  const uint64_t n = tensors.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const auto& [name, t] : tensors) {
    const uint32_t len = static_cast<uint32_t>(name.size());
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, *t);
  }
  if (!os) throw InputError("short write to " + path);
}

std::map<std::string, TensorPtr> read_bundle(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kBundleMagic, 4) != 0) {
    throw CorruptionError("bad bundle magic in " + path + " (expected \"SQTC\")");
  }
  uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!is || n > (1ull << 32)) throw CorruptionError("implausible record count in " + path);
  std::map<std::string, TensorPtr> out;
  for (uint64_t i = 0; i < n; ++i) {
    uint32_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!is || len > 4096) throw CorruptionError("implausible name length in " + path);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw CorruptionError("truncated record name in " + path);
    auto t = read_tensor(is, path + ":" + name);
    if (!out.emplace(std::move(name), std::move(t)).second) {
      throw CorruptionError("duplicate record in " + path);
    }
  }
  return out;
}

// Copies bundle values into live tensors; the name sets must match exactly.
void restore_into(const std::map<std::string, TensorPtr>& bundle,
                  const std::vector<ParamInfo>& dest, const std::string& what) {
  if (bundle.size() != dest.size()) {
    throw CorruptionError(what + ": checkpoint has " + std::to_string(bundle.size()) +
                          " tensors, model expects " + std::to_string(dest.size()));
  }
  for (const auto& p : dest) {
    auto it = bundle.find(p.name);
    if (it == bundle.end()) throw CorruptionError(what + ": checkpoint is missing " + p.name);
    if (it->second->shape() != p.t->shape()) {
      throw CorruptionError(what + ": shape mismatch for " + p.name + " (checkpoint " +
                            shape_str(it->second->shape()) + ", model " + shape_str(p.t->shape()) +
                            ")");
    }
    p.t->v = it->second->v;
  }
}

std::map<std::string, std::string> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw CorruptionError("manifest line without a tab in " + path);
    kv[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return kv;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

void save_checkpoint(const std::string& dir, const ParamRegistry& reg, const Vocabulary& vocab,
                     const std::string& config_text, const CheckpointMeta& meta,
                     const Adam* adam) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream os(join(dir, "manifest.txt"), std::ios::trunc);
    if (!os) throw InputError("cannot write checkpoint manifest in " + dir);
    os << "format\t" << kFormat << '\n';
    os << "step\t" << meta.step << '\n';
    os << "config_hash\t" << to_hex(fnv1a64(config_text)) << '\n';
    for (const auto& [k, v] : meta.extra) {
      if (k == "format" || k == "step" || k == "config_hash") {
        throw UsageError("checkpoint extra key collides with a reserved key: " + k);
      }
      os << k << '\t' << v << '\n';
    }
  }

  {
    std::ofstream os(join(dir, "config.json"), std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write checkpoint config in " + dir);
    os << config_text;
  }

  vocab.save(join(dir, "vocab.txt"));

  std::vector<std::pair<std::string, const Tensor*>> params;
  for (const auto& p : reg.params()) params.emplace_back(p.name, p.t.get());
  write_bundle(join(dir, "params.bin"), params);

  std::vector<std::pair<std::string, const Tensor*>> state;
  for (const auto& p : reg.state()) state.emplace_back(p.name, p.t.get());
  write_bundle(join(dir, "state.bin"), state);

  if (adam) {
    std::vector<std::pair<std::string, const Tensor*>> moments;
    const auto& names = reg.params();
    for (size_t i = 0; i < names.size(); ++i) {
      moments.emplace_back("m." + names[i].name, adam->m()[i].get());
    }
    for (size_t i = 0; i < names.size(); ++i) {
      moments.emplace_back("v." + names[i].name, adam->v()[i].get());
    }
    write_bundle(join(dir, "adam.bin"), moments);
  }
}

CheckpointMeta read_checkpoint_meta(const std::string& dir) {
  const auto kv = read_manifest(join(dir, "manifest.txt"));
  const auto fmt = kv.find("format");
  if (fmt == kv.end() || fmt->second != kFormat) {
    throw CorruptionError("not a checkpoint directory (bad or missing format key): " + dir);
  }
  CheckpointMeta meta;
  for (const auto& [k, v] : kv) {
    if (k == "format") continue;
    if (k == "step") {
      meta.step = std::stoll(v);
    } else if (k == "config_hash") {
      meta.config_hash = std::stoull(v, nullptr, 16);
    } else {
      meta.extra[k] = v;
    }
  }
  return meta;
}

std::string checkpoint_config_text(const std::string& dir) {
  const auto meta = read_checkpoint_meta(dir);
  auto text = slurp(join(dir, "config.json"));
  if (fnv1a64(text) != meta.config_hash) {
    throw CorruptionError("embedded config does not match its recorded hash in " + dir);
  }
  return text;
}

Vocabulary checkpoint_vocab(const std::string& dir) { return Vocabulary::load(join(dir, "vocab.txt")); }

CheckpointMeta load_checkpoint(const std::string& dir, ParamRegistry& reg, Adam* adam) {
  auto meta = read_checkpoint_meta(dir);
  checkpoint_config_text(dir);  // hash self-check

  restore_into(read_bundle(join(dir, "params.bin")), reg.params(), "params");
  restore_into(read_bundle(join(dir, "state.bin")), reg.state(), "state");

  if (adam) {
    const auto path = join(dir, "adam.bin");
    if (!std::filesystem::exists(path)) {
      throw InputError("checkpoint has no optimizer state: " + dir);
    }
    const auto bundle = read_bundle(path);
    const auto& params = reg.params();
    if (bundle.size() != 2 * params.size()) {
      throw CorruptionError("adam: checkpoint moment count does not match the model");
    }
    for (size_t i = 0; i < params.size(); ++i) {
      for (const char* prefix : {"m.", "v."}) {
        auto it = bundle.find(prefix + params[i].name);
        if (it == bundle.end()) {
          throw CorruptionError(std::string("adam: checkpoint is missing ") + prefix + params[i].name);
        }
        Tensor& dst = prefix[0] == 'm' ? *adam->m()[i] : *adam->v()[i];
        if (it->second->shape() != dst.shape()) {
          throw CorruptionError(std::string("adam: shape mismatch for ") + prefix + params[i].name);
        }
        dst.v = it->second->v;
      }
    }
  }
  return meta;
}

}  // namespace sqt
