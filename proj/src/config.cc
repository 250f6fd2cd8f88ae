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

#include "sqt/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sqt/error.h"
#include "sqt/rng.h"

namespace sqt {
namespace {

using json = nlohmann::ordered_json;

// Validation context: origin (file/label) plus the section path for errors.
struct Ctx {
  std::string origin;
  std::string where;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(origin + ": " + (where.empty() ? "" : where + ": ") + msg);
  }

  Ctx in(const std::string& section) const {
    return {origin, where.empty() ? section : where + "." + section};
  }
};

void check_keys(const json& obj, const std::set<std::string>& allowed, const Ctx& ctx) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key())) ctx.fail("unknown key '" + item.key() + "'");
}

const json& section(const json& obj, const char* key, const Ctx& ctx) {
  if (!obj.at(key).is_object()) ctx.fail(std::string("section '") + key + "' must be an object");
  return obj.at(key);
}

int64_t get_int(const json& obj, const char* key, int64_t dflt, const Ctx& ctx) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    ctx.fail(std::string("key '") + key + "' must be an integer");
  return v.get<int64_t>();
}

double get_num(const json& obj, const char* key, double dflt, const Ctx& ctx) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_number()) ctx.fail(std::string("key '") + key + "' must be a number");
  return v.get<double>();
}

std::string get_str(const json& obj, const char* key, const std::string& dflt, const Ctx& ctx) {
  if (!obj.contains(key)) return dflt;
  const auto& v = obj.at(key);
  if (!v.is_string()) ctx.fail(std::string("key '") + key + "' must be a string");
  return v.get<std::string>();
}

FrontendConfig parse_frontend(const json& obj, const Ctx& ctx) {
  check_keys(obj,
             {"n_mels", "frame_length_ms", "frame_shift_ms", "mel_low_hz", "mel_high_frac",
              "log_floor", "delta_window"},
             ctx);
  FrontendConfig f;
  f.n_mels = static_cast<int>(get_int(obj, "n_mels", f.n_mels, ctx));
  f.frame_length_ms = get_num(obj, "frame_length_ms", f.frame_length_ms, ctx);
  f.frame_shift_ms = get_num(obj, "frame_shift_ms", f.frame_shift_ms, ctx);
  f.mel_low_hz = get_num(obj, "mel_low_hz", f.mel_low_hz, ctx);
  f.mel_high_frac = get_num(obj, "mel_high_frac", f.mel_high_frac, ctx);
  f.log_floor = get_num(obj, "log_floor", f.log_floor, ctx);
  f.delta_window = static_cast<int>(get_int(obj, "delta_window", f.delta_window, ctx));
  return f;
}

SpeechEncoderConfig parse_speech_encoder(const json& obj, const Ctx& ctx) {
  check_keys(
      obj,
      {"conv_kernels", "conv_lstm_filters", "lstm_units", "proj_dim", "num_lstm_layers"},
      ctx);
  SpeechEncoderConfig e;  // n_mels is wired from the frontend section
  e.conv_kernels = get_int(obj, "conv_kernels", e.conv_kernels, ctx);
  e.conv_lstm_filters = get_int(obj, "conv_lstm_filters", e.conv_lstm_filters, ctx);
  e.lstm_units = get_int(obj, "lstm_units", e.lstm_units, ctx);
  e.proj_dim = get_int(obj, "proj_dim", e.proj_dim, ctx);
  e.num_lstm_layers = get_int(obj, "num_lstm_layers", e.num_lstm_layers, ctx);
  return e;
}

TextEncoderConfig parse_text_encoder(const json& obj, const Ctx& ctx) {
  check_keys(obj, {"embed_dim", "bi_units", "uni_units", "num_uni_layers"}, ctx);
  TextEncoderConfig e;
  e.embed_dim = get_int(obj, "embed_dim", e.embed_dim, ctx);
  e.bi_units = get_int(obj, "bi_units", e.bi_units, ctx);
  e.uni_units = get_int(obj, "uni_units", e.uni_units, ctx);
  e.num_uni_layers = get_int(obj, "num_uni_layers", e.num_uni_layers, ctx);
  return e;
}

DecoderConfig parse_decoder(const json& obj, const Ctx& ctx) {
  check_keys(obj, {"task", "depth", "lstm_units", "embed_dim", "attn_hidden"}, ctx);
  DecoderConfig d;
  d.depth = get_int(obj, "depth", d.depth, ctx);
  d.lstm_units = get_int(obj, "lstm_units", d.lstm_units, ctx);
  d.embed_dim = get_int(obj, "embed_dim", d.embed_dim, ctx);
  d.attn_hidden = get_int(obj, "attn_hidden", d.attn_hidden, ctx);
  return d;  // vocab stays at the built-in inventory size; enc_dim wired later
}

OptimizerConfig parse_optimizer(const json& obj, const Ctx& ctx) {
  check_keys(obj,
             {"lr0", "beta1", "beta2", "eps", "l2", "clip_norm", "noise_std",
              "noise_start_step", "decay_step", "batch_size"},
             ctx);
  OptimizerConfig o;
  o.lr0 = get_num(obj, "lr0", o.lr0, ctx);
  o.beta1 = get_num(obj, "beta1", o.beta1, ctx);
  o.beta2 = get_num(obj, "beta2", o.beta2, ctx);
  o.eps = get_num(obj, "eps", o.eps, ctx);
  o.l2 = get_num(obj, "l2", o.l2, ctx);
  o.clip_norm = get_num(obj, "clip_norm", o.clip_norm, ctx);
  o.noise_std = get_num(obj, "noise_std", o.noise_std, ctx);
  o.noise_start_step = get_int(obj, "noise_start_step", o.noise_start_step, ctx);
  o.decay_step = get_int(obj, "decay_step", o.decay_step, ctx);
  o.batch_size = get_int(obj, "batch_size", o.batch_size, ctx);
  return o;
}

DecodeOverrides parse_decode(const json& obj, const Ctx& ctx) {
  check_keys(obj, {"beam_width", "rank_prune", "alpha", "eos_margin", "max_len"}, ctx);
  DecodeOverrides d;
  if (obj.contains("beam_width")) d.beam_width = get_int(obj, "beam_width", 0, ctx);
  if (obj.contains("rank_prune")) d.rank_prune = get_int(obj, "rank_prune", 0, ctx);
  if (obj.contains("alpha")) d.alpha = get_num(obj, "alpha", 0, ctx);
  if (obj.contains("max_len")) d.max_len = get_int(obj, "max_len", 0, ctx);
  if (obj.contains("eos_margin")) {
    d.set_eos_margin = true;
    if (!obj.at("eos_margin").is_null()) d.eos_margin = get_num(obj, "eos_margin", 0, ctx);
  }
  return d;
}

DataSection parse_data(const json& obj, const Ctx& ctx) {
  check_keys(obj, {"train_manifest", "eval_manifest", "cache_dir", "bucket_width"}, ctx);
  DataSection d;
  d.train_manifest = get_str(obj, "train_manifest", "", ctx);
  d.eval_manifest = get_str(obj, "eval_manifest", "", ctx);
  d.cache_dir = get_str(obj, "cache_dir", "", ctx);
  d.bucket_width = static_cast<int>(get_int(obj, "bucket_width", d.bucket_width, ctx));
  return d;
}

}  // namespace

DecodeConfig DecodeOverrides::apply(DecodeConfig base) const {
  if (beam_width) base.beam_width = *beam_width;
  if (rank_prune) base.rank_prune = *rank_prune;
  if (alpha) base.alpha = *alpha;
  if (max_len) base.max_len = *max_len;
  if (set_eos_margin) base.eos_margin = eos_margin;
  return base;
}

void ExperimentConfig::validate() const {
  if (!model.tasks.empty()) model.validate();
  if (text_encoder && !nmt_decoder)
    throw ConfigError("config declares a text_encoder but no decoder with task 'nmt'");
  if (nmt_decoder && !text_encoder)
    throw ConfigError("config declares an 'nmt' decoder but no text_encoder section");
  if (text_encoder) nmt_config().validate();
  if (model.tasks.empty() && !nmt_decoder)
    throw ConfigError("config declares no decoders");
  optimizer.validate();
  schedule.validate();
  if (steps < 1) throw ConfigError("training.steps must be >= 1");
  if (checkpoint_every < 1) throw ConfigError("training.checkpoint_every must be >= 1");
  if (data.bucket_width < 1) throw ConfigError("data.bucket_width must be >= 1");
  decode_config_for("st").validate();
  decode_config_for("asr").validate();
}

MultiTaskConfig ExperimentConfig::speech_config() const {
  if (model.tasks.empty())
    throw ConfigError("config has no speech-task decoders (only 'nmt')");
  return model;
}

NmtConfig ExperimentConfig::nmt_config() const {
  if (!text_encoder || !nmt_decoder)
    throw ConfigError("text task needs both a text_encoder section and an 'nmt' decoder");
  NmtConfig cfg;
  cfg.encoder = *text_encoder;
  cfg.decoder = *nmt_decoder;
  cfg.decoder.enc_dim = cfg.encoder.output_dim();
  return cfg;
}

DecodeConfig ExperimentConfig::decode_config_for(const std::string& task) const {
  DecodeConfig base =
      task == "asr" ? DecodeConfig::asr_defaults() : DecodeConfig::st_defaults();
  return decode.apply(base);
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
  Ctx top{origin, ""};
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::exception& e) {
    top.fail(std::string("malformed JSON: ") + e.what());
  }
  if (!obj.is_object()) top.fail("config must be a JSON object");
  check_keys(obj, {"seed", "model", "frontend", "optimizer", "schedule", "training", "decode",
                   "data"},
             top);

  ExperimentConfig cfg;
  cfg.text = text;
  cfg.hash = fnv1a64(text);

  if (obj.contains("seed")) {
    const auto& s = obj.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<int64_t>() >= 0))
      top.fail("key 'seed' must be a non-negative integer");
    cfg.seed = s.get<uint64_t>();
  }

  if (obj.contains("frontend")) cfg.frontend = parse_frontend(section(obj, "frontend", top), top.in("frontend"));

  // Model section; the speech encoder's mel count always mirrors the
  // frontend so features and network cannot drift apart.
  cfg.model.encoder.n_mels = cfg.frontend.n_mels;
  if (obj.contains("model")) {
    Ctx mctx = top.in("model");
    const json& m = section(obj, "model", top);
    check_keys(m, {"speech_encoder", "text_encoder", "shared_lstm_layers", "decoders"}, mctx);
    if (m.contains("speech_encoder")) {
      cfg.model.encoder =
          parse_speech_encoder(section(m, "speech_encoder", mctx), mctx.in("speech_encoder"));
      cfg.model.encoder.n_mels = cfg.frontend.n_mels;
    }
    if (m.contains("text_encoder"))
      cfg.text_encoder =
          parse_text_encoder(section(m, "text_encoder", mctx), mctx.in("text_encoder"));
    cfg.model.shared_lstm_layers =
        get_int(m, "shared_lstm_layers", cfg.model.shared_lstm_layers, mctx);
    if (m.contains("decoders")) {
      if (!m.at("decoders").is_array()) mctx.fail("key 'decoders' must be an array");
      for (const auto& entry : m.at("decoders")) {
        Ctx dctx = mctx.in("decoders");
        if (!entry.is_object()) dctx.fail("decoder entries must be objects");
        std::string task = get_str(entry, "task", "", dctx);
        if (task.empty()) dctx.fail("decoder entry needs a non-empty 'task'");
        DecoderConfig d = parse_decoder(entry, dctx);
        if (task == "nmt") {
          if (cfg.nmt_decoder) dctx.fail("duplicate decoder for task 'nmt'");
          cfg.nmt_decoder = d;
        } else {
          for (const auto& t : cfg.model.tasks)
            if (t.name == task) dctx.fail("duplicate decoder for task '" + task + "'");
          d.enc_dim = cfg.model.encoder.output_dim();
          cfg.model.tasks.push_back({task, d});
        }
      }
    }
  }
  if (cfg.model.tasks.empty() && !cfg.nmt_decoder) {
    // Default model: one full-size translation decoder.
    DecoderConfig d;
    d.enc_dim = cfg.model.encoder.output_dim();
    cfg.model.tasks.push_back({"st", d});
  }

  if (obj.contains("optimizer"))
    cfg.optimizer = parse_optimizer(section(obj, "optimizer", top), top.in("optimizer"));

  if (obj.contains("schedule")) {
    Ctx sctx = top.in("schedule");
    const json& s = section(obj, "schedule", top);
    cfg.schedule.probs.clear();
    for (const auto& item : s.items()) {
      if (!item.value().is_number()) sctx.fail("task probabilities must be numbers");
      cfg.schedule.probs.emplace_back(item.key(), item.value().get<double>());
    }
  }

  if (obj.contains("training")) {
    Ctx tctx = top.in("training");
    const json& t = section(obj, "training", top);
    check_keys(t, {"steps", "checkpoint_every"}, tctx);
    cfg.steps = get_int(t, "steps", cfg.steps, tctx);
    cfg.checkpoint_every = get_int(t, "checkpoint_every", cfg.checkpoint_every, tctx);
  }

  if (obj.contains("decode")) cfg.decode = parse_decode(section(obj, "decode", top), top.in("decode"));
  if (obj.contains("data")) cfg.data = parse_data(section(obj, "data", top), top.in("data"));

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), path);
}

}  // namespace sqt
