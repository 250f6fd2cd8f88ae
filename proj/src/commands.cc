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

#include "sqt/commands.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "sqt/beam.h"
#include "sqt/checkpoint.h"
#include "sqt/config.h"
#include "sqt/data.h"
#include "sqt/error.h"
#include "sqt/metrics.h"
#include "sqt/model.h"
#include "sqt/optimizer.h"
#include "sqt/rng.h"
#include "sqt/trainer.h"

namespace sqt {
namespace {

namespace fs = std::filesystem;

// Uniform error surface: any library error becomes one stderr line and a
// nonzero exit, so scripts can rely on "exit 0 iff no error".
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

std::string slurp(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(std::string("cannot open ") + what + ": " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string pick_path(const std::string& flag, const std::string& from_config,
                      const char* what) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  throw UsageError(std::string("no ") + what + " given (flag or config data section)");
}

std::string ckpt_dir_name(int64_t step) {
  std::ostringstream ss;
  ss << "ckpt-" << std::setw(6) << std::setfill('0') << step;
  return ss.str();
}

// Accepts either a checkpoint directory or a training directory whose LATEST
// file names the newest checkpoint.
std::string resolve_checkpoint(const std::string& path) {
  if (fs::exists(fs::path(path) / "manifest.txt")) return path;
  auto latest = fs::path(path) / "LATEST";
  if (fs::exists(latest)) {
    auto name = slurp(latest.string(), "LATEST");
    while (!name.empty() && (name.back() == '\n' || name.back() == '\r')) name.pop_back();
    auto dir = fs::path(path) / name;
    if (fs::exists(dir / "manifest.txt")) return dir.string();
  }
  throw InputError("no checkpoint found under '" + path + "'");
}

// Utterance lengths that drive bucketing: cached feature frames for speech
// tasks, source tokens for text.  Missing cache entries are reported
// together so one featurize run fixes them all.
std::vector<int64_t> corpus_lengths(const CorpusManifest& m, bool text_task,
                                    const std::string& cache_dir, const Vocabulary& vocab) {
  std::vector<int64_t> lengths;
  std::vector<std::string> missing;
  for (const auto& e : m.entries) {
    if (text_task) {
      lengths.push_back(static_cast<int64_t>(vocab.encode(normalize_text(e.source)).size()));
      continue;
    }
    auto path = cache_feature_path(cache_dir, e.id);
    if (!fs::exists(path)) {
      missing.push_back(e.id);
      continue;
    }
    if (missing.empty()) lengths.push_back(read_tensor_file(path)->extent(0));
  }
  if (!missing.empty()) {
    std::string list;
    for (size_t i = 0; i < missing.size() && i < 5; ++i) list += (i ? " " : "") + missing[i];
    if (missing.size() > 5) list += " ...";
    throw InputError(std::to_string(missing.size()) +
                     " utterances lack cached features (run featurize first): " + list);
  }
  return lengths;
}

void write_attention_tsv(const std::string& path, const Hypothesis& hyp) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write attention file: " + path);
  out << std::setprecision(10);
  for (const auto& row : hyp.attention) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "\t" : "") << row[i];
    out << "\n";
  }
  if (!out) throw InputError("short write on attention file: " + path);
}

// Parameter-count report grouped two name segments deep ("encoder.lstm1",
// "decoder.st", ...), with one subtotal per sub-network: the encoder as a
// whole and each task decoder ("decoder.st"); `tasks` tells task segments
// apart from plain layer names.
void print_param_report(std::ostream& out, const std::string& label, const ParamRegistry& reg,
                        const std::vector<std::string>& tasks) {
  std::map<std::string, int64_t> groups;
  std::map<std::string, int64_t> subtotals;
  int64_t total = 0;
  for (const auto& p : reg.params()) {
    auto first = p.name.find('.');
    auto second = first == std::string::npos ? first : p.name.find('.', first + 1);
    groups[p.name.substr(0, second)] += p.t->numel();
    std::string sub = p.name.substr(0, first);
    if (sub == "decoder" && second != std::string::npos) {
      auto maybe_task = p.name.substr(first + 1, second - first - 1);
      for (const auto& t : tasks)
        if (t == maybe_task) sub = p.name.substr(0, second);
    }
    subtotals[sub] += p.t->numel();
    total += p.t->numel();
  }
  out << "model " << label << "\n";
  for (const auto& [name, n] : groups) out << "param " << name << " " << n << "\n";
  for (const auto& [name, n] : subtotals) out << "subtotal " << name << " " << n << "\n";
  out << "total " << total << "\n";
}

}  // namespace

int cmd_featurize(const FeaturizeOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = load_experiment_config(opt.config_path);
    out << "config-hash " << to_hex(cfg.hash) << "\n";
    auto manifest_path = pick_path(opt.manifest, cfg.data.train_manifest, "manifest");
    auto cache = pick_path(opt.cache_dir, cfg.data.cache_dir, "cache dir");

    auto m = load_manifest(manifest_path);
    int done = 0, fresh = 0, failed = 0, text_only = 0;
    std::vector<std::string> ready;
    for (const auto& e : m.entries) {
      if (e.audio.empty()) {
        ++text_only;
        continue;
      }
      try {
        if (cache_fresh(cache, e, cfg.frontend)) {
          ++fresh;
        } else {
          featurize_entry(cache, e, cfg.frontend);
          ++done;
        }
        ready.push_back(e.id);
      } catch (const Error& ex) {
        ++failed;
        err << "featurize " << e.id << ": " << ex.what() << "\n";
      }
    }
    if (!ready.empty()) {
      // Refresh the corpus normalization stats from the raw tensors on every
      // run so they always match the cache contents.
      std::vector<TensorPtr> corpus;
      corpus.reserve(ready.size());
      for (const auto& id : ready) corpus.push_back(read_tensor_file(cache_feature_path(cache, id)));
      compute_cmvn(corpus).save(cmvn_path(cache));
    }
    out << "featurized " << done << ", fresh " << fresh << ", failed " << failed;
    if (text_only) out << ", text-only " << text_only;
    out << "\n";
    return failed ? 1 : 0;
  });
}

int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = load_experiment_config(opt.config_path);
    out << "config-hash " << to_hex(cfg.hash) << "\n";
    if (opt.task != "asr" && opt.task != "st" && opt.task != "nmt" && opt.task != "multitask")
      throw UsageError("task must be asr, st, nmt, or multitask; got '" + opt.task + "'");
    if (opt.out_dir.empty()) throw UsageError("training needs an output directory");
    fs::create_directories(opt.out_dir);

    const auto vocab = Vocabulary::builtin();
    const bool text_task = opt.task == "nmt";

    TaskSchedule schedule;
    if (opt.task == "multitask") {
      schedule = cfg.schedule;
    } else {
      schedule.probs = {{opt.task, 1.0}};
    }
    schedule.validate();

    std::unique_ptr<MultiTaskModel> speech;
    std::unique_ptr<NmtModel> text;
    std::unique_ptr<Trainer> trainer;
    if (text_task) {
      text = std::make_unique<NmtModel>(cfg.nmt_config(), cfg.seed);
      trainer = std::make_unique<Trainer>(make_trainer(*text, cfg.optimizer, vocab));
    } else {
      speech = std::make_unique<MultiTaskModel>(cfg.speech_config(), cfg.seed);
      for (const auto& [name, prob] : schedule.probs) {
        if (!speech->has_task(name))
          throw ConfigError("schedule names task '" + name + "' but no decoder has it");
        if (name != "asr" && name != "st")
          throw ConfigError("speech decoders must be named 'asr' or 'st'; got '" + name + "'");
      }
      trainer = std::make_unique<Trainer>(make_trainer(*speech, cfg.optimizer, vocab));
    }
    ParamRegistry& reg = text_task ? text->registry() : speech->registry();

    auto manifest_path = pick_path("", cfg.data.train_manifest, "train manifest");
    auto m = load_manifest(manifest_path);
    if (m.empty()) throw InputError("training manifest is empty: " + manifest_path);
    if (!text_task && cfg.data.cache_dir.empty())
      throw UsageError("speech training needs data.cache_dir");

    BatchingConfig bc;
    bc.batch_size = static_cast<int>(cfg.optimizer.batch_size);
    bc.bucket_width = cfg.data.bucket_width;
    bc.seed = derive_seed(cfg.seed, "batches");
    BatchIterator batches(corpus_lengths(m, text_task, cfg.data.cache_dir, vocab), bc);
    TaskSampler sampler(schedule, derive_seed(cfg.seed, "task-sampler"));

    int64_t start_step = 0;
    if (opt.resume) {
      auto ckpt = resolve_checkpoint(opt.out_dir);
      auto meta = read_checkpoint_meta(ckpt);
      if (meta.config_hash != cfg.hash) {
        std::ostringstream ss;
        ss << "refusing to resume: checkpoint config-hash " << to_hex(meta.config_hash)
           << " does not match config " << to_hex(cfg.hash);
        throw StateError(ss.str());
      }
      auto extra = [&](const char* key) -> const std::string& {
        auto it = meta.extra.find(key);
        if (it == meta.extra.end())
          throw CorruptionError("checkpoint " + ckpt + " lacks training state '" + key + "'");
        return it->second;
      };
      load_checkpoint(ckpt, reg, &trainer->optimizer());
      trainer->set_step(meta.step);
      trainer->noise_rng().set_state(extra("rng_noise"));
      sampler.rng().set_state(extra("rng_sampler"));
      batches.seek(std::stoll(extra("batch_epoch")), std::stoll(extra("batch_cursor")));
      start_step = meta.step;
      out << "resumed " << ckpt << " at step " << start_step << "\n";
    }
    if (start_step >= cfg.steps) {
      out << "nothing to do: checkpoint already at step " << start_step << "\n";
      return 0;
    }

    std::ofstream log(fs::path(opt.out_dir) / "train.tsv",
                      opt.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw InputError("cannot write training log under " + opt.out_dir);
    if (!opt.resume) log << "step\ttask\tloss\tgrad_norm\tlr\twall_ms\n";

    auto save = [&](int64_t step) {
      CheckpointMeta meta;
      meta.step = step;
      meta.extra["task"] = opt.task;
      meta.extra["rng_noise"] = trainer->noise_rng().state();
      meta.extra["rng_sampler"] = sampler.rng().state();
      meta.extra["batch_epoch"] = std::to_string(batches.epoch());
      meta.extra["batch_cursor"] = std::to_string(batches.cursor());
      auto dir = fs::path(opt.out_dir) / ckpt_dir_name(step);
      save_checkpoint(dir.string(), reg, vocab, cfg.text, meta, &trainer->optimizer());
      std::ofstream latest(fs::path(opt.out_dir) / "LATEST", std::ios::trunc);
      latest << ckpt_dir_name(step) << "\n";
      out << "checkpoint " << dir.string() << "\n";
    };

    for (int64_t step = start_step + 1; step <= cfg.steps; ++step) {
      std::string task = sampler.sample();
      auto idx = batches.next_batch();
      std::vector<Example> batch;
      batch.reserve(idx.size());
      for (int i : idx)
        batch.push_back(make_example(m.entries[i], task, vocab, cfg.data.cache_dir));
      auto stats = trainer->train_step(task, batch);
      log << tsv_line(stats) << "\n";
      if (step % cfg.checkpoint_every == 0 || step == cfg.steps) save(step);
    }
    out << "trained " << opt.task << " to step " << cfg.steps << "\n";
    return 0;
  });
}

int cmd_decode(const DecodeOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = load_experiment_config(opt.config_path);
    out << "config-hash " << to_hex(cfg.hash) << "\n";
    const bool cascade = !opt.cascade_nmt.empty();
    if (opt.task != "asr" && opt.task != "st" && opt.task != "nmt")
      throw UsageError("task must be asr, st, or nmt; got '" + opt.task + "'");
    if (cascade && opt.task != "st")
      throw UsageError("cascade decoding produces translations; use --task st");
    if (opt.out_path.empty()) throw UsageError("decode needs --out for the n-best file");

    auto ckpt = resolve_checkpoint(opt.checkpoint);
    auto ckpt_cfg = parse_experiment_config(checkpoint_config_text(ckpt), ckpt + "/config.json");
    auto vocab = checkpoint_vocab(ckpt);
    out << "checkpoint " << ckpt << " (config-hash " << to_hex(ckpt_cfg.hash) << ")\n";

    // The model always comes from the checkpoint's own embedded config;
    // the command's config only contributes decode settings and data paths.
    std::unique_ptr<MultiTaskModel> speech;
    std::unique_ptr<NmtModel> text;
    if (opt.task == "nmt") {
      text = std::make_unique<NmtModel>(ckpt_cfg.nmt_config(), ckpt_cfg.seed);
      load_checkpoint(ckpt, text->registry());
    } else {
      speech = std::make_unique<MultiTaskModel>(ckpt_cfg.speech_config(), ckpt_cfg.seed);
      load_checkpoint(ckpt, speech->registry());
      std::string need = cascade ? "asr" : opt.task;
      if (!speech->has_task(need))
        throw ConfigError("checkpoint model has no '" + need + "' decoder");
    }

    std::unique_ptr<NmtModel> cascade_text;
    DecodeConfig asr_cfg = cfg.decode_config_for("asr");
    if (cascade) {
      auto nmt_ckpt = resolve_checkpoint(opt.cascade_nmt);
      auto nmt_cfg_text = checkpoint_config_text(nmt_ckpt);
      auto nmt_cfg = parse_experiment_config(nmt_cfg_text, nmt_ckpt + "/config.json");
      auto nmt_vocab = checkpoint_vocab(nmt_ckpt);
      if (nmt_vocab.content_hash() != vocab.content_hash())
        throw InputError("cascade checkpoints use different vocabularies");
      cascade_text = std::make_unique<NmtModel>(nmt_cfg.nmt_config(), nmt_cfg.seed);
      load_checkpoint(nmt_ckpt, cascade_text->registry());
      out << "cascade-nmt " << nmt_ckpt << " (config-hash " << to_hex(nmt_cfg.hash) << ")\n";
    }

    DecodeConfig dcfg = cfg.decode_config_for(opt.task);
    if (opt.beam_width) dcfg.beam_width = *opt.beam_width;
    if (opt.alpha) dcfg.alpha = *opt.alpha;
    dcfg.validate();
    asr_cfg.validate();

    auto manifest_path = pick_path(opt.manifest, cfg.data.eval_manifest, "eval manifest");
    auto m = load_manifest(manifest_path);
    if (m.empty()) throw InputError("decode manifest is empty: " + manifest_path);
    const bool needs_features = opt.task != "nmt" || cascade;
    if (needs_features && cfg.data.cache_dir.empty())
      throw UsageError("speech decoding needs data.cache_dir");

    if (fs::path(opt.out_path).has_parent_path())
      fs::create_directories(fs::path(opt.out_path).parent_path());
    std::ofstream nbest(opt.out_path, std::ios::trunc);
    if (!nbest) throw InputError("cannot write n-best file: " + opt.out_path);
    if (!opt.attention_dir.empty()) fs::create_directories(opt.attention_dir);

    int failures = 0;
    for (const auto& e : m.entries) {
      try {
        std::vector<Hypothesis> hyps;
        if (cascade) {
          auto feats = load_cached_features(cfg.data.cache_dir, e);
          auto res = decode_cascade(*speech, "asr", *cascade_text, feats, vocab, asr_cfg, dcfg);
          hyps = {res.translation};
        } else if (opt.task == "nmt") {
          hyps = beam_decode_text(*text, vocab.encode(normalize_text(e.source)), vocab, dcfg);
        } else {
          auto feats = load_cached_features(cfg.data.cache_dir, e);
          hyps = beam_decode_speech(*speech, opt.task, feats, vocab, dcfg);
        }
        for (size_t r = 0; r < hyps.size(); ++r)
          nbest << nbest_line(e.id, static_cast<int>(r) + 1, hyps[r], vocab) << "\n";
        if (!opt.attention_dir.empty() && !hyps.empty())
          write_attention_tsv((fs::path(opt.attention_dir) / (e.id + ".tsv")).string(), hyps[0]);
      } catch (const Error& ex) {
        ++failures;
        err << "decode " << e.id << ": " << ex.what() << "\n";
      }
    }
    out << "decoded " << (m.size() - failures) << "/" << m.size() << " -> " << opt.out_path
        << "\n";
    return failures ? 1 : 0;
  });
}

int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string hash_line;
    if (!opt.config_path.empty()) {
      auto cfg = load_experiment_config(opt.config_path);
      hash_line = "config-hash " + to_hex(cfg.hash) + "\n";
      out << hash_line;
    }
    auto report = evaluate_run(opt.nbest, opt.references, opt.task);
    out << (opt.task == "asr" ? "WER " : "BLEU ") << std::fixed << std::setprecision(2)
        << report.score << "\n";
    if (!opt.report_path.empty()) {
      if (fs::path(opt.report_path).has_parent_path())
        fs::create_directories(fs::path(opt.report_path).parent_path());
      std::ofstream rep(opt.report_path, std::ios::trunc);
      if (!rep) throw InputError("cannot write report: " + opt.report_path);
      rep << hash_line << report.text();
    }
    return 0;
  });
}

int cmd_make_toy_corpus(const ToyCorpusOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ToySpec spec;
    spec.utterances = opt.utterances;
    spec.seed = opt.seed;
    spec.reverse_targets = opt.reverse_targets;
    if (!opt.words.empty()) spec.words = opt.words;
    if (opt.out_dir.empty()) throw UsageError("toy corpus needs an output directory");
    auto m = make_toy_corpus(spec, opt.out_dir);
    auto manifest = (fs::path(opt.out_dir) / "manifest.jsonl").string();
    out << "toy corpus: " << m.size() << " utterances -> " << manifest << "\n";
    out << "manifest-hash " << to_hex(fnv1a64(slurp(manifest, "manifest"))) << "\n";
    return 0;
  });
}

int cmd_inspect(const InspectOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = load_experiment_config(opt.config_path);
    out << "config-hash " << to_hex(cfg.hash) << "\n";
    if (!cfg.model.tasks.empty()) {
      MultiTaskModel model(cfg.speech_config(), cfg.seed);
      print_param_report(out, "speech", model.registry(), model.task_names());
    }
    if (cfg.nmt_decoder) {
      NmtModel model(cfg.nmt_config(), cfg.seed);
      print_param_report(out, "text", model.registry(), {});
    }
    return 0;
  });
}

}  // namespace sqt
