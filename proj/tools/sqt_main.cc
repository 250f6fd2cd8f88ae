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

#include <iostream>

#include "CLI11.hpp"
#include "sqt/commands.h"

int main(int argc, char** argv) {
  CLI::App app{"sqt: speech recognition and translation workbench"};
  app.require_subcommand(1);

  sqt::FeaturizeOptions fo;
  auto* feat = app.add_subcommand("featurize", "Extract and cache log-mel features");
  feat->add_option("--config", fo.config_path, "Experiment config file")->required();
  feat->add_option("--manifest", fo.manifest, "Manifest override (default: data.train_manifest)");
  feat->add_option("--cache", fo.cache_dir, "Cache dir override (default: data.cache_dir)");

  sqt::TrainOptions to;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", to.config_path, "Experiment config file")->required();
  train->add_option("--task", to.task, "asr | st | nmt | multitask")->required();
  train->add_option("--out", to.out_dir, "Run directory for checkpoints and logs")->required();
  train->add_flag("--resume", to.resume, "Continue from <out>/LATEST (config hash must match)");

  sqt::DecodeOptions dopt;
  auto* dec = app.add_subcommand("decode", "Beam-decode a manifest to an n-best file");
  dec->add_option("--config", dopt.config_path, "Experiment config file")->required();
  dec->add_option("--checkpoint", dopt.checkpoint, "Checkpoint dir (or train dir with LATEST)")
      ->required();
  dec->add_option("--task", dopt.task, "asr | st | nmt")->required();
  dec->add_option("--manifest", dopt.manifest, "Manifest override (default: data.eval_manifest)");
  dec->add_option("--out", dopt.out_path, "Output n-best file")->required();
  dec->add_option("--attention", dopt.attention_dir,
                  "Directory for per-utterance alignment TSVs (1-best)");
  dec->add_option("--cascade-nmt", dopt.cascade_nmt,
                  "Text-model checkpoint; pipes ASR 1-best through it (use with --task st)");
  dec->add_option("--beam", dopt.beam_width, "Beam width override");
  dec->add_option("--alpha", dopt.alpha, "Length-normalization override");

  sqt::EvaluateOptions eo;
  auto* ev = app.add_subcommand("evaluate", "Score an n-best file against references");
  ev->add_option("--nbest", eo.nbest, "N-best file from decode")->required();
  ev->add_option("--refs", eo.references, "Reference file(s), id<TAB>text; repeatable")
      ->required()
      ->expected(-1);
  ev->add_option("--task", eo.task, "asr (WER) | st (BLEU)")->required();
  ev->add_option("--report", eo.report_path, "Write the detailed report here");
  ev->add_option("--config", eo.config_path, "Optional config; its hash is recorded");

  sqt::ToyCorpusOptions tco;
  auto* toy = app.add_subcommand("make-toy-corpus", "Generate a synthetic tone-word corpus");
  toy->add_option("--out", tco.out_dir, "Corpus directory")->required();
  toy->add_option("--utterances", tco.utterances, "Number of utterances");
  toy->add_option("--seed", tco.seed, "Generation seed");
  toy->add_option("--words", tco.words, "Word inventory override")->expected(-1);
  toy->add_flag("!--no-reverse", tco.reverse_targets,
                "Keep target word order (default reverses it)");

  sqt::InspectOptions io;
  auto* ins = app.add_subcommand("inspect", "Print per-subnetwork parameter counts");
  ins->add_option("--config", io.config_path, "Experiment config file")->required();

  CLI11_PARSE(app, argc, argv);

  if (feat->parsed()) return sqt::cmd_featurize(fo, std::cout, std::cerr);
  if (train->parsed()) return sqt::cmd_train(to, std::cout, std::cerr);
  if (dec->parsed()) return sqt::cmd_decode(dopt, std::cout, std::cerr);
  if (ev->parsed()) return sqt::cmd_evaluate(eo, std::cout, std::cerr);
  if (toy->parsed()) return sqt::cmd_make_toy_corpus(tco, std::cout, std::cerr);
  if (ins->parsed()) return sqt::cmd_inspect(io, std::cout, std::cerr);
  return 1;
}
