#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ptts/corpus/commands.hpp"

int main(int argc, char** argv) {
  using namespace ptts::corpus;
  CLI::App app{"ptts: desk-scale adversarial-prosody TTS front-end"};
  app.require_subcommand(1);

  GenCorpusOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "render the synthetic corpus");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "corpus seed");
  gen_cmd->add_option("--train", gen.train, "training utterances");
  gen_cmd->add_option("--test", gen.test, "test utterances");
  gen_cmd->add_option("--ljspeech-metadata", gen.ljspeech_metadata, "ingest an `id|phoneme ids` metadata file instead");
  gen_cmd->add_option("--wav-dir", gen.wav_dir, "wave directory for ingestion (default: <metadata dir>/wavs)");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", train.config, "key = value config file");
  train_cmd->add_option("--out", train.out, "run directory")->required();
  train_cmd->add_option("--manifest", train.manifest, "corpus manifest (overrides config)");
  train_cmd->add_option("--seed", train.seed, "model and batching seed");
  train_cmd->add_option("--ablate", train.ablate, "no-cond-disc and/or no-prosody-align");
  train_cmd->add_option("--eval-interval", train.eval_interval, "steps between evaluations and checkpoints");
  train_cmd->add_option("--steps", train.steps, "total steps (boundaries rescale to 30%/35%)");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "MCD-DTW of synthesized test utterances");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file or checkpoints directory");
  eval_cmd->add_option("--config", eval.config, "config file (default: the run's config.txt)");
  eval_cmd->add_option("--manifest", eval.manifest, "corpus manifest");
  eval_cmd->add_option("--split", eval.split, "manifest split");
  eval_cmd->add_option("--out", eval.out, "metrics CSV")->required();
  eval_cmd->add_flag("--reference", eval.reference, "score reference waves against themselves");

  AlignOptions align;
  auto* align_cmd = app.add_subcommand("align", "export soft/hard alignments of one utterance");
  align_cmd->add_option("--checkpoint", align.checkpoint, "checkpoint file")->required();
  align_cmd->add_option("--config", align.config, "config file");
  align_cmd->add_option("--manifest", align.manifest, "corpus manifest");
  align_cmd->add_option("--utterance", align.utterance, "utterance id")->required();
  align_cmd->add_option("--out", align.out, "output directory")->required();

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "synthesize a phoneme id sequence");
  synth_cmd->add_option("--checkpoint", synth.checkpoint, "checkpoint file")->required();
  synth_cmd->add_option("--config", synth.config, "config file");
  synth_cmd->add_option("--phonemes", synth.phonemes, "phoneme ids")->required()->delimiter(',');
  synth_cmd->add_option("--out", synth.out, "output WAV")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen_cmd->parsed()) return cmd_gen_corpus(gen, std::cout, std::cerr);
  if (train_cmd->parsed()) return cmd_train(train, std::cout, std::cerr);
  if (eval_cmd->parsed()) return cmd_eval(eval, std::cout, std::cerr);
  if (align_cmd->parsed()) return cmd_align(align, std::cout, std::cerr);
  if (synth_cmd->parsed()) return cmd_synth(synth, std::cout, std::cerr);
  return kExitFailure;
}
