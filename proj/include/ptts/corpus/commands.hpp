#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ptts/corpus/corpus.hpp"
#include "ptts/trainer/config.hpp"

namespace ptts::corpus {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitMissingInput = 2;
inline constexpr int kExitConfig = 3;

struct GenCorpusOptions {
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> train;
  std::optional<std::size_t> test;
  // LJSpeech-style ingestion instead of synthesis
  std::optional<std::filesystem::path> ljspeech_metadata;
  std::optional<std::filesystem::path> wav_dir;
};

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::filesystem::path> manifest;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> ablate;  // no-cond-disc, no-prosody-align
  std::optional<std::size_t> eval_interval;
  std::optional<std::size_t> steps;
};

struct EvalOptions {
  std::filesystem::path checkpoint;  // a file, or a directory of step_*.ckpt for a curve
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> manifest;
  std::string split = "test";
  std::filesystem::path out;
  bool reference = false;  // score the reference waves against themselves
};

struct AlignOptions {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> manifest;
  std::string utterance;
  std::filesystem::path out;
};

struct SynthOptions {
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> config;
  std::vector<std::size_t> phonemes;
  std::filesystem::path out;
};

/// Config from --config, else config.txt of the run owning `checkpoint`,
/// else defaults; then command-line overrides.
trainer::TrainConfig resolve_config(const std::optional<std::filesystem::path>& config,
                                    const std::filesystem::path& checkpoint = {});

trainer::TrainConfig apply_ablations(trainer::TrainConfig config, const std::vector<std::string>& ablate);

int cmd_gen_corpus(const GenCorpusOptions& options, std::ostream& out, std::ostream& err);
int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const EvalOptions& options, std::ostream& out, std::ostream& err);
int cmd_align(const AlignOptions& options, std::ostream& out, std::ostream& err);
int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err);

}  // namespace ptts::corpus
