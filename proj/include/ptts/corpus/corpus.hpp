#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptts/trainer/trainer.hpp"

namespace ptts::corpus {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::string id;
  std::vector<std::size_t> phonemes;
  std::string wave_path;  // relative paths resolve against the manifest directory
  std::string split;      // train | val | test
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::vector<ManifestEntry> split(const std::string& name) const;
  const ManifestEntry& find(const std::string& id) const;
  std::filesystem::path resolve(const ManifestEntry& entry) const;
  /// Unique ids, known split tags and (when vocab > 0) ids inside the vocabulary.
  void validate(std::size_t vocab = 0) const;
};

/// Tab-separated: id, space-separated phoneme ids, wave path, split.
void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest read_manifest(const std::filesystem::path& path);

enum class Contour { Constant, Rising, Falling };

struct SyntheticSpec {
  std::size_t train_utterances = 100;
  std::size_t val_utterances = 0;
  std::size_t test_utterances = 10;
  std::size_t vocab = 40;
  std::size_t min_phonemes = 4;
  std::size_t max_phonemes = 8;
  std::size_t min_duration = 3;  // frames, per-phoneme base duration range
  std::size_t max_duration = 12;
  std::size_t duration_jitter = 1;  // +- frames around the base
  double min_pitch = 100.0;
  double max_pitch = 250.0;
  double contour_depth = 0.2;  // relative f0 change across a phoneme
  std::size_t harmonics = 3;
  double noise_level = 0.01;
  std::uint64_t seed = 7;
  double sample_rate = 22050.0;
  std::size_t hop = 256;
  std::size_t win = 1024;

  void validate() const;
};

/// Fixed acoustic identity of one phoneme symbol.
struct PhonemeVoice {
  double base_pitch = 0.0;
  Contour contour = Contour::Constant;
  double amplitude = 0.0;
  std::vector<double> harmonic_weights;
  std::size_t base_duration = 0;
};

std::vector<PhonemeVoice> make_voices(const SyntheticSpec& spec);

struct RenderedUtterance {
  std::vector<double> samples;
  std::vector<double> frame_pitch;  // Hz at each analysis frame centre
};

/// Harmonic rendering of a phoneme/duration sequence: sum(d)*hop + (win-hop)
/// samples so the analysis yields exactly sum(d) frames.
RenderedUtterance render(const SyntheticSpec& spec, const std::vector<PhonemeVoice>& voices,
                         const std::vector<std::size_t>& phonemes, const std::vector<std::size_t>& durations,
                         std::uint64_t noise_seed);

struct TruthEntry {
  std::string id;
  std::vector<std::size_t> durations;
  std::vector<double> frame_pitch;
};

void write_truth(const std::filesystem::path& path, const std::vector<TruthEntry>& truth);
std::vector<TruthEntry> read_truth(const std::filesystem::path& path);

/// Writes wavs/, manifest.tsv and truth.tsv under out_dir.
CorpusManifest gen_corpus(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

/// LJSpeech-style ingestion: `metadata` lines are `id|phoneme ids` (ids
/// space-separated, grapheme conversion done beforehand), waves are
/// `<wav_dir>/<id>.wav`. The last `test_count` entries become the test split.
CorpusManifest ingest_ljspeech(const std::filesystem::path& metadata, const std::filesystem::path& wav_dir,
                               std::size_t test_count);

/// Loads and analyses every entry of a split.
std::vector<trainer::Example> load_examples(const CorpusManifest& manifest, const std::string& split);

}  // namespace ptts::corpus
