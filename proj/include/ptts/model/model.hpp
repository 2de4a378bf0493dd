#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ptts/adversary/discriminator.hpp"
#include "ptts/aligner/aligner.hpp"
#include "ptts/model/components.hpp"

namespace ptts::model {

struct ModelConfig {
  std::size_t vocab = 40;
  std::size_t channels = 32;
  std::size_t encoder_blocks = 2;
  std::size_t mel_bands = 80;
  std::size_t hop = 256;
  std::size_t disc_hidden = 32;
  std::size_t disc_projection = 128;
  ConvStackSpec conv_layout{};
  std::uint64_t seed = 1;
};

inline constexpr std::size_t kMaxInferenceFrames = 200;

/// Which optimizer partition a parameter belongs to.
enum class Partition { Core, ProsodyPredictor, DurationPredictor, Discriminator };

struct InferenceOutput {
  DurationVector durations;
  Tensor intermediate;  // [T, C]
  std::vector<double> wave;
};

/// Every trainable component of the system, built deterministically from
/// the config seed.
class TTSModel {
 public:
  explicit TTSModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  PhonemeEncoder phoneme_encoder;
  ProsodyEncoder prosody_encoder;
  ProsodyAttention prosody_attention;
  ProsodyPredictor prosody_predictor;
  DurationPredictor duration_predictor;
  VariancePredictors variance_predictors;
  aligner::AlignerNet aligner;
  AuxiliaryPredictor auxiliary;
  ToyVocoder vocoder;
  adversary::Discriminator discriminator;

  /// Stable-order named parameters; the whole model when no partition given.
  ParamList parameters() const;
  ParamList parameters(Partition partition) const;

  /// Text-only path: encoder -> prosody predictor + duration predictor ->
  /// length regulation -> vocoder.
  InferenceOutput infer(std::span<const std::size_t> phonemes) const;

 private:
  ModelConfig config_;
};

}  // namespace ptts::model
