#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ptts/model/layers.hpp"
#include "ptts/signal/pitch.hpp"

namespace ptts::model {

enum class Scale { Phoneme, Frame };

struct EmbeddingSequence {
  Tensor values;  // [length, dim]
  Scale scale = Scale::Phoneme;

  std::size_t length() const { return values.dim(0); }
  std::size_t dim() const { return values.dim(1); }
};

/// Frames per phoneme.
using DurationVector = std::vector<std::size_t>;

class PhonemeEncoder {
 public:
  PhonemeEncoder() = default;
  PhonemeEncoder(std::size_t vocab, std::size_t channels, std::size_t blocks, Rng& rng);

  /// Throws std::out_of_range on an id outside the vocabulary.
  EmbeddingSequence operator()(std::span<const std::size_t> ids) const;
  std::size_t vocab() const { return embedding_.dim(0); }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Tensor embedding_;  // [vocab, channels]
  std::vector<EncoderBlock> blocks_;
};

class ProsodyEncoder {
 public:
  ProsodyEncoder() = default;
  ProsodyEncoder(std::size_t mel_bands, std::size_t channels, std::size_t blocks, Rng& rng);

  /// mel: [T, bands] -> frame-scale h'_pr.
  EmbeddingSequence operator()(const Tensor& mel) const;
  Linear& input_projection() { return input_; }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Linear input_;
  std::vector<EncoderBlock> blocks_;
};

/// Scaled dot-product attention whose output rows are convex combinations of
/// the value rows. queries [N, C], keys [T, C], values [T, D] -> [N, D].
Tensor attend(const Tensor& queries, const Tensor& keys, const Tensor& values);

/// Maps frame-scale prosody features to phoneme scale with h_ph as queries.
class ProsodyAttention {
 public:
  ProsodyAttention() = default;
  ProsodyAttention(std::size_t channels, Rng& rng);

  EmbeddingSequence operator()(const EmbeddingSequence& h_ph, const EmbeddingSequence& h_pr_frame) const;
  /// Attention weights [N, T] for inspection.
  Tensor weights(const EmbeddingSequence& h_ph, const EmbeddingSequence& h_pr_frame) const;
  void collect(const std::string& prefix, ParamList& out) const;

  Linear query, key;
};

class ProsodyPredictor {
 public:
  ProsodyPredictor() = default;
  ProsodyPredictor(std::size_t channels, std::size_t blocks, Rng& rng);

  EmbeddingSequence operator()(const EmbeddingSequence& h_ph) const;
  Linear& head() { return head_; }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  std::vector<EncoderBlock> blocks_;
  Linear head_;
};

/// Two conv + layer-norm + leaky-ReLU layers and a linear head predicting
/// log(1 + duration) per phoneme. The input is detached from the encoder.
class DurationPredictor {
 public:
  DurationPredictor() = default;
  DurationPredictor(std::size_t channels, Rng& rng);

  Tensor operator()(const EmbeddingSequence& h_ph) const;  // [N]
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Conv1d conv1_, conv2_;
  LayerNorm norm1_, norm2_;
  Linear head_;
};

Tensor duration_log_target(const DurationVector& durations);
/// max(1, round(exp(pred) - 1)) per phoneme.
DurationVector durations_from_log(std::span<const double> log_durations);
/// Mean squared error in the log domain.
Tensor duration_loss(const Tensor& log_pred, const DurationVector& target);

/// One conv head predicting a scalar per frame.
class VarianceHead {
 public:
  VarianceHead() = default;
  VarianceHead(std::size_t channels, Rng& rng);
  Tensor operator()(const Tensor& frames) const;  // [T]
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Conv1d conv1_, conv2_;
};

struct VariancePrediction {
  Tensor pitch;   // [T], normalized
  Tensor energy;  // [T]
};

class VariancePredictors {
 public:
  VariancePredictors() = default;
  VariancePredictors(std::size_t channels, Rng& rng);
  VariancePrediction operator()(const EmbeddingSequence& h_pr_frame) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  VarianceHead pitch_, energy_;
};

/// Normalization of voiced pitch values (Hz) to zero mean / unit variance.
struct PitchStats {
  double mean = 0.0;
  double stddev = 1.0;
};

PitchStats pitch_stats(std::span<const std::vector<double>> voiced_tracks);

/// Masked L1 on voiced frames (0 when nothing is voiced) plus energy L1.
Tensor variance_loss(const VariancePrediction& pred, const signal::ProsodyTargets& targets, const PitchStats& stats);

/// Repeats row i of `emb` durations[i] times. Throws when the total is zero.
EmbeddingSequence length_regulate(const EmbeddingSequence& emb, const DurationVector& durations);

/// PreConv -> 3 residual blocks with trailing layer norm -> PostConv(mel bands).
class AuxiliaryPredictor {
 public:
  AuxiliaryPredictor() = default;
  AuxiliaryPredictor(std::size_t channels, std::size_t mel_bands, const ConvStackSpec& spec, Rng& rng);

  Tensor operator()(const EmbeddingSequence& intermediate) const;  // [T, bands]
  ConvStack& stack() { return stack_; }
  const ConvStack& stack() const { return stack_; }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  ConvStack stack_;
};

/// Conv stack followed by a stride = kernel = hop transposed convolution to
/// one output channel.
class ToyVocoder {
 public:
  ToyVocoder() = default;
  ToyVocoder(std::size_t channels, std::size_t hop, const ConvStackSpec& spec, Rng& rng);

  Tensor operator()(const EmbeddingSequence& intermediate) const;  // [T * hop]
  /// Frame-rate conv stack output before upsampling, [T, C].
  Tensor frame_features(const EmbeddingSequence& intermediate) const;
  const ConvStack& stack() const { return stack_; }
  std::size_t hop() const { return upsample_.weight.dim(1); }
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  ConvStack stack_;
  Linear upsample_;  // [C, hop]
};

/// Single-resolution STFT magnitude L1 between two waves of equal length.
Tensor stft_l1_loss(const Tensor& predicted, std::span<const double> target);

}  // namespace ptts::model
