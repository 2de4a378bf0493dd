#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "ptts/matrix.hpp"
#include "ptts/model/components.hpp"

namespace ptts::aligner {

using ad::Tensor;
using model::DurationVector;
using model::EmbeddingSequence;

class InvalidAlignment : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Row-stochastic T x N alignment, held in the log domain.
struct SoftAlignment {
  Tensor log_prob;  // [T, N]

  std::size_t frames() const { return log_prob.dim(0); }
  std::size_t phonemes() const { return log_prob.dim(1); }
  Matrix probabilities() const;

  /// Wraps a constant probability matrix (rows should sum to 1).
  static SoftAlignment from_probabilities(const Matrix& probabilities);
};

/// Binary monotonic alignment stored as the selected column of every frame.
struct HardAlignment {
  std::vector<std::size_t> columns;  // one per frame
  std::size_t phonemes = 0;

  std::size_t frames() const { return columns.size(); }
  Matrix to_matrix() const;

  /// Validates: one 1 per row, columns non-decreasing by at most one per row,
  /// starting at 0 and ending at N-1.
  static HardAlignment from_matrix(const Matrix& binary);
  void validate() const;
};

/// values[t][n] = softmax_n(-scale * ||phon_n - acous_t||^2).
SoftAlignment soft_alignment(const EmbeddingSequence& phon, const EmbeddingSequence& acous,
                             const Tensor& distance_scale);

/// -log of the total probability of all monotonic paths (forward algorithm
/// in log space). Throws when T < N.
Tensor forward_sum_loss(const SoftAlignment& soft);

/// Viterbi path through the soft matrix; ties keep the current column.
HardAlignment monotonic_best_path(const SoftAlignment& soft);
HardAlignment monotonic_best_path(const Matrix& log_prob);

DurationVector durations_from_path(const HardAlignment& hard);

/// -mean_t log soft[t][path(t)], i.e. KL(hard || soft) averaged over frames.
Tensor kl_binarization_loss(const HardAlignment& hard, const SoftAlignment& soft);

struct AlignLossTerms {
  Tensor forward_sum;
  Tensor binarization;
  Tensor duration;  // undefined when no duration prediction is supplied
  Tensor total;
};

/// forward_sum + kl + (optionally) duration MSE in the log domain, unit weights.
AlignLossTerms align_loss(const SoftAlignment& soft, const HardAlignment& hard, const Tensor* log_duration_pred = nullptr);

/// Learned projections of both sides and a distance scale. The mel is
/// normalized per band over the utterance before its projection. The phoneme
/// projection starts near zero, giving near-uniform soft alignments at init.
class AlignerNet {
 public:
  AlignerNet() = default;
  AlignerNet(std::size_t mel_bands, std::size_t channels, model::Rng& rng);

  SoftAlignment operator()(const EmbeddingSequence& phon, const Tensor& mel) const;
  EmbeddingSequence encode_acoustic(const Tensor& mel) const;
  EmbeddingSequence encode_phonemes(const EmbeddingSequence& phon) const;
  void collect(const std::string& prefix, model::ParamList& out) const;

 private:
  model::Linear projection_;
  model::Linear phoneme_projection_;
  Tensor distance_scale_;  // [1]
};

/// 8-bit binary PGM (P5), one row per frame, values in [0, 1] mapped to 0..255.
void write_pgm(const std::filesystem::path& path, const Matrix& values);

}  // namespace ptts::aligner
