#include "ptts/model/components.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ptts/signal/spectral.hpp"

namespace ptts::model {

namespace {

std::vector<EncoderBlock> make_blocks(std::size_t channels, std::size_t count, Rng& rng) {
  std::vector<EncoderBlock> blocks;
  for (std::size_t i = 0; i < count; ++i) blocks.emplace_back(channels, 2 * channels, 3, rng);
  return blocks;
}

Tensor run_blocks(const std::vector<EncoderBlock>& blocks, Tensor x) {
  for (const auto& b : blocks) x = b(x);
  return x;
}

void collect_blocks(const std::vector<EncoderBlock>& blocks, const std::string& prefix, ParamList& out) {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(prefix + ".block" + std::to_string(i), out);
}

}  // namespace

PhonemeEncoder::PhonemeEncoder(std::size_t vocab, std::size_t channels, std::size_t blocks, Rng& rng)
    : embedding_(random_normal(rng, {vocab, channels}, 1.0)), blocks_(make_blocks(channels, blocks, rng)) {}

EmbeddingSequence PhonemeEncoder::operator()(std::span<const std::size_t> ids) const {
  if (ids.empty()) throw std::invalid_argument("phoneme_encoder: empty phoneme sequence");
  for (std::size_t id : ids) {
    if (id >= vocab()) {
      throw std::out_of_range("phoneme_encoder: id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(vocab()));
    }
  }
  const std::vector<std::size_t> rows(ids.begin(), ids.end());
  Tensor x = ad::gather_rows(embedding_, rows);
  x = ad::add(x, positional_encoding(ids.size(), embedding_.dim(1)));
  return {run_blocks(blocks_, x), Scale::Phoneme};
}

void PhonemeEncoder::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".embedding", embedding_});
  collect_blocks(blocks_, prefix, out);
}

ProsodyEncoder::ProsodyEncoder(std::size_t mel_bands, std::size_t channels, std::size_t blocks, Rng& rng)
    : input_(mel_bands, channels, rng), blocks_(make_blocks(channels, blocks, rng)) {}

EmbeddingSequence ProsodyEncoder::operator()(const Tensor& mel) const {
  return {run_blocks(blocks_, input_(mel)), Scale::Frame};
}

void ProsodyEncoder::collect(const std::string& prefix, ParamList& out) const {
  input_.collect(prefix + ".input", out);
  collect_blocks(blocks_, prefix, out);
}

Tensor attend(const Tensor& queries, const Tensor& keys, const Tensor& values) {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(queries.dim(1)));
  const Tensor weights = ad::softmax(ad::scale(ad::matmul(queries, ad::transpose(keys)), inv_sqrt), 1);
  return ad::matmul(weights, values);
}

ProsodyAttention::ProsodyAttention(std::size_t channels, Rng& rng)
    : query(channels, channels, rng), key(channels, channels, rng, 1.0, false) {}

EmbeddingSequence ProsodyAttention::operator()(const EmbeddingSequence& h_ph,
                                               const EmbeddingSequence& h_pr_frame) const {
  if (h_ph.dim() != h_pr_frame.dim()) throw ad::ShapeError("prosody_attention", h_ph.values.shape(), h_pr_frame.values.shape());
  return {attend(query(h_ph.values), key(h_pr_frame.values), h_pr_frame.values), Scale::Phoneme};
}

Tensor ProsodyAttention::weights(const EmbeddingSequence& h_ph, const EmbeddingSequence& h_pr_frame) const {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(h_ph.dim()));
  return ad::softmax(
      ad::scale(ad::matmul(query(h_ph.values), ad::transpose(key(h_pr_frame.values))), inv_sqrt), 1);
}

void ProsodyAttention::collect(const std::string& prefix, ParamList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
}

ProsodyPredictor::ProsodyPredictor(std::size_t channels, std::size_t blocks, Rng& rng)
    : blocks_(make_blocks(channels, blocks, rng)), head_(channels, channels, rng) {}

EmbeddingSequence ProsodyPredictor::operator()(const EmbeddingSequence& h_ph) const {
  return {head_(run_blocks(blocks_, h_ph.values)), Scale::Phoneme};
}

void ProsodyPredictor::collect(const std::string& prefix, ParamList& out) const {
  collect_blocks(blocks_, prefix, out);
  head_.collect(prefix + ".head", out);
}

DurationPredictor::DurationPredictor(std::size_t channels, Rng& rng)
    : conv1_(channels, channels, 3, 1, rng),
      conv2_(channels, channels, 3, 1, rng),
      norm1_(channels),
      norm2_(channels),
      head_(channels, 1, rng) {}

Tensor DurationPredictor::operator()(const EmbeddingSequence& h_ph) const {
  Tensor x = ad::stop_gradient(h_ph.values);
  x = ad::leaky_relu(norm1_(conv1_(x)));
  x = ad::leaky_relu(norm2_(conv2_(x)));
  return ad::reshape(head_(x), {h_ph.length()});
}

void DurationPredictor::collect(const std::string& prefix, ParamList& out) const {
  conv1_.collect(prefix + ".conv1", out);
  norm1_.collect(prefix + ".norm1", out);
  conv2_.collect(prefix + ".conv2", out);
  norm2_.collect(prefix + ".norm2", out);
  head_.collect(prefix + ".head", out);
}

Tensor duration_log_target(const DurationVector& durations) {
  std::vector<double> v(durations.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::log1p(static_cast<double>(durations[i]));
  const std::size_t n = v.size();
  return Tensor::from({n}, std::move(v));
}

DurationVector durations_from_log(std::span<const double> log_durations) {
  DurationVector d(log_durations.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double frames = std::round(std::exp(log_durations[i]) - 1.0);
    d[i] = frames < 1.0 ? 1 : static_cast<std::size_t>(frames);
  }
  return d;
}

Tensor duration_loss(const Tensor& log_pred, const DurationVector& target) {
  return ad::mean(ad::square(ad::sub(log_pred, duration_log_target(target))));
}

VarianceHead::VarianceHead(std::size_t channels, Rng& rng)
    : conv1_(channels, channels, 3, 1, rng), conv2_(channels, 1, 3, 1, rng) {}

Tensor VarianceHead::operator()(const Tensor& frames) const {
  const Tensor h = ad::leaky_relu(conv1_(frames));
  return ad::reshape(conv2_(h), {frames.dim(0)});
}

void VarianceHead::collect(const std::string& prefix, ParamList& out) const {
  conv1_.collect(prefix + ".conv1", out);
  conv2_.collect(prefix + ".conv2", out);
}

VariancePredictors::VariancePredictors(std::size_t channels, Rng& rng) : pitch_(channels, rng), energy_(channels, rng) {}

VariancePrediction VariancePredictors::operator()(const EmbeddingSequence& h_pr_frame) const {
  return {pitch_(h_pr_frame.values), energy_(h_pr_frame.values)};
}

void VariancePredictors::collect(const std::string& prefix, ParamList& out) const {
  pitch_.collect(prefix + ".pitch", out);
  energy_.collect(prefix + ".energy", out);
}

PitchStats pitch_stats(std::span<const std::vector<double>> voiced_tracks) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& track : voiced_tracks) {
    for (double f : track) {
      if (f <= 0.0) continue;
      sum += f;
      sq += f * f;
      ++n;
    }
  }
  if (n == 0) return {};
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(sq / static_cast<double>(n) - mean * mean, 0.0);
  return {mean, var > 1e-12 ? std::sqrt(var) : 1.0};
}

Tensor variance_loss(const VariancePrediction& pred, const signal::ProsodyTargets& targets, const PitchStats& stats) {
  const std::size_t frames = pred.pitch.numel();
  if (targets.pitch.size() != frames || targets.energy.size() != pred.energy.numel()) {
    throw ad::ShapeError("variance_loss", "prediction of " + std::to_string(frames) + " frames vs targets of " +
                                              std::to_string(targets.pitch.size()));
  }
  std::vector<double> mask(frames, 0.0), pitch(frames, 0.0);
  std::size_t voiced = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (targets.pitch[t] > 0.0) {
      mask[t] = 1.0;
      pitch[t] = (targets.pitch[t] - stats.mean) / stats.stddev;
      ++voiced;
    }
  }
  const Tensor energy_target = Tensor::from({frames}, targets.energy);
  const Tensor energy_loss = ad::mean(ad::abs(ad::sub(pred.energy, energy_target)));
  if (voiced == 0) return energy_loss;
  const Tensor diff = ad::abs(ad::sub(pred.pitch, Tensor::from({frames}, std::move(pitch))));
  const Tensor pitch_loss =
      ad::scale(ad::sum(ad::mul(diff, Tensor::from({frames}, std::move(mask)))), 1.0 / static_cast<double>(voiced));
  return ad::add(pitch_loss, energy_loss);
}

EmbeddingSequence length_regulate(const EmbeddingSequence& emb, const DurationVector& durations) {
  if (durations.size() != emb.length()) {
    throw std::invalid_argument("length_regulate: " + std::to_string(durations.size()) + " durations for " +
                                std::to_string(emb.length()) + " phonemes");
  }
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < durations.size(); ++i) rows.insert(rows.end(), durations[i], i);
  if (rows.empty()) throw std::invalid_argument("length_regulate: durations sum to zero");
  return {ad::gather_rows(emb.values, rows), Scale::Frame};
}

AuxiliaryPredictor::AuxiliaryPredictor(std::size_t channels, std::size_t mel_bands, const ConvStackSpec& spec, Rng& rng)
    : stack_(channels, channels, mel_bands, spec, true, rng) {}

Tensor AuxiliaryPredictor::operator()(const EmbeddingSequence& intermediate) const { return stack_(intermediate.values); }

void AuxiliaryPredictor::collect(const std::string& prefix, ParamList& out) const { stack_.collect(prefix, out); }

ToyVocoder::ToyVocoder(std::size_t channels, std::size_t hop, const ConvStackSpec& spec, Rng& rng)
    : stack_(channels, channels, channels, spec, false, rng), upsample_(channels, hop, rng, 0.1) {}

Tensor ToyVocoder::frame_features(const EmbeddingSequence& intermediate) const {
  return ad::leaky_relu(stack_(intermediate.values));
}

Tensor ToyVocoder::operator()(const EmbeddingSequence& intermediate) const {
  const Tensor up = upsample_(frame_features(intermediate));
  return ad::reshape(up, {up.numel()});
}

void ToyVocoder::collect(const std::string& prefix, ParamList& out) const {
  stack_.collect(prefix, out);
  upsample_.collect(prefix + ".upsample", out);
}

Tensor stft_l1_loss(const Tensor& predicted, std::span<const double> target) {
  if (predicted.numel() != target.size()) {
    throw ad::ShapeError("stft_l1_loss", "predicted wave has " + std::to_string(predicted.numel()) +
                                             " samples, target " + std::to_string(target.size()));
  }
  const Tensor target_wave = Tensor::from({target.size()}, std::vector<double>(target.begin(), target.end()));
  return ad::mean(ad::abs(ad::sub(signal::stft_magnitude(predicted), signal::stft_magnitude(target_wave))));
}

}  // namespace ptts::model
