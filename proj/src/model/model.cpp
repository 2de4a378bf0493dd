#include "ptts/model/model.hpp"

#include <algorithm>

namespace ptts::model {

namespace {
// Each component draws from its own stream so adding one never reshuffles
// the initial weights of the others.
Rng stream(const ModelConfig& c, std::uint64_t component) { return Rng(c.seed * 0x100000001b3ULL + component); }

template <typename T, typename... Args>
T build(const ModelConfig& c, std::uint64_t component, Args&&... args) {
  Rng rng = stream(c, component);
  return T(std::forward<Args>(args)..., rng);
}
}  // namespace

TTSModel::TTSModel(const ModelConfig& c)
    : phoneme_encoder(build<PhonemeEncoder>(c, 1, c.vocab, c.channels, c.encoder_blocks)),
      prosody_encoder(build<ProsodyEncoder>(c, 2, c.mel_bands, c.channels, c.encoder_blocks)),
      prosody_attention(build<ProsodyAttention>(c, 3, c.channels)),
      prosody_predictor(build<ProsodyPredictor>(c, 4, c.channels, c.encoder_blocks)),
      duration_predictor(build<DurationPredictor>(c, 5, c.channels)),
      variance_predictors(build<VariancePredictors>(c, 6, c.channels)),
      aligner(build<aligner::AlignerNet>(c, 7, c.mel_bands, c.channels)),
      auxiliary(build<AuxiliaryPredictor>(c, 8, c.channels, c.mel_bands, c.conv_layout)),
      vocoder(build<ToyVocoder>(c, 9, c.channels, c.hop, c.conv_layout)),
      discriminator(build<adversary::Discriminator>(c, 10, c.channels, c.disc_hidden, c.disc_projection, c.conv_layout)),
      config_(c) {}

ParamList TTSModel::parameters(Partition partition) const {
  ParamList out;
  switch (partition) {
    case Partition::Core:
      phoneme_encoder.collect("phoneme_encoder", out);
      prosody_encoder.collect("prosody_encoder", out);
      prosody_attention.collect("prosody_attention", out);
      variance_predictors.collect("variance", out);
      aligner.collect("aligner", out);
      auxiliary.collect("auxiliary", out);
      vocoder.collect("vocoder", out);
      break;
    case Partition::ProsodyPredictor:
      prosody_predictor.collect("prosody_predictor", out);
      break;
    case Partition::DurationPredictor:
      duration_predictor.collect("duration_predictor", out);
      break;
    case Partition::Discriminator:
      discriminator.collect("discriminator", out);
      break;
  }
  return out;
}

ParamList TTSModel::parameters() const {
  ParamList all;
  for (auto p : {Partition::Core, Partition::ProsodyPredictor, Partition::DurationPredictor, Partition::Discriminator}) {
    auto part = parameters(p);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

InferenceOutput TTSModel::infer(std::span<const std::size_t> phonemes) const {
  ad::NoGradGuard no_grad;
  const EmbeddingSequence h_ph = phoneme_encoder(phonemes);
  const EmbeddingSequence h_pred = prosody_predictor(h_ph);
  const Tensor log_dur = duration_predictor(h_ph);
  InferenceOutput out;
  out.durations = durations_from_log(log_dur.data());
  // Guards against runaway predictions from an untrained duration head.
  for (auto& d : out.durations) d = std::min<std::size_t>(d, kMaxInferenceFrames);
  const EmbeddingSequence combined{ad::add(h_ph.values, h_pred.values), Scale::Phoneme};
  const EmbeddingSequence frames = length_regulate(combined, out.durations);
  out.intermediate = frames.values;
  const Tensor wave = vocoder(frames);
  out.wave.assign(wave.data().begin(), wave.data().end());
  return out;
}

}  // namespace ptts::model
