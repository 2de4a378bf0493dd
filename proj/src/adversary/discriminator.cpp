#include "ptts/adversary/discriminator.hpp"

#include <stdexcept>
#include <string>

namespace ptts::adversary {

namespace {
// Keeps the initial projection term near unit scale.
constexpr double kPostGain = 0.25;
}  // namespace

Discriminator::Discriminator(std::size_t channels, std::size_t hidden, std::size_t projection,
                             const model::ConvStackSpec& spec, model::Rng& rng)
    : main_(channels, hidden, projection, spec, false, rng, kPostGain),
      cond_(channels, hidden, projection, spec, false, rng, kPostGain),
      readout_(projection, 1, rng) {}

DiscriminatorOutput Discriminator::operator()(const EmbeddingSequence& h, const EmbeddingSequence& h_cond) const {
  if (h.length() != h_cond.length()) {
    throw std::invalid_argument("discriminator: input has " + std::to_string(h.length()) +
                                " frames but condition has " + std::to_string(h_cond.length()));
  }
  model::ConvStackOutput main = main_.forward(h.values);
  const Tensor cond = cond_(h_cond.values);
  const std::size_t frames = h.length();
  const Tensor unconditional = ad::reshape(readout_(main.output), {frames});
  const Tensor projection = ad::sum(ad::mul(main.output, cond), 1);
  return {ad::add(unconditional, projection), std::move(main.feature_maps)};
}

void Discriminator::collect(const std::string& prefix, model::ParamList& out) const {
  main_.collect(prefix + ".main", out);
  cond_.collect(prefix + ".cond", out);
  readout_.collect(prefix + ".readout", out);
}

}  // namespace ptts::adversary
