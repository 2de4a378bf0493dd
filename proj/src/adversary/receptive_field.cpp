#include "ptts/adversary/receptive_field.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ptts::adversary {

std::size_t receptive_field(const std::vector<model::ConvLayer>& layers) {
  std::size_t rf = 1;
  for (const auto& layer : layers) {
    if (layer.kernel % 2 == 0) {
      throw std::invalid_argument("receptive_field: kernel " + std::to_string(layer.kernel) +
                                  " is even; same padding needs odd kernels");
    }
    if (layer.dilation == 0) throw std::invalid_argument("receptive_field: dilation must be >= 1");
    rf += (layer.kernel - 1) * layer.dilation;
  }
  return rf;
}

std::size_t receptive_field(const ConvStackSpec& spec) { return receptive_field(spec.layers); }

std::vector<std::vector<std::size_t>> perturbation_support(const FrameFunction& fn, std::size_t length,
                                                           std::size_t channels, std::uint64_t seed) {
  ad::NoGradGuard no_grad;
  model::Rng rng(seed);
  std::vector<double> base(length * channels);
  for (double& v : base) v = rng.normal();
  const ad::Tensor reference = fn(ad::Tensor::from({length, channels}, base));
  const std::size_t per_frame = reference.numel() / reference.dim(0);

  std::vector<std::vector<std::size_t>> support(length);
  for (std::size_t p = 0; p < length; ++p) {
    std::vector<double> perturbed = base;
    for (std::size_t c = 0; c < channels; ++c) perturbed[p * channels + c] += 0.5 + rng.uniform();
    const ad::Tensor out = fn(ad::Tensor::from({length, channels}, std::move(perturbed)));
    for (std::size_t t = 0; t < reference.dim(0); ++t) {
      for (std::size_t j = 0; j < per_frame; ++j) {
        if (out.data()[t * per_frame + j] != reference.data()[t * per_frame + j]) {
          support[p].push_back(t);
          break;
        }
      }
    }
  }
  return support;
}

std::size_t probe_receptive_field(const FrameFunction& fn, std::size_t length, std::size_t channels,
                                  std::uint64_t seed) {
  std::size_t widest = 0;
  for (const auto& frames : perturbation_support(fn, length, channels, seed)) {
    if (!frames.empty()) widest = std::max(widest, frames.back() - frames.front() + 1);
  }
  return widest;
}

}  // namespace ptts::adversary
