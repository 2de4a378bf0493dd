#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ptts/autodiff/tensor.hpp"
#include "ptts/model/layers.hpp"

namespace ptts::adversary {

using model::ConvStackSpec;

/// 1 + sum over layers of (kernel - 1) * dilation. Throws on even kernels or
/// zero dilation.
std::size_t receptive_field(const ConvStackSpec& spec);
std::size_t receptive_field(const std::vector<model::ConvLayer>& layers);

/// Output frames (sorted) that change when one input frame is perturbed, for
/// every input position. `fn` maps [length, channels] to [length, ...].
using FrameFunction = std::function<ad::Tensor(const ad::Tensor&)>;
std::vector<std::vector<std::size_t>> perturbation_support(const FrameFunction& fn, std::size_t length,
                                                           std::size_t channels, std::uint64_t seed = 0);

/// Widest perturbation support observed over all input positions; equals the
/// receptive field when length >= receptive field.
std::size_t probe_receptive_field(const FrameFunction& fn, std::size_t length, std::size_t channels,
                                  std::uint64_t seed = 0);

}  // namespace ptts::adversary
