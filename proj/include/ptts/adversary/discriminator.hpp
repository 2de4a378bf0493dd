#pragma once

#include <cstddef>
#include <vector>

#include "ptts/model/components.hpp"
#include "ptts/model/layers.hpp"

namespace ptts::adversary {

using ad::Tensor;
using model::EmbeddingSequence;

inline constexpr std::size_t kFeatureMapCount = 7;

struct DiscriminatorOutput {
  Tensor scores;                     // [T]
  std::vector<Tensor> feature_maps;  // 7 maps of [T, hidden], main branch only
};

/// Projection-conditioned discriminator over frame-scale embeddings. Both
/// branches are PreConv -> 3 residual blocks -> PostConv stacks with the same
/// layout; the per-frame score is a linear readout of the main branch plus
/// its inner product with the conditioning branch.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::size_t channels, std::size_t hidden, std::size_t projection, const model::ConvStackSpec& spec,
                model::Rng& rng);

  DiscriminatorOutput operator()(const EmbeddingSequence& h, const EmbeddingSequence& h_cond) const;
  const model::ConvStack& main_branch() const { return main_; }
  const model::ConvStack& cond_branch() const { return cond_; }
  void collect(const std::string& prefix, model::ParamList& out) const;

 private:
  model::ConvStack main_;
  model::ConvStack cond_;
  model::Linear readout_;  // [projection, 1]
};

}  // namespace ptts::adversary
