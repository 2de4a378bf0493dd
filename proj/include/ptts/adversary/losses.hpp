#pragma once

#include <vector>

#include "ptts/adversary/discriminator.hpp"

namespace ptts::adversary {

/// mean (s_real - 1)^2 + mean s_fake^2. `fake` must come from detached
/// generator outputs.
Tensor lsgan_d_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake);

/// mean (s_fake - 1)^2
Tensor lsgan_g_loss(const DiscriminatorOutput& fake);

/// Sum over the 7 maps of the element-mean absolute difference. Real maps are
/// treated as constants.
Tensor feature_matching_loss(const std::vector<Tensor>& fm_pred, const std::vector<Tensor>& fm_real);

/// Element-mean absolute difference; the target is treated as a constant.
Tensor recon_loss(const Tensor& h_pred, const Tensor& h_target);

struct ProsodyLossTerms {
  Tensor adversarial;       // undefined before the adversarial stage
  Tensor feature_matching;  // undefined before the adversarial stage
  Tensor reconstruction;
  Tensor total;
};

/// L_G = lsgan_g + recon + fm with unit weights; only recon when
/// `adversarial_active` is false (warm-up or discriminator ablation).
ProsodyLossTerms prosody_g_loss(const DiscriminatorOutput* fake, const DiscriminatorOutput* real,
                                const Tensor& h_pred, const Tensor& h_target, bool adversarial_active);

}  // namespace ptts::adversary
