#include "ptts/adversary/losses.hpp"

#include <stdexcept>

namespace ptts::adversary {

namespace {
Tensor l1_mean(const Tensor& pred, const Tensor& target, const char* op) {
  if (pred.shape() != target.shape()) throw ad::ShapeError(op, pred.shape(), target.shape());
  return ad::mean(ad::abs(ad::sub(pred, ad::stop_gradient(target))));
}
}  // namespace

Tensor lsgan_d_loss(const DiscriminatorOutput& real, const DiscriminatorOutput& fake) {
  const Tensor real_term = ad::mean(ad::square(ad::add_scalar(real.scores, -1.0)));
  const Tensor fake_term = ad::mean(ad::square(fake.scores));
  return ad::add(real_term, fake_term);
}

Tensor lsgan_g_loss(const DiscriminatorOutput& fake) {
  return ad::mean(ad::square(ad::add_scalar(fake.scores, -1.0)));
}

Tensor feature_matching_loss(const std::vector<Tensor>& fm_pred, const std::vector<Tensor>& fm_real) {
  if (fm_pred.size() != fm_real.size() || fm_pred.empty()) {
    throw ad::ShapeError("feature_matching_loss", "expected matching non-empty feature map lists, got " +
                                                      std::to_string(fm_pred.size()) + " and " +
                                                      std::to_string(fm_real.size()));
  }
  Tensor total = l1_mean(fm_pred[0], fm_real[0], "feature_matching_loss");
  for (std::size_t i = 1; i < fm_pred.size(); ++i) {
    total = ad::add(total, l1_mean(fm_pred[i], fm_real[i], "feature_matching_loss"));
  }
  return total;
}

Tensor recon_loss(const Tensor& h_pred, const Tensor& h_target) { return l1_mean(h_pred, h_target, "recon_loss"); }

ProsodyLossTerms prosody_g_loss(const DiscriminatorOutput* fake, const DiscriminatorOutput* real,
                                const Tensor& h_pred, const Tensor& h_target, bool adversarial_active) {
  ProsodyLossTerms terms;
  terms.reconstruction = recon_loss(h_pred, h_target);
  terms.total = terms.reconstruction;
  if (!adversarial_active) return terms;
  if (fake == nullptr || real == nullptr) {
    throw std::invalid_argument("prosody_g_loss: discriminator outputs required in the adversarial stage");
  }
  terms.adversarial = lsgan_g_loss(*fake);
  terms.feature_matching = feature_matching_loss(fake->feature_maps, real->feature_maps);
  terms.total = ad::add(ad::add(terms.adversarial, terms.reconstruction), terms.feature_matching);
  return terms;
}

}  // namespace ptts::adversary
