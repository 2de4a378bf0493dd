#include "ptts/trainer/optimizer.hpp"

#include <cmath>
#include <string>

namespace ptts::trainer {

namespace {

void check_finite(std::span<const double> grad, const std::string& name) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw NonFiniteGradient("non-finite gradient in '" + name + "' at element " + std::to_string(i));
    }
  }
}

}  // namespace

void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, double lr,
               const AdamHyper& hyper) {
  if (!grad.empty() && grad.size() != param.size()) {
    throw std::invalid_argument("adam_step: gradient has " + std::to_string(grad.size()) + " elements, parameter " +
                                std::to_string(param.size()));
  }
  check_finite(grad, "parameter");
  if (state.m.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
  }
}

Adam::Adam(model::ParamList params, AdamHyper hyper)
    : params_(std::move(params)), hyper_(hyper), states_(params_.size()) {}

void Adam::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto g = clipped_ ? std::span<const double>(scaled_[i]) : params_[i].tensor.grad();
    check_finite(g, params_[i].name);
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Tensor t = params_[i].tensor;
    const auto g = clipped_ ? std::span<const double>(scaled_[i]) : t.grad();
    adam_step(t.mutable_data(), g, states_[i], lr, hyper_);
  }
  clipped_ = false;
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    ad::Tensor t = p.tensor;
    t.zero_grad();
  }
  clipped_ = false;
}

double Adam::grad_norm() const {
  double sq = 0.0;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto g = clipped_ ? std::span<const double>(scaled_[i]) : params_[i].tensor.grad();
    for (double v : g) sq += v * v;
  }
  return std::sqrt(sq);
}

void Adam::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (!(norm > max_norm) || !std::isfinite(norm)) return;
  const double factor = max_norm / norm;
  scaled_.assign(params_.size(), {});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto g = params_[i].tensor.grad();
    scaled_[i].assign(g.begin(), g.end());
    for (double& v : scaled_[i]) v *= factor;
  }
  clipped_ = true;
}

}  // namespace ptts::trainer
