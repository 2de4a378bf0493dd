#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "ptts/model/layers.hpp"

namespace ptts::trainer {

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamHyper {
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;
};

/// One bias-corrected Adam update of `param` in place. State buffers are
/// sized on first use. Throws NonFiniteGradient before touching anything if a
/// gradient is NaN or Inf.
void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, double lr,
               const AdamHyper& hyper = {});

/// Adam over a fixed list of leaf tensors. Missing gradients count as zero.
class Adam {
 public:
  Adam() = default;
  Adam(model::ParamList params, AdamHyper hyper);

  /// Validates every gradient first so a bad one leaves all parameters as
  /// they were.
  void step(double lr);
  void zero_grad();
  /// Global L2 norm of the current gradients.
  double grad_norm() const;
  /// Scales gradients so their global norm is at most max_norm.
  void clip_grad_norm(double max_norm);

  const model::ParamList& params() const { return params_; }
  std::size_t steps_taken() const { return states_.empty() ? 0 : states_.front().step; }

 private:
  model::ParamList params_;
  AdamHyper hyper_;
  std::vector<AdamState> states_;
  std::vector<std::vector<double>> scaled_;  // clipped gradients, when clipping ran
  bool clipped_ = false;
};

}  // namespace ptts::trainer
