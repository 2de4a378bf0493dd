#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ptts/autodiff/tensor.hpp"

namespace ptts::ad {

/// Relative error used throughout: |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Max relative error between the reverse-mode gradient of scalar `f` at `x`
/// and central finite differences with the given step, over every element of
/// `x` (or only `elements`, when given). `x` must be a leaf taking a gradient.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double step = 1e-5,
                  const std::vector<std::size_t>& elements = {});

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_element = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t elements_checked = 0;
};

/// Checks a closed-over scalar loss against several leaf tensors at once.
/// At most `max_per_tensor` elements of each tensor are probed (chosen with a
/// seeded shuffle); 0 probes every element.
GradCheckReport grad_check_many(const std::function<Tensor()>& loss, std::vector<NamedTensor> leaves,
                                double step = 1e-5, std::size_t max_per_tensor = 0,
                                std::uint64_t seed = 0);

}  // namespace ptts::ad
