#include "ptts/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace ptts::ad {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

namespace {

double eval_scalar(const std::function<Tensor()>& loss) {
  NoGradGuard guard;
  return loss().item();
}

double central_difference(const std::function<Tensor()>& loss, Tensor& leaf, std::size_t i, double step) {
  auto data = leaf.mutable_data();
  const double original = data[i];
  data[i] = original + step;
  const double up = eval_scalar(loss);
  data[i] = original - step;
  const double down = eval_scalar(loss);
  data[i] = original;
  return (up - down) / (2.0 * step);
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double step,
                  const std::vector<std::size_t>& elements) {
  if (!x.is_leaf() || !x.requires_grad()) throw GraphError("grad_check: x must be a leaf taking a gradient");
  const std::function<Tensor()> loss = [&] { return f(x); };

  Graph::current().reset();
  x.zero_grad();
  backward(loss());
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) analytic.assign(x.grad().begin(), x.grad().end());
  Graph::current().reset();

  std::vector<std::size_t> idx = elements;
  if (idx.empty()) {
    idx.resize(x.numel());
    std::iota(idx.begin(), idx.end(), 0);
  }
  double worst = 0.0;
  for (std::size_t i : idx) {
    worst = std::max(worst, relative_error(analytic.at(i), central_difference(loss, x, i, step)));
  }
  return worst;
}

GradCheckReport grad_check_many(const std::function<Tensor()>& loss, std::vector<NamedTensor> leaves,
                                double step, std::size_t max_per_tensor, std::uint64_t seed) {
  Graph::current().reset();
  for (auto& leaf : leaves) {
    if (!leaf.tensor.is_leaf() || !leaf.tensor.requires_grad()) {
      throw GraphError("grad_check: '" + leaf.name + "' must be a leaf taking a gradient");
    }
    leaf.tensor.zero_grad();
  }
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) {
    if (leaf.tensor.has_grad()) {
      analytic.emplace_back(leaf.tensor.grad().begin(), leaf.tensor.grad().end());
    } else {
      analytic.emplace_back(leaf.tensor.numel(), 0.0);
    }
  }
  Graph::current().reset();

  std::mt19937_64 rng(seed);
  GradCheckReport report;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    auto& leaf = leaves[k];
    std::vector<std::size_t> idx(leaf.tensor.numel());
    std::iota(idx.begin(), idx.end(), 0);
    if (max_per_tensor != 0 && idx.size() > max_per_tensor) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    for (std::size_t i : idx) {
      const double numeric = central_difference(loss, leaf.tensor, i, step);
      const double err = relative_error(analytic[k][i], numeric);
      if (report.elements_checked++ == 0 || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_tensor = leaf.name;
        report.worst_element = i;
        report.worst_analytic = analytic[k][i];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace ptts::ad
