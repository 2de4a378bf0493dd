#pragma once

#include <cstddef>
#include <vector>

#include "ptts/autodiff/tensor.hpp"

// Differentiable primitives. Sequence tensors are time-major: [length, channels].
namespace ptts::ad {

// Elementwise binary ops with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);

/// [M, K] x [K, N] -> [M, N]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Rank-2 transpose.
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// Same-padded 1-D convolution. x: [T, Cin], weight: [Cout, Cin, K], bias: [Cout]
/// (may be undefined). K must be odd; output is [T, Cout].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t dilation = 1);

Tensor leaky_relu(const Tensor& x, double slope = 0.1);
Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);
/// Normalizes to zero mean / unit variance along `axis` (no affine terms).
Tensor layer_norm(const Tensor& x, std::size_t axis, double eps = 1e-5);

Tensor sum(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x);
Tensor mean(const Tensor& x, std::size_t axis);

/// |x| with subgradient 0 at x == 0.
Tensor abs(const Tensor& x);
Tensor square(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);

/// Rows of a rank-2 tensor selected (with repetition) by index.
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows);
/// Flat-index element selection; output is rank 1.
Tensor take(const Tensor& x, const std::vector<std::size_t>& flat_indices);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

/// Forward identity; contributes no gradient to x.
Tensor stop_gradient(const Tensor& x);

}  // namespace ptts::ad
