#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ptts/autodiff/grad_check.hpp"
#include "ptts/autodiff/ops.hpp"

namespace ptts::model {

using ad::NamedTensor;
using ad::Tensor;
using ParamList = std::vector<NamedTensor>;

/// Seeded generator with a portable normal sampler (Box-Muller over splitmix64
/// bits) so initial weights do not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  double uniform();
  double normal();
  std::uint64_t next();
  std::size_t below(std::size_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Tensor random_normal(Rng& rng, ad::Shape shape, double stddev);

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out], undefined when built without one

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Conv1d {
  Tensor weight;  // [out, in, kernel]
  Tensor bias;    // [out]
  std::size_t dilation = 1;

  Conv1d() = default;
  Conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t dilation, Rng& rng, double gain = 1.0);
  std::size_t kernel() const { return weight.dim(2); }
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Layer normalization over channels with learned gain and shift.
struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t channels);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Pre-norm transformer block: single-head self-attention and a
/// convolutional feed-forward pair, each with a residual connection.
struct EncoderBlock {
  LayerNorm norm_attn;
  Linear query, key, value, proj;
  LayerNorm norm_ff;
  Conv1d ff_in, ff_out;

  EncoderBlock() = default;
  EncoderBlock(std::size_t channels, std::size_t ff_channels, std::size_t ff_kernel, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Sinusoidal position table, [length, channels].
Tensor positional_encoding(std::size_t length, std::size_t channels);

/// (kernel, dilation) of one convolution in a stack.
struct ConvLayer {
  std::size_t kernel = 3;
  std::size_t dilation = 1;
  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

/// Layer layout of a PreConv -> 3 residual blocks (2 convs each) -> PostConv
/// stack: exactly 8 entries in execution order.
struct ConvStackSpec {
  std::vector<ConvLayer> layers{{5, 1}, {3, 1}, {3, 1}, {3, 1}, {3, 1}, {3, 1}, {3, 1}, {3, 1}};
  friend bool operator==(const ConvStackSpec&, const ConvStackSpec&) = default;
};

struct ConvStackOutput {
  Tensor output;                     // PostConv output
  std::vector<Tensor> feature_maps;  // PreConv + the six block convs
};

/// Shared body of the discriminator branches, the auxiliary predictor and the
/// toy vocoder.
class ConvStack {
 public:
  ConvStack() = default;
  ConvStack(std::size_t in, std::size_t hidden, std::size_t out, const ConvStackSpec& spec, bool block_norm,
            Rng& rng, double post_gain = 1.0);

  ConvStackOutput forward(const Tensor& x) const;
  Tensor operator()(const Tensor& x) const { return forward(x).output; }
  const ConvStackSpec& spec() const { return spec_; }
  void collect(const std::string& prefix, ParamList& out) const;

  Conv1d& post() { return post_; }

 private:
  ConvStackSpec spec_;
  bool block_norm_ = false;
  Conv1d pre_;
  std::vector<Conv1d> block_convs_;
  std::vector<LayerNorm> block_norms_;
  Conv1d post_;
};

}  // namespace ptts::model
