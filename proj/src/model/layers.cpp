#include "ptts/model/layers.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ptts::model {

std::uint64_t Rng::next() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(next() % n); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor random_normal(Rng& rng, ad::Shape shape, double stddev) {
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = stddev * rng.normal();
  return Tensor::from(std::move(shape), std::move(v), true);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, double gain, bool with_bias)
    : weight(random_normal(rng, {in, out}, gain / std::sqrt(static_cast<double>(in)))) {
  if (with_bias) bias = Tensor::zeros({out}, true);
}

Tensor Linear::operator()(const Tensor& x) const {
  const Tensor y = ad::matmul(x, weight);
  return bias.defined() ? ad::add(y, bias) : y;
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

Conv1d::Conv1d(std::size_t in, std::size_t out, std::size_t kernel, std::size_t dil, Rng& rng, double gain)
    : weight(random_normal(rng, {out, in, kernel}, gain / std::sqrt(static_cast<double>(in * kernel)))),
      bias(Tensor::zeros({out}, true)),
      dilation(dil) {
  if (kernel % 2 == 0) throw std::invalid_argument("Conv1d: kernel must be odd, got " + std::to_string(kernel));
}

Tensor Conv1d::operator()(const Tensor& x) const { return ad::conv1d(x, weight, bias, dilation); }

void Conv1d::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t channels)
    : gamma(Tensor::full({channels}, 1.0, true)), beta(Tensor::zeros({channels}, true)) {}

Tensor LayerNorm::operator()(const Tensor& x) const {
  return ad::add(ad::mul(ad::layer_norm(x, x.rank() - 1), gamma), beta);
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

EncoderBlock::EncoderBlock(std::size_t channels, std::size_t ff_channels, std::size_t ff_kernel, Rng& rng)
    : norm_attn(channels),
      query(channels, channels, rng),
      key(channels, channels, rng, 1.0, false),
      value(channels, channels, rng),
      proj(channels, channels, rng, 0.5),
      norm_ff(channels),
      ff_in(channels, ff_channels, ff_kernel, 1, rng),
      ff_out(ff_channels, channels, ff_kernel, 1, rng, 0.5) {}

Tensor EncoderBlock::operator()(const Tensor& x) const {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(x.dim(1)));
  const Tensor h = norm_attn(x);
  const Tensor logits = ad::scale(ad::matmul(query(h), ad::transpose(key(h))), inv_sqrt);
  const Tensor attended = ad::matmul(ad::softmax(logits, 1), value(h));
  const Tensor y = ad::add(x, proj(attended));
  const Tensor f = ff_out(ad::leaky_relu(ff_in(norm_ff(y))));
  return ad::add(y, f);
}

void EncoderBlock::collect(const std::string& prefix, ParamList& out) const {
  norm_attn.collect(prefix + ".norm_attn", out);
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
  proj.collect(prefix + ".proj", out);
  norm_ff.collect(prefix + ".norm_ff", out);
  ff_in.collect(prefix + ".ff_in", out);
  ff_out.collect(prefix + ".ff_out", out);
}

Tensor positional_encoding(std::size_t length, std::size_t channels) {
  std::vector<double> v(length * channels);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (c / 2)) / static_cast<double>(channels));
      const double angle = static_cast<double>(t) * rate;
      v[t * channels + c] = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({length, channels}, std::move(v));
}

ConvStack::ConvStack(std::size_t in, std::size_t hidden, std::size_t out, const ConvStackSpec& spec,
                     bool block_norm, Rng& rng, double post_gain)
    : spec_(spec), block_norm_(block_norm) {
  if (spec.layers.size() != 8) {
    throw std::invalid_argument("ConvStack: layout needs 8 layers (pre, 6 block convs, post)");
  }
  pre_ = Conv1d(in, hidden, spec.layers[0].kernel, spec.layers[0].dilation, rng);
  for (std::size_t i = 1; i <= 6; ++i) {
    block_convs_.emplace_back(hidden, hidden, spec.layers[i].kernel, spec.layers[i].dilation, rng,
                              i % 2 == 0 ? 0.5 : 1.0);
  }
  if (block_norm_) {
    for (int b = 0; b < 3; ++b) block_norms_.emplace_back(hidden);
  }
  post_ = Conv1d(hidden, out, spec.layers[7].kernel, spec.layers[7].dilation, rng, post_gain);
}

ConvStackOutput ConvStack::forward(const Tensor& x) const {
  ConvStackOutput result;
  Tensor h = ad::leaky_relu(pre_(x));
  result.feature_maps.push_back(h);
  for (std::size_t b = 0; b < 3; ++b) {
    const Tensor a = ad::leaky_relu(block_convs_[2 * b](h));
    const Tensor c = ad::leaky_relu(block_convs_[2 * b + 1](a));
    result.feature_maps.push_back(a);
    result.feature_maps.push_back(c);
    h = ad::add(h, c);
    if (block_norm_) h = block_norms_[b](h);
  }
  result.output = post_(h);
  return result;
}

void ConvStack::collect(const std::string& prefix, ParamList& out) const {
  pre_.collect(prefix + ".pre", out);
  for (std::size_t i = 0; i < block_convs_.size(); ++i) {
    block_convs_[i].collect(prefix + ".block" + std::to_string(i / 2) + ".conv" + std::to_string(i % 2), out);
  }
  for (std::size_t i = 0; i < block_norms_.size(); ++i) block_norms_[i].collect(prefix + ".block" + std::to_string(i) + ".norm", out);
  post_.collect(prefix + ".post", out);
}

}  // namespace ptts::model
