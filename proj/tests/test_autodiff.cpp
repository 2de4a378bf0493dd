#include <gtest/gtest.h>

#include <cmath>

#include "ptts/autodiff/grad_check.hpp"
#include "ptts/autodiff/ops.hpp"
#include "test_support.hpp"

using namespace ptts;
using ad::Tensor;
namespace oracle = ptts::testing;

namespace {

class Autodiff : public ::testing::Test {
 protected:
  void SetUp() override { ad::Graph::current().reset(); }
  void TearDown() override { ad::Graph::current().reset(); }
};

// Analytic gradient of f at leaf x versus an independent central difference.
double check_against_fd(const std::function<Tensor(const Tensor&)>& f, Tensor x) {
  auto& g = ad::Graph::current();
  g.reset();
  x.zero_grad();
  ad::backward(f(x));
  const std::vector<double> analytic(x.grad().begin(), x.grad().end());
  g.reset();
  const auto numeric = oracle::numeric_gradient(
      [&] {
        ad::NoGradGuard ng;
        return f(x).item();
      },
      x);
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) worst = std::max(worst, oracle::rel_err(analytic[i], numeric[i]));
  return worst;
}

// Weighted sum so every output element carries a distinct gradient.
Tensor weighted(const Tensor& y, std::uint64_t seed = 99) {
  return ad::sum(ad::mul(y, oracle::random_tensor(y.shape(), seed, false)));
}

}  // namespace

TEST_F(Autodiff, SumGradientIsAllOnes) {
  Tensor x = oracle::random_tensor({3, 4}, 1);
  ad::backward(ad::sum(x));
  for (double v : x.grad()) EXPECT_EQ(v, 1.0);
}

TEST_F(Autodiff, MeanSquareClosedForm) {
  Tensor x = oracle::random_tensor({7}, 2);
  ad::backward(ad::mean(ad::square(x)));
  for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(x.grad()[i], 2.0 * x.at(i) / 7.0, 1e-15);
}

TEST_F(Autodiff, StopGradientBlocksFlow) {
  Tensor x = oracle::random_tensor({4}, 3);
  Tensor y = oracle::random_tensor({4}, 4);
  ad::backward(ad::sum(ad::add(ad::mul(ad::stop_gradient(x), x), y)));
  // d/dx of sg(x)*x is sg(x) = x only through the live factor.
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], x.at(i));
  ad::Graph::current().reset();
  Tensor z = oracle::random_tensor({4}, 5);
  Tensor w = oracle::random_tensor({4}, 6);
  ad::backward(ad::sum(ad::add(ad::stop_gradient(z), w)));
  EXPECT_FALSE(z.has_grad());
}

TEST_F(Autodiff, ConvSamePaddingPreservesLength) {
  Tensor x = oracle::random_tensor({5, 2}, 7);
  Tensor w = oracle::random_tensor({3, 2, 3}, 8);
  EXPECT_EQ(ad::conv1d(x, w, Tensor()).shape(), (ad::Shape{5, 3}));
  EXPECT_EQ(ad::conv1d(x, w, Tensor(), 2).shape(), (ad::Shape{5, 3}));
}

TEST_F(Autodiff, ConvRejectsEvenKernel) {
  Tensor x = oracle::random_tensor({5, 2}, 7);
  Tensor w = oracle::random_tensor({3, 2, 4}, 8);
  EXPECT_THROW(ad::conv1d(x, w, Tensor()), ad::ShapeError);
}

TEST_F(Autodiff, ConvMatchesDirectLoop) {
  const std::size_t T = 9, cin = 3, cout = 2, K = 3;
  for (std::size_t dilation : {1u, 2u, 3u}) {
    Tensor x = oracle::random_tensor({T, cin}, 10 + dilation);
    Tensor w = oracle::random_tensor({cout, cin, K}, 20 + dilation);
    Tensor b = oracle::random_tensor({cout}, 30 + dilation);
    const Tensor y = ad::conv1d(x, w, b, dilation);
    const long half = static_cast<long>((K - 1) / 2 * dilation);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = b.at(o);
        for (std::size_t k = 0; k < K; ++k) {
          const long src = static_cast<long>(t) + static_cast<long>(k * dilation) - half;
          if (src < 0 || src >= static_cast<long>(T)) continue;
          for (std::size_t i = 0; i < cin; ++i) acc += w.at((o * cin + i) * K + k) * x.at(std::size_t(src) * cin + i);
        }
        EXPECT_NEAR(y.at(t, o), acc, 1e-12);
      }
    }
  }
}

TEST_F(Autodiff, SoftmaxOfZerosIsUniform) {
  const Tensor s = ad::softmax(Tensor::zeros({3}), 0);
  for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST_F(Autodiff, NonScalarLossRejected) {
  Tensor x = oracle::random_tensor({3}, 1);
  EXPECT_THROW(ad::backward(ad::square(x)), ad::GraphError);
}

TEST_F(Autodiff, SecondBackwardWithoutResetRejected) {
  Tensor x = oracle::random_tensor({3}, 1);
  const Tensor loss = ad::sum(ad::square(x));
  ad::backward(loss);
  EXPECT_THROW(ad::backward(loss), ad::GraphError);
}

TEST_F(Autodiff, RetainGraphAllowsSecondBackwardAndAccumulates) {
  Tensor x = oracle::random_tensor({3}, 1);
  const Tensor loss = ad::sum(x);
  ad::backward(loss, {.retain_graph = true});
  ad::backward(loss);
  for (double v : x.grad()) EXPECT_EQ(v, 2.0);
}

TEST_F(Autodiff, ShapeErrorNamesPrimitiveAndShapes) {
  Tensor a = oracle::random_tensor({2, 3}, 1);
  Tensor b = oracle::random_tensor({4, 5}, 2);
  try {
    ad::matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ad::ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[4, 5]"), std::string::npos);
  }
  EXPECT_THROW(ad::add(a, b), ad::ShapeError);
}

TEST_F(Autodiff, NonFiniteResultNamesPrimitive) {
  try {
    ad::log(Tensor::from({2}, {1.0, 0.0}));
    FAIL() << "expected NonFiniteError";
  } catch (const ad::NonFiniteError& e) {
    EXPECT_EQ(e.primitive(), "log");
  }
  EXPECT_THROW(ad::exp(Tensor::from({1}, {1000.0})), ad::NonFiniteError);
}

TEST_F(Autodiff, MutableDataOnlyForLeaves) {
  Tensor x = oracle::random_tensor({2}, 1);
  Tensor y = ad::square(x);
  EXPECT_NO_THROW(x.mutable_data());
  EXPECT_THROW(y.mutable_data(), ad::GraphError);
}

TEST_F(Autodiff, NoGradGuardRecordsNothing) {
  Tensor x = oracle::random_tensor({3}, 1);
  {
    ad::NoGradGuard ng;
    const Tensor y = ad::sum(ad::square(x));
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(ad::Graph::current().empty());
}

TEST_F(Autodiff, ForwardIsBitDeterministic) {
  Tensor x = oracle::random_tensor({6, 4}, 3);
  Tensor w = oracle::random_tensor({4, 4, 3}, 4);
  auto run = [&] {
    const Tensor y = ad::layer_norm(ad::leaky_relu(ad::conv1d(x, w, Tensor())), 1);
    return std::vector<double>(y.data().begin(), y.data().end());
  };
  EXPECT_EQ(run(), run());
}

TEST_F(Autodiff, BroadcastAddReducesGradient) {
  Tensor a = oracle::random_tensor({3, 4}, 1);
  Tensor b = oracle::random_tensor({1, 4}, 2);
  Tensor c = oracle::random_tensor({3, 1}, 3);
  ad::backward(ad::sum(ad::add(ad::add(a, b), c)));
  for (double v : b.grad()) EXPECT_EQ(v, 3.0);
  for (double v : c.grad()) EXPECT_EQ(v, 4.0);
}

struct PrimitiveCase {
  const char* name;
  ad::Shape shape;
  std::function<Tensor(const Tensor&)> f;
  double lo = -1.0;
  double hi = 1.0;
};

class PrimitiveGradient : public Autodiff, public ::testing::WithParamInterface<PrimitiveCase> {};

TEST_P(PrimitiveGradient, MatchesCentralDifferences) {
  const auto& c = GetParam();
  Tensor x = oracle::random_tensor(c.shape, 1234, true, c.lo, c.hi);
  EXPECT_LT(check_against_fd(c.f, x), 1e-6) << c.name;
}

namespace {
const Tensor kOther = oracle::random_tensor({3, 4}, 77, false, 0.5, 1.5);
const Tensor kRow = oracle::random_tensor({1, 4}, 78, false);
const Tensor kMat = oracle::random_tensor({4, 2}, 79, false);
const Tensor kWeight = oracle::random_tensor({2, 4, 3}, 80, false);
const Tensor kBias = oracle::random_tensor({2}, 81, false);
}  // namespace

INSTANTIATE_TEST_SUITE_P(
    Primitives, PrimitiveGradient,
    ::testing::Values(
        PrimitiveCase{"add", {3, 4}, [](const Tensor& x) { return weighted(ad::add(x, kRow)); }},
        PrimitiveCase{"sub", {3, 4}, [](const Tensor& x) { return weighted(ad::sub(kOther, x)); }},
        PrimitiveCase{"mul", {3, 4}, [](const Tensor& x) { return weighted(ad::mul(x, kOther)); }},
        PrimitiveCase{"mul_self", {3, 4}, [](const Tensor& x) { return weighted(ad::mul(x, x)); }},
        PrimitiveCase{"neg_scale", {3, 4}, [](const Tensor& x) { return weighted(ad::scale(ad::neg(x), 2.5)); }},
        PrimitiveCase{"matmul", {3, 4}, [](const Tensor& x) { return weighted(ad::matmul(x, kMat)); }},
        PrimitiveCase{"transpose", {3, 4}, [](const Tensor& x) { return weighted(ad::transpose(x)); }},
        PrimitiveCase{"reshape", {3, 4}, [](const Tensor& x) { return weighted(ad::reshape(x, {2, 6})); }},
        PrimitiveCase{"conv1d", {6, 4}, [](const Tensor& x) { return weighted(ad::conv1d(x, kWeight, kBias)); }},
        PrimitiveCase{"conv1d_dilated", {7, 4},
                      [](const Tensor& x) { return weighted(ad::conv1d(x, kWeight, kBias, 2)); }},
        PrimitiveCase{"leaky_relu", {3, 4}, [](const Tensor& x) { return weighted(ad::leaky_relu(x)); }},
        PrimitiveCase{"softmax0", {3, 4}, [](const Tensor& x) { return weighted(ad::softmax(x, 0)); }},
        PrimitiveCase{"softmax1", {3, 4}, [](const Tensor& x) { return weighted(ad::softmax(x, 1)); }},
        PrimitiveCase{"log_softmax", {3, 4}, [](const Tensor& x) { return weighted(ad::log_softmax(x, 1)); }},
        PrimitiveCase{"layer_norm", {3, 4}, [](const Tensor& x) { return weighted(ad::layer_norm(x, 1)); }},
        PrimitiveCase{"sum_axis", {3, 4}, [](const Tensor& x) { return weighted(ad::sum(x, 0)); }},
        PrimitiveCase{"mean_axis", {3, 4}, [](const Tensor& x) { return weighted(ad::mean(x, 1)); }},
        PrimitiveCase{"mean", {3, 4}, [](const Tensor& x) { return ad::mean(ad::mul(x, kOther)); }},
        PrimitiveCase{"abs", {3, 4}, [](const Tensor& x) { return weighted(ad::abs(x)); }, 0.1, 1.0},
        PrimitiveCase{"square", {3, 4}, [](const Tensor& x) { return weighted(ad::square(x)); }},
        PrimitiveCase{"exp", {3, 4}, [](const Tensor& x) { return weighted(ad::exp(x)); }},
        PrimitiveCase{"log", {3, 4}, [](const Tensor& x) { return weighted(ad::log(x)); }, 0.2, 2.0},
        PrimitiveCase{"gather_rows", {3, 4},
                      [](const Tensor& x) { return weighted(ad::gather_rows(x, {2, 0, 0, 1, 2})); }},
        PrimitiveCase{"take", {3, 4}, [](const Tensor& x) { return weighted(ad::take(x, {0, 5, 5, 11})); }},
        PrimitiveCase{"concat0", {3, 4}, [](const Tensor& x) { return weighted(ad::concat({x, kRow, x}, 0)); }},
        PrimitiveCase{"concat1", {3, 4},
                      [](const Tensor& x) { return weighted(ad::concat({x, ad::square(x)}, 1)); }}),
    [](const ::testing::TestParamInfo<PrimitiveCase>& info) { return std::string(info.param.name); });

TEST_F(Autodiff, GradCheckExactOnLinear) {
  Tensor x = oracle::random_tensor({4, 3}, 5);
  EXPECT_LT(ad::grad_check([](const Tensor& v) { return ad::sum(v); }, x), 1e-10);
}

TEST_F(Autodiff, GradCheckL1AwayFromKinks) {
  Tensor x = oracle::random_tensor({10}, 6);
  const Tensor target = Tensor::from({10}, [&] {
    std::vector<double> t(10);
    for (std::size_t i = 0; i < 10; ++i) t[i] = x.at(i) + (i % 2 ? 0.3 : -0.4);
    return t;
  }());
  EXPECT_LT(ad::grad_check([&](const Tensor& v) { return ad::mean(ad::abs(ad::sub(v, target))); }, x), 1e-4);
}

TEST_F(Autodiff, GradCheckDetectsWrongGradient) {
  // stop_gradient hides the quadratic's slope, so the analytic gradient is
  // wrong by construction and the check must notice.
  Tensor x = oracle::random_tensor({3}, 7, true, 0.5, 1.0);
  const double err = ad::grad_check([](const Tensor& v) { return ad::sum(ad::mul(ad::stop_gradient(v), v)); }, x);
  EXPECT_GT(err, 0.1);
}

TEST_F(Autodiff, GradCheckManyReportsWorstTensor) {
  Tensor a = oracle::random_tensor({3}, 8);
  Tensor b = oracle::random_tensor({2}, 9);
  const auto report = ad::grad_check_many([&] { return ad::add(ad::sum(ad::square(a)), ad::sum(ad::exp(b))); },
                                          {{"a", a}, {"b", b}});
  EXPECT_EQ(report.elements_checked, 5u);
  EXPECT_LT(report.max_relative_error, 1e-6);
}

TEST_F(Autodiff, GraphIsTopologicallyOrdered) {
  Tensor x = oracle::random_tensor({3}, 1);
  const Tensor loss = ad::sum(ad::exp(ad::square(x)));
  const auto& tape = ad::Graph::current().tape();
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (const auto& in : tape[i]->inputs) {
      if (in->op == "leaf") continue;
      bool earlier = false;
      for (std::size_t j = 0; j < i; ++j) earlier = earlier || tape[j] == in;
      EXPECT_TRUE(earlier);
    }
  }
  EXPECT_EQ(tape.back().get(), loss.id());
}
