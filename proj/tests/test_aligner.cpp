#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <random>

#include "ptts/aligner/aligner.hpp"
#include "test_support.hpp"

using namespace ptts;
using namespace ptts::aligner;
namespace oracle = ptts::testing;

namespace {

class AlignerTest : public ::testing::Test {
 protected:
  void SetUp() override { ad::Graph::current().reset(); }
  void TearDown() override { ad::Graph::current().reset(); }
};

Matrix random_soft(std::size_t frames, std::size_t phonemes, std::mt19937_64& rng, double spread = 2.0) {
  std::normal_distribution<double> normal(0.0, spread);
  Matrix m(frames, phonemes);
  for (std::size_t t = 0; t < frames; ++t) {
    double z = 0.0;
    for (std::size_t n = 0; n < phonemes; ++n) z += (m(t, n) = std::exp(normal(rng)));
    for (std::size_t n = 0; n < phonemes; ++n) m(t, n) /= z;
  }
  return m;
}

double path_log_prob(const Matrix& p, const std::vector<std::size_t>& path) {
  double s = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) s += std::log(p(t, path[t]));
  return s;
}

double brute_forward_sum(const Matrix& p) {
  double total = 0.0;
  for (const auto& path : oracle::enumerate_paths(p.rows, p.cols)) total += std::exp(path_log_prob(p, path));
  return -std::log(total);
}

HardAlignment random_path(std::size_t frames, std::size_t phonemes, std::mt19937_64& rng) {
  // choose N-1 distinct advance positions among frames 1..T-1
  std::vector<std::size_t> slots(frames - 1);
  for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i + 1;
  std::shuffle(slots.begin(), slots.end(), rng);
  std::vector<bool> advance(frames, false);
  for (std::size_t i = 0; i + 1 < phonemes; ++i) advance[slots[i]] = true;
  HardAlignment h;
  h.phonemes = phonemes;
  std::size_t col = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (advance[t]) ++col;
    h.columns.push_back(col);
  }
  return h;
}

EmbeddingSequence seq(Tensor t, model::Scale s) { return {std::move(t), s}; }

}  // namespace

TEST_F(AlignerTest, SoftAlignmentSinglePhoneme) {
  const auto soft = soft_alignment(seq(oracle::random_tensor({1, 4}, 1, false), model::Scale::Phoneme),
                                   seq(oracle::random_tensor({5, 4}, 2, false), model::Scale::Frame),
                                   Tensor::full({1}, 1.0));
  const Matrix p = soft.probabilities();
  for (double v : p.values) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST_F(AlignerTest, SoftAlignmentEquidistantIsUniform) {
  // phonemes at +/-e0, +/-e1; frame at origin is equidistant from all four
  const Tensor phon = Tensor::from({4, 2}, {1, 0, -1, 0, 0, 1, 0, -1});
  const auto soft = soft_alignment(seq(phon, model::Scale::Phoneme), seq(Tensor::zeros({2, 2}), model::Scale::Frame),
                                   Tensor::full({1}, 1.0));
  for (double v : soft.probabilities().values) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST_F(AlignerTest, SoftAlignmentHandComputed) {
  const Tensor phon = Tensor::from({2, 2}, {0.0, 0.0, 1.0, 1.0});
  const Tensor acous = Tensor::from({3, 2}, {0.0, 0.0, 1.0, 0.0, 2.0, 1.0});
  const auto soft =
      soft_alignment(seq(phon, model::Scale::Phoneme), seq(acous, model::Scale::Frame), Tensor::full({1}, 1.0));
  const Matrix p = soft.probabilities();
  // squared distances per frame: (0, 2), (1, 1), (5, 1)
  const double d[3][2] = {{0, 2}, {1, 1}, {5, 1}};
  for (std::size_t t = 0; t < 3; ++t) {
    const double z = std::exp(-d[t][0]) + std::exp(-d[t][1]);
    for (std::size_t n = 0; n < 2; ++n) EXPECT_NEAR(p(t, n), std::exp(-d[t][n]) / z, 1e-14);
  }
}

TEST_F(AlignerTest, SoftRowsSumToOne) {
  model::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(5), t = n + rng.below(6);
    const auto soft = soft_alignment(seq(oracle::random_tensor({n, 6}, 10 + trial, false, -3, 3), model::Scale::Phoneme),
                                     seq(oracle::random_tensor({t, 6}, 50 + trial, false, -3, 3), model::Scale::Frame),
                                     Tensor::full({1}, 1.3));
    const Matrix p = soft.probabilities();
    for (std::size_t r = 0; r < p.rows; ++r) {
      double s = 0.0;
      for (double v : p.row(r)) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST_F(AlignerTest, SoftAlignmentRejectsDimMismatch) {
  EXPECT_THROW(soft_alignment(seq(Tensor::zeros({2, 3}), model::Scale::Phoneme),
                              seq(Tensor::zeros({4, 2}), model::Scale::Frame), Tensor::full({1}, 1.0)),
               ad::ShapeError);
}

TEST_F(AlignerTest, ForwardSumClosedForms) {
  Matrix one(1, 1, 1.0);
  EXPECT_EQ(forward_sum_loss(SoftAlignment::from_probabilities(one)).item(), 0.0);
  Matrix two(2, 1);
  two(0, 0) = 0.3;
  two(1, 0) = 0.6;
  // single-column rows are never normalized here; the loss reads the matrix as given
  EXPECT_NEAR(forward_sum_loss(SoftAlignment::from_probabilities(two)).item(), -std::log(0.3 * 0.6), 1e-15);
}

TEST_F(AlignerTest, ForwardSumMatchesEnumeration) {
  std::mt19937_64 rng(11);
  const Matrix p = random_soft(5, 3, rng);
  EXPECT_NEAR(forward_sum_loss(SoftAlignment::from_probabilities(p)).item(), brute_forward_sum(p), 1e-12);
}

TEST_F(AlignerTest, ForwardSumRejectsShortSequences) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(forward_sum_loss(SoftAlignment::from_probabilities(random_soft(2, 3, rng))), InvalidAlignment);
  EXPECT_THROW(monotonic_best_path(random_soft(2, 3, rng)), InvalidAlignment);
}

TEST_F(AlignerTest, ForwardSumGradient) {
  std::mt19937_64 rng(5);
  const Matrix p = random_soft(6, 3, rng);
  std::vector<double> lp(p.values.size());
  for (std::size_t i = 0; i < lp.size(); ++i) lp[i] = std::log(p.values[i]);
  Tensor leaf = Tensor::from({6, 3}, lp, true);
  EXPECT_LT(ad::grad_check([](const Tensor& x) { return forward_sum_loss(SoftAlignment{x}); }, leaf), 1e-6);
}

TEST_F(AlignerTest, BestPathTrivialCases) {
  Matrix one(1, 1, 1.0);
  const auto h = monotonic_best_path(SoftAlignment::from_probabilities(one));
  EXPECT_EQ(h.columns, (std::vector<std::size_t>{0}));
  EXPECT_EQ(h.to_matrix(), one);

  Matrix diag(3, 3, 0.05);
  for (std::size_t i = 0; i < 3; ++i) diag(i, i) = 0.9;
  EXPECT_EQ(monotonic_best_path(SoftAlignment::from_probabilities(diag)).columns, (std::vector<std::size_t>{0, 1, 2}));
}

TEST_F(AlignerTest, BestPathTiesStay) {
  Matrix uniform(4, 2, 0.5);
  std::vector<double> lp(uniform.values.size(), std::log(0.5));
  Matrix logm(4, 2);
  logm.values = lp;
  // all paths tie; backtracking keeps the column, so the advance comes first
  EXPECT_EQ(monotonic_best_path(logm).columns, (std::vector<std::size_t>{0, 1, 1, 1}));
}

TEST_F(AlignerTest, BestPathMatchesEnumeration) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix p = random_soft(6, 4, rng);
    const auto hard = monotonic_best_path(SoftAlignment::from_probabilities(p));
    double best = -1e300, second = -1e300;
    std::vector<std::size_t> arg;
    for (const auto& path : oracle::enumerate_paths(6, 4)) {
      const double lp = path_log_prob(p, path);
      if (lp > best) {
        second = best;
        best = lp;
        arg = path;
      } else if (lp > second) {
        second = lp;
      }
    }
    EXPECT_NEAR(path_log_prob(p, hard.columns), best, 1e-12);
    if (best - second > 1e-9) EXPECT_EQ(hard.columns, arg);
  }
}

TEST_F(AlignerTest, InvariantsOverRandomMatrices) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 6, t = n + rng() % 8;
    const Matrix p = random_soft(t, n, rng, 1.0 + (trial % 4));
    const auto soft = SoftAlignment::from_probabilities(p);
    const auto hard = monotonic_best_path(soft);
    ASSERT_NO_THROW(hard.validate());
    ASSERT_NO_THROW(HardAlignment::from_matrix(hard.to_matrix()));
    const auto d = durations_from_path(hard);
    std::size_t total = 0;
    for (auto v : d) {
      EXPECT_GE(v, 1u);
      total += v;
    }
    EXPECT_EQ(total, t);
    const double fs = forward_sum_loss(soft).item();
    EXPECT_LE(fs, -path_log_prob(p, hard.columns) + 1e-9);
    EXPECT_GE(kl_binarization_loss(hard, soft).item(), 0.0);
    ad::Graph::current().reset();
  }
}

TEST_F(AlignerTest, HardMatrixValidation) {
  Matrix good(3, 2);
  good(0, 0) = good(1, 0) = good(2, 1) = 1.0;
  EXPECT_NO_THROW(HardAlignment::from_matrix(good));
  Matrix skip(3, 3);
  skip(0, 0) = skip(1, 2) = skip(2, 2) = 1.0;
  EXPECT_THROW(HardAlignment::from_matrix(skip), InvalidAlignment);
  Matrix two_ones = good;
  two_ones(1, 1) = 1.0;
  EXPECT_THROW(HardAlignment::from_matrix(two_ones), InvalidAlignment);
  Matrix fractional = good;
  fractional(0, 0) = 0.5;
  EXPECT_THROW(HardAlignment::from_matrix(fractional), InvalidAlignment);
  Matrix late(2, 2);
  late(0, 1) = late(1, 1) = 1.0;
  EXPECT_THROW(HardAlignment::from_matrix(late), InvalidAlignment);
  Matrix short_end(2, 2);
  short_end(0, 0) = short_end(1, 0) = 1.0;
  EXPECT_THROW(HardAlignment::from_matrix(short_end), InvalidAlignment);
  Matrix back(3, 2);
  back(0, 0) = back(1, 1) = back(2, 0) = 1.0;
  EXPECT_THROW(HardAlignment::from_matrix(back), InvalidAlignment);
}

TEST_F(AlignerTest, DurationsFromPath) {
  EXPECT_EQ(durations_from_path({{0, 1, 2}, 3}), (DurationVector{1, 1, 1}));
  EXPECT_EQ(durations_from_path({{0, 0, 0, 1, 1}, 2}), (DurationVector{3, 2}));
  EXPECT_THROW(durations_from_path({{0, 2}, 3}), InvalidAlignment);
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 6, t = n + rng() % 10;
    const auto h = random_path(t, n, rng);
    const auto d = durations_from_path(h);
    std::size_t total = 0;
    for (auto v : d) {
      ASSERT_GE(v, 1u);
      total += v;
    }
    ASSERT_EQ(total, t);
  }
}

TEST_F(AlignerTest, KlBinarizationCases) {
  const HardAlignment h{{0, 0, 1}, 2};
  Matrix onehot(3, 2, 1e-300);
  onehot(0, 0) = onehot(1, 0) = onehot(2, 1) = 1.0;
  EXPECT_NEAR(kl_binarization_loss(h, SoftAlignment::from_probabilities(onehot)).item(), 0.0, 1e-15);
  Matrix uniform(3, 2, 0.5);
  EXPECT_NEAR(kl_binarization_loss(h, SoftAlignment::from_probabilities(uniform)).item(), std::log(2.0), 1e-15);
  std::mt19937_64 rng(51);
  const Matrix p = random_soft(3, 2, rng);
  const double direct = -(std::log(p(0, 0)) + std::log(p(1, 0)) + std::log(p(2, 1))) / 3.0;
  EXPECT_NEAR(kl_binarization_loss(h, SoftAlignment::from_probabilities(p)).item(), direct, 1e-14);
  EXPECT_THROW(kl_binarization_loss(HardAlignment{{0, 1}, 2}, SoftAlignment::from_probabilities(p)), ad::ShapeError);
}

TEST_F(AlignerTest, AlignLossZeroOnPerfectInputs) {
  const HardAlignment h{{0, 1, 1}, 2};
  Matrix onehot(3, 2, 1e-300);
  onehot(0, 0) = onehot(1, 1) = onehot(2, 1) = 1.0;
  const Tensor log_dur = model::duration_log_target({1, 2});
  const auto terms = align_loss(SoftAlignment::from_probabilities(onehot), h, &log_dur);
  EXPECT_NEAR(terms.total.item(), 0.0, 1e-12);
  EXPECT_NEAR(terms.duration.item(), 0.0, 1e-15);
}

TEST_F(AlignerTest, AlignLossTermsNonNegativeAndSum) {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix p = random_soft(7, 3, rng);
    const auto soft = SoftAlignment::from_probabilities(p);
    const auto hard = monotonic_best_path(soft);
    const Tensor log_dur = Tensor::from({3}, oracle::random_values(3, trial));
    const auto terms = align_loss(soft, hard, &log_dur);
    EXPECT_GE(terms.forward_sum.item(), 0.0);
    EXPECT_GE(terms.binarization.item(), 0.0);
    EXPECT_GE(terms.duration.item(), 0.0);
    EXPECT_NEAR(terms.total.item(), terms.forward_sum.item() + terms.binarization.item() + terms.duration.item(),
                1e-12);
    const auto no_dur = align_loss(soft, hard);
    EXPECT_FALSE(no_dur.duration.defined());
    ad::Graph::current().reset();
  }
}

TEST_F(AlignerTest, AlignLossGradientThroughAligner) {
  model::Rng rng(71);
  AlignerNet net(6, 4, rng);
  Tensor phon = oracle::random_tensor({3, 4}, 1);
  const Tensor mel = oracle::random_tensor({7, 6}, 2, false);
  Tensor log_dur = oracle::random_tensor({3}, 3);
  const HardAlignment hard = monotonic_best_path(net(seq(phon, model::Scale::Phoneme), mel));
  ad::Graph::current().reset();
  model::ParamList params;
  net.collect("aligner", params);
  std::vector<ad::NamedTensor> leaves{{"phon", phon}, {"log_dur", log_dur}};
  for (const auto& p : params) leaves.push_back({p.name, p.tensor});
  const auto report = ad::grad_check_many(
      [&] { return align_loss(net(seq(phon, model::Scale::Phoneme), mel), hard, &log_dur).total; }, leaves, 1e-5, 0);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst_tensor << "[" << report.worst_element << "]";
}

TEST_F(AlignerTest, AcousticEncodingIgnoresPerBandOffsetAndScale) {
  model::Rng rng(72);
  AlignerNet net(6, 4, rng);
  const Tensor mel = oracle::random_tensor({9, 6}, 4, false);
  std::vector<double> moved(mel.data().begin(), mel.data().end());
  for (std::size_t i = 0; i < moved.size(); ++i) moved[i] = 3.0 * moved[i] + double(i % 6) - 2.5;
  ad::NoGradGuard ng;
  const auto a = net.encode_acoustic(mel).values.data();
  const auto b = net.encode_acoustic(Tensor::from({9, 6}, moved)).values.data();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-4) << i;
}

TEST_F(AlignerTest, FreshAlignerStartsNearUniform) {
  model::Rng rng(73);
  AlignerNet net(80, 32, rng);
  const Tensor phon = oracle::random_tensor({6, 32}, 5, false, -1.5, 1.5);
  const Tensor mel = oracle::random_tensor({30, 80}, 6, false, -4.0, 4.0);
  ad::NoGradGuard ng;
  const auto p = net(seq(phon, model::Scale::Phoneme), mel).probabilities();
  for (double v : p.values) {
    EXPECT_GT(v, 0.5 / 6.0);
    EXPECT_LT(v, 2.0 / 6.0);
  }
}

TEST_F(AlignerTest, PgmExport) {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "ptts_aligner_test.pgm";
  Matrix m(2, 3);
  m(0, 0) = 1.0;
  m(0, 1) = 0.5;
  m(1, 2) = 2.0;
  write_pgm(path, m);
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  const std::string px = bytes.substr(header.size());
  ASSERT_EQ(px.size(), 6u);
  EXPECT_EQ(static_cast<unsigned char>(px[0]), 255);
  EXPECT_EQ(static_cast<unsigned char>(px[1]), 128);
  EXPECT_EQ(static_cast<unsigned char>(px[2]), 0);
  EXPECT_EQ(static_cast<unsigned char>(px[5]), 255);
  fs::remove(path);
}
