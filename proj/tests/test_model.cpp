#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "ptts/adversary/losses.hpp"
#include "ptts/adversary/receptive_field.hpp"
#include "ptts/model/checkpoint.hpp"
#include "ptts/model/model.hpp"
#include "ptts/trainer/optimizer.hpp"
#include "test_support.hpp"

using namespace ptts;
using namespace ptts::model;
namespace oracle = ptts::testing;

namespace {

class ModelTest : public ::testing::Test {
 protected:
  void SetUp() override { ad::Graph::current().reset(); }
  void TearDown() override { ad::Graph::current().reset(); }
};

EmbeddingSequence seq(ad::Shape shape, std::uint64_t seed, Scale scale, bool grad = false) {
  return {oracle::random_tensor(std::move(shape), seed, grad), scale};
}

void zero(Tensor t) {
  for (double& v : t.mutable_data()) v = 0.0;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_F(ModelTest, PhonemeEncoderShapes) {
  Rng rng(1);
  PhonemeEncoder enc(40, 32, 2, rng);
  const std::vector<std::size_t> one{5};
  const auto h = enc(one);
  EXPECT_EQ(h.length(), 1u);
  EXPECT_EQ(h.dim(), 32u);
  EXPECT_EQ(h.scale, Scale::Phoneme);
  Rng rng2(2);
  PhonemeEncoder wide(40, 256, 1, rng2);
  const std::vector<std::size_t> ids{1, 2, 3};
  EXPECT_EQ(wide(ids).dim(), 256u);
}

TEST_F(ModelTest, PhonemeEncoderRejectsBadInput) {
  Rng rng(1);
  PhonemeEncoder enc(10, 8, 1, rng);
  const std::vector<std::size_t> bad{3, 10};
  EXPECT_THROW(enc(bad), std::out_of_range);
  EXPECT_THROW(enc(std::vector<std::size_t>{}), std::invalid_argument);
}

TEST_F(ModelTest, NoCrossExampleLeakage) {
  Rng rng(3);
  PhonemeEncoder enc(40, 16, 2, rng);
  const std::vector<std::size_t> a{1, 2, 3}, b{7, 8};
  const auto a1 = values(enc(a).values), b1 = values(enc(b).values);
  const auto b2 = values(enc(b).values), a2 = values(enc(a).values);
  EXPECT_EQ(a1, a2);
  EXPECT_EQ(b1, b2);
}

TEST_F(ModelTest, ProsodyEncoderPreservesLength) {
  Rng rng(4);
  ProsodyEncoder enc(80, 16, 2, rng);
  const auto one = enc(oracle::random_tensor({1, 80}, 1, false));
  EXPECT_EQ(one.length(), 1u);
  EXPECT_EQ(one.dim(), 16u);
  EXPECT_EQ(one.scale, Scale::Frame);
  EXPECT_EQ(enc(oracle::random_tensor({9, 80}, 2, false)).length(), 9u);
}

TEST_F(ModelTest, VarianceLossReachesMelProjection) {
  Rng rng(5);
  ProsodyEncoder enc(80, 8, 1, rng);
  VariancePredictors var(8, rng);
  const Tensor mel = oracle::random_tensor({6, 80}, 3, false, -5.0, 0.0);
  signal::ProsodyTargets targets{{120.0, 0.0, 130.0, 140.0, 0.0, 150.0}, oracle::random_values(6, 4)};
  const PitchStats stats{130.0, 10.0};
  auto loss = [&] { return variance_loss(var(enc(mel)), targets, stats); };
  const auto report = ad::grad_check_many(loss, {{"input.weight", enc.input_projection().weight}}, 1e-5, 40, 1);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst_tensor << "[" << report.worst_element << "]";
}

TEST_F(ModelTest, AttentionSingleFrameBroadcast) {
  Rng rng(6);
  ProsodyAttention att(8, rng);
  const auto h_ph = seq({3, 8}, 1, Scale::Phoneme);
  const auto frame = seq({1, 8}, 2, Scale::Frame);
  const auto out = att(h_ph, frame);
  ASSERT_EQ(out.length(), 3u);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(out.values.at(n, c), frame.values.at(0, c), 1e-15);
}

TEST_F(ModelTest, AttentionEqualLogitsGiveMean) {
  const Tensor q = Tensor::zeros({2, 4});
  const Tensor k = oracle::random_tensor({3, 4}, 1, false);
  const Tensor v = oracle::random_tensor({3, 5}, 2, false);
  const Tensor out = attend(q, k, v);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t c = 0; c < 5; ++c) {
      const double mean = (v.at(0, c) + v.at(1, c) + v.at(2, c)) / 3.0;
      EXPECT_NEAR(out.at(n, c), mean, 1e-15);
    }
  }
}

TEST_F(ModelTest, AttentionHandComputed) {
  // Two phonemes, three frames, 2-d keys chosen so the logits are simple.
  const Tensor q = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 2.0});
  const Tensor k = Tensor::from({3, 2}, {1.0, 0.0, 0.0, 1.0, 1.0, 1.0});
  const Tensor v = Tensor::from({3, 1}, {10.0, 20.0, 30.0});
  const Tensor out = attend(q, k, v);
  const double s = 1.0 / std::sqrt(2.0);
  auto expect_row = [&](std::size_t row, double l0, double l1, double l2) {
    const double e0 = std::exp(l0 * s), e1 = std::exp(l1 * s), e2 = std::exp(l2 * s);
    EXPECT_NEAR(out.at(row, 0), (10 * e0 + 20 * e1 + 30 * e2) / (e0 + e1 + e2), 1e-12);
  };
  expect_row(0, 1.0, 0.0, 1.0);
  expect_row(1, 0.0, 2.0, 2.0);
}

TEST_F(ModelTest, AttentionRowsAreConvexCombinations) {
  Rng rng(7);
  ProsodyAttention att(8, rng);
  const auto h_ph = seq({4, 8}, 3, Scale::Phoneme);
  const auto frames = seq({7, 8}, 4, Scale::Frame);
  const Tensor w = att.weights(h_ph, frames);
  for (std::size_t n = 0; n < 4; ++n) {
    double s = 0.0;
    for (std::size_t t = 0; t < 7; ++t) {
      EXPECT_GE(w.at(n, t), 0.0);
      s += w.at(n, t);
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const auto out = att(h_ph, frames);
  for (std::size_t c = 0; c < 8; ++c) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t t = 0; t < 7; ++t) {
      lo = std::min(lo, frames.values.at(t, c));
      hi = std::max(hi, frames.values.at(t, c));
    }
    for (std::size_t n = 0; n < 4; ++n) {
      EXPECT_GE(out.values.at(n, c), lo - 1e-12);
      EXPECT_LE(out.values.at(n, c), hi + 1e-12);
    }
  }
}

TEST_F(ModelTest, ProsodyPredictorLengthAndZeroHead) {
  Rng rng(8);
  ProsodyPredictor pred(8, 2, rng);
  const auto h = seq({5, 8}, 1, Scale::Phoneme);
  EXPECT_EQ(pred(h).length(), 5u);
  zero(pred.head().weight);
  zero(pred.head().bias);
  for (double v : pred(h).values.data()) EXPECT_EQ(v, 0.0);
}

TEST_F(ModelTest, ProsodyPredictorReconDecreasesOnFixedBatch) {
  Rng rng(9);
  ProsodyPredictor pred(8, 1, rng);
  const auto h = seq({5, 8}, 2, Scale::Phoneme);
  const Tensor target = oracle::random_tensor({5, 8}, 3, false);
  ParamList params;
  pred.collect("p", params);
  trainer::Adam adam(params, {0.8, 0.99, 1e-8});
  std::vector<double> history;
  for (int step = 0; step < 200; ++step) {
    ad::Graph::current().reset();
    adam.zero_grad();
    const Tensor loss = adversary::recon_loss(pred(h).values, target);
    history.push_back(loss.item());
    ad::backward(loss);
    adam.step(1e-3);
  }
  EXPECT_LT(history.back(), 0.5 * history.front());
  // Mostly monotone: compare 20-step window means.
  for (std::size_t w = 20; w < history.size(); w += 20) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      a += history[w - 20 + i];
      b += history[std::min(w + i, history.size() - 1)];
    }
    EXPECT_LE(b, a + 1e-9) << w;
  }
}

TEST_F(ModelTest, DurationPredictorStopsGradientToEncoder) {
  Rng rng(10);
  PhonemeEncoder enc(20, 8, 1, rng);
  DurationPredictor dur(8, rng);
  const std::vector<std::size_t> ids{1, 4, 9};
  const Tensor loss = duration_loss(dur(enc(ids)), {2, 3, 1});
  ad::backward(loss);
  ParamList enc_params;
  enc.collect("enc", enc_params);
  for (const auto& p : enc_params) {
    for (double g : p.tensor.grad()) EXPECT_EQ(g, 0.0) << p.name;
  }
  ParamList dur_params;
  dur.collect("dur", dur_params);
  bool any = false;
  for (const auto& p : dur_params)
    for (double g : p.tensor.grad()) any = any || g != 0.0;
  EXPECT_TRUE(any);
}

TEST_F(ModelTest, DurationTargetsAndRounding) {
  EXPECT_EQ(duration_log_target({0}).at(0), 0.0);
  EXPECT_NEAR(duration_log_target({3}).at(0), std::log(4.0), 1e-15);
  EXPECT_EQ(durations_from_log(std::vector<double>{1.0}), (DurationVector{2}));
  EXPECT_EQ(durations_from_log(std::vector<double>{-3.0, 0.0}), (DurationVector{1, 1}));
  EXPECT_EQ(durations_from_log(std::vector<double>{std::log(8.0)}), (DurationVector{7}));
}

TEST_F(ModelTest, VarianceLossCases) {
  const VariancePrediction pred{Tensor::from({3}, {0.5, -1.0, 2.0}), Tensor::from({3}, {1.0, 2.0, 3.0})};
  const PitchStats stats{100.0, 20.0};
  // all unvoiced: pitch term vanishes, energy term remains
  signal::ProsodyTargets unvoiced{{0.0, 0.0, 0.0}, {1.0, 2.0, 3.0}};
  EXPECT_EQ(variance_loss(pred, unvoiced, stats).item(), 0.0);
  // perfect prediction
  signal::ProsodyTargets perfect{{110.0, 80.0, 140.0}, {1.0, 2.0, 3.0}};
  EXPECT_NEAR(variance_loss(pred, perfect, stats).item(), 0.0, 1e-15);
  // hand-computed masked L1
  signal::ProsodyTargets mixed{{120.0, 0.0, 100.0}, {0.0, 2.5, 3.0}};
  const double pitch = (std::fabs(0.5 - 1.0) + std::fabs(2.0 - 0.0)) / 2.0;
  const double energy = (1.0 + 0.5 + 0.0) / 3.0;
  EXPECT_NEAR(variance_loss(pred, mixed, stats).item(), pitch + energy, 1e-15);
}

TEST_F(ModelTest, PitchStatsOverVoicedFrames) {
  const std::vector<std::vector<double>> tracks{{0.0, 100.0, 200.0}, {300.0, 0.0}};
  const auto s = pitch_stats(tracks);
  EXPECT_NEAR(s.mean, 200.0, 1e-12);
  EXPECT_NEAR(s.stddev, std::sqrt(20000.0 / 3.0), 1e-9);
}

TEST_F(ModelTest, LengthRegulateDefinition) {
  const EmbeddingSequence e{Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0}), Scale::Phoneme};
  const auto ident = length_regulate(e, {1, 1});
  EXPECT_EQ(values(ident.values), values(e.values));
  const auto out = length_regulate(e, {2, 3});
  EXPECT_EQ(out.scale, Scale::Frame);
  EXPECT_EQ(values(out.values), (std::vector<double>{1, 2, 1, 2, 3, 4, 3, 4, 3, 4}));
  EXPECT_EQ(length_regulate(e, {0, 4}).length(), 4u);
  EXPECT_THROW(length_regulate(e, {0, 0}), std::invalid_argument);
  EXPECT_THROW(length_regulate(e, {1}), std::invalid_argument);
}

TEST_F(ModelTest, LengthRegulateGradientCountsRepeats) {
  Tensor x = oracle::random_tensor({3, 2}, 5);
  const DurationVector d{2, 0, 4};
  ad::backward(ad::sum(length_regulate({x, Scale::Phoneme}, d).values));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 2; ++c) EXPECT_EQ(x.grad()[i * 2 + c], double(d[i]));
  ad::Graph::current().reset();
  x.zero_grad();
  EXPECT_LT(ad::grad_check([&](const Tensor& v) { return ad::sum(ad::square(length_regulate({v, Scale::Phoneme}, d).values)); }, x),
            1e-6);
}

TEST_F(ModelTest, LengthRegulateLengthProperty) {
  Rng rng(11);
  const EmbeddingSequence e = seq({4, 3}, 6, Scale::Phoneme);
  for (int trial = 0; trial < 100; ++trial) {
    DurationVector d(4);
    std::size_t total = 0;
    for (auto& v : d) total += (v = rng.below(5));
    if (total == 0) continue;
    EXPECT_EQ(length_regulate(e, d).length(), total);
  }
}

TEST_F(ModelTest, AuxiliaryZeroPostGivesZero) {
  Rng rng(12);
  AuxiliaryPredictor aux(8, 80, {}, rng);
  zero(aux.stack().post().weight);
  zero(aux.stack().post().bias);
  const auto out = aux({Tensor::zeros({6, 8}), Scale::Frame});
  EXPECT_EQ(out.shape(), (ad::Shape{6, 80}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST_F(ModelTest, ReceptiveFieldsOfFrameStacksAre19) {
  Rng rng(13);
  AuxiliaryPredictor aux(8, 80, {}, rng);
  ToyVocoder voc(8, 16, {}, rng);
  EXPECT_EQ(adversary::receptive_field(aux.stack().spec()), 19u);
  EXPECT_EQ(adversary::receptive_field(voc.stack().spec()), 19u);
  const std::size_t length = 40;
  auto check = [&](const adversary::FrameFunction& fn) {
    const auto support = adversary::perturbation_support(fn, length, 8, 3);
    for (std::size_t p = 0; p < length; ++p) {
      const std::size_t lo = p >= 9 ? p - 9 : 0, hi = std::min(p + 9, length - 1);
      ASSERT_EQ(support[p].size(), hi - lo + 1) << p;
      EXPECT_EQ(support[p].front(), lo);
      EXPECT_EQ(support[p].back(), hi);
    }
  };
  check([&](const Tensor& x) { return aux({x, Scale::Frame}); });
  check([&](const Tensor& x) { return voc.frame_features({x, Scale::Frame}); });
}

TEST_F(ModelTest, VocoderLengthAndZeroLoss) {
  Rng rng(14);
  ToyVocoder voc(8, 256, {}, rng);
  const Tensor wave = voc({oracle::random_tensor({5, 8}, 1, false), Scale::Frame});
  EXPECT_EQ(wave.numel(), 5u * 256u);
  const std::vector<double> same(wave.data().begin(), wave.data().end());
  EXPECT_EQ(stft_l1_loss(wave, same).item(), 0.0);
  std::vector<double> other = same;
  for (double& v : other) v += 0.01;
  EXPECT_GT(stft_l1_loss(wave, other).item(), 0.0);
  EXPECT_THROW(stft_l1_loss(wave, std::vector<double>(10)), ad::ShapeError);
}

TEST_F(ModelTest, EncoderBlockPreservesShape) {
  Rng rng(15);
  EncoderBlock block(8, 16, 3, rng);
  const Tensor x = oracle::random_tensor({7, 8}, 2, false);
  EXPECT_EQ(block(x).shape(), x.shape());
}

TEST_F(ModelTest, ModelIsDeterministicGivenSeed) {
  ModelConfig c;
  c.channels = 8;
  c.encoder_blocks = 1;
  TTSModel a(c), b(c);
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(values(pa[i].tensor), values(pb[i].tensor));
  }
  const std::vector<std::size_t> ids{3, 1, 4};
  EXPECT_EQ(a.infer(ids).wave, b.infer(ids).wave);
  c.seed = 2;
  TTSModel other(c);
  EXPECT_NE(values(other.parameters()[0].tensor), values(pa[0].tensor));
}

TEST_F(ModelTest, InferOutputLengthFollowsDurations) {
  ModelConfig c;
  c.channels = 8;
  c.encoder_blocks = 1;
  TTSModel m(c);
  const std::vector<std::size_t> ids{0, 5, 9, 2};
  const auto out = m.infer(ids);
  std::size_t frames = 0;
  for (auto d : out.durations) {
    EXPECT_GE(d, 1u);
    frames += d;
  }
  EXPECT_EQ(out.wave.size(), frames * c.hop);
  EXPECT_TRUE(ad::Graph::current().empty());
}

TEST_F(ModelTest, PartitionsCoverModelWithoutOverlap) {
  ModelConfig c;
  c.channels = 8;
  TTSModel m(c);
  std::set<const ad::Node*> seen;
  std::size_t total = 0;
  for (auto p : {Partition::Core, Partition::ProsodyPredictor, Partition::DurationPredictor, Partition::Discriminator}) {
    for (const auto& t : m.parameters(p)) {
      EXPECT_TRUE(seen.insert(t.tensor.id()).second) << t.name;
      ++total;
    }
  }
  EXPECT_EQ(total, m.parameters().size());
}

TEST_F(ModelTest, CheckpointRoundTrip) {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "ptts_model_test.ckpt";
  ModelConfig c;
  c.channels = 8;
  TTSModel a(c);
  save_checkpoint(path, a.parameters(), 123);
  c.seed = 99;
  TTSModel b(c);
  EXPECT_EQ(load_checkpoint(path, b.parameters()), 123u);
  EXPECT_EQ(checkpoint_step(path), 123u);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(values(pa[i].tensor), values(pb[i].tensor));
  // Saving again is byte-identical.
  const auto again = fs::temp_directory_path() / "ptts_model_test2.ckpt";
  save_checkpoint(again, b.parameters(), 123);
  std::ifstream f1(path, std::ios::binary), f2(again, std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f1), {}), std::string(std::istreambuf_iterator<char>(f2), {}));
  fs::remove(path);
  fs::remove(again);
}

TEST_F(ModelTest, CheckpointShapeMismatchRejected) {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "ptts_model_mismatch.ckpt";
  ModelConfig c;
  c.channels = 8;
  TTSModel small(c);
  save_checkpoint(path, small.parameters(), 1);
  c.channels = 16;
  TTSModel big(c);
  try {
    load_checkpoint(path, big.parameters());
    FAIL() << "expected shape mismatch";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("shape"), std::string::npos);
  }
  std::ofstream(path, std::ios::binary) << "junk";
  EXPECT_THROW(load_checkpoint(path, small.parameters()), std::runtime_error);
  fs::remove(path);
}
