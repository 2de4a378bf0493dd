#include "ptts/aligner/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

namespace ptts::aligner {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

void require_feasible(std::size_t frames, std::size_t phonemes, const char* op) {
  if (phonemes == 0 || frames == 0) throw InvalidAlignment(std::string(op) + ": empty alignment");
  if (frames < phonemes) {
    throw InvalidAlignment(std::string(op) + ": " + std::to_string(frames) + " frames cannot cover " +
                           std::to_string(phonemes) + " phonemes monotonically");
  }
}

}  // namespace

Matrix SoftAlignment::probabilities() const {
  Matrix p(frames(), phonemes());
  const auto lp = log_prob.data();
  for (std::size_t i = 0; i < lp.size(); ++i) p.values[i] = std::exp(lp[i]);
  return p;
}

SoftAlignment SoftAlignment::from_probabilities(const Matrix& probabilities) {
  std::vector<double> lp(probabilities.values.size());
  for (std::size_t i = 0; i < lp.size(); ++i) {
    const double v = probabilities.values[i];
    if (!(v > 0.0)) throw InvalidAlignment("soft alignment probabilities must be positive");
    lp[i] = std::log(v);
  }
  return {Tensor::from({probabilities.rows, probabilities.cols}, std::move(lp))};
}

Matrix HardAlignment::to_matrix() const {
  Matrix m(frames(), phonemes);
  for (std::size_t t = 0; t < frames(); ++t) m(t, columns[t]) = 1.0;
  return m;
}

void HardAlignment::validate() const {
  require_feasible(frames(), phonemes, "hard alignment");
  if (columns.front() != 0) throw InvalidAlignment("hard alignment must start at column 0");
  if (columns.back() != phonemes - 1) throw InvalidAlignment("hard alignment must end at column N-1");
  for (std::size_t t = 0; t < columns.size(); ++t) {
    if (columns[t] >= phonemes) throw InvalidAlignment("hard alignment column out of range");
    if (t > 0 && (columns[t] < columns[t - 1] || columns[t] > columns[t - 1] + 1)) {
      throw InvalidAlignment("hard alignment must advance by 0 or 1 column per frame (frame " +
                             std::to_string(t) + ")");
    }
  }
}

HardAlignment HardAlignment::from_matrix(const Matrix& binary) {
  HardAlignment hard;
  hard.phonemes = binary.cols;
  for (std::size_t t = 0; t < binary.rows; ++t) {
    std::size_t ones = 0, col = 0;
    for (std::size_t n = 0; n < binary.cols; ++n) {
      const double v = binary(t, n);
      if (v == 1.0) {
        ++ones;
        col = n;
      } else if (v != 0.0) {
        throw InvalidAlignment("hard alignment must be binary (frame " + std::to_string(t) + ")");
      }
    }
    if (ones != 1) throw InvalidAlignment("hard alignment needs exactly one 1 per row (frame " + std::to_string(t) + ")");
    hard.columns.push_back(col);
  }
  hard.validate();
  return hard;
}

SoftAlignment soft_alignment(const EmbeddingSequence& phon, const EmbeddingSequence& acous,
                             const Tensor& distance_scale) {
  if (phon.dim() != acous.dim()) throw ad::ShapeError("soft_alignment", phon.values.shape(), acous.values.shape());
  const std::size_t frames = acous.length(), phonemes = phon.length();
  const Tensor a2 = ad::reshape(ad::sum(ad::square(acous.values), 1), {frames, 1});
  const Tensor p2 = ad::reshape(ad::sum(ad::square(phon.values), 1), {1, phonemes});
  const Tensor cross = ad::matmul(acous.values, ad::transpose(phon.values));
  const Tensor dist = ad::add(ad::add(a2, p2), ad::scale(cross, -2.0));
  return {ad::log_softmax(ad::neg(ad::mul(dist, distance_scale)), 1)};
}

Tensor forward_sum_loss(const SoftAlignment& soft) {
  const std::size_t frames = soft.frames(), phonemes = soft.phonemes();
  require_feasible(frames, phonemes, "forward_sum_loss");
  const auto lp = soft.log_prob.data();
  auto alpha = std::make_shared<std::vector<double>>(frames * phonemes, kNegInf);
  auto& a = *alpha;
  a[0] = lp[0];
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t n = 0; n < phonemes; ++n) {
      const double stay = a[(t - 1) * phonemes + n];
      const double advance = n > 0 ? a[(t - 1) * phonemes + n - 1] : kNegInf;
      const double prev = log_add(stay, advance);
      a[t * phonemes + n] = prev == kNegInf ? kNegInf : lp[t * phonemes + n] + prev;
    }
  }
  const double log_z = a[frames * phonemes - 1];
  auto lp_node = soft.log_prob.node();
  return Tensor::make_result(
      "forward_sum_loss", {}, {-log_z}, {soft.log_prob},
      [alpha, lp_node, frames, phonemes, log_z](std::span<const double> g, std::span<std::vector<double>* const> grads) {
        const auto& lpv = lp_node->data;
        std::vector<double> beta(frames * phonemes, kNegInf);
        beta[frames * phonemes - 1] = 0.0;
        for (std::size_t t = frames - 1; t-- > 0;) {
          for (std::size_t n = 0; n < phonemes; ++n) {
            const std::size_t next = (t + 1) * phonemes;
            const double stay = beta[next + n] == kNegInf ? kNegInf : lpv[next + n] + beta[next + n];
            const double advance =
                n + 1 < phonemes && beta[next + n + 1] != kNegInf ? lpv[next + n + 1] + beta[next + n + 1] : kNegInf;
            beta[t * phonemes + n] = log_add(stay, advance);
          }
        }
        auto& gx = *grads[0];
        for (std::size_t i = 0; i < frames * phonemes; ++i) {
          const double s = (*alpha)[i] + beta[i];
          if (s == kNegInf) continue;
          gx[i] -= g[0] * std::exp(s - log_z);
        }
      });
}

HardAlignment monotonic_best_path(const Matrix& log_prob) {
  const std::size_t frames = log_prob.rows, phonemes = log_prob.cols;
  require_feasible(frames, phonemes, "monotonic_best_path");
  Matrix q(frames, phonemes, kNegInf);
  q(0, 0) = log_prob(0, 0);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t n = 0; n < phonemes; ++n) {
      const double stay = q(t - 1, n);
      const double advance = n > 0 ? q(t - 1, n - 1) : kNegInf;
      const double prev = std::max(stay, advance);
      q(t, n) = prev == kNegInf ? kNegInf : log_prob(t, n) + prev;
    }
  }
  HardAlignment hard;
  hard.phonemes = phonemes;
  hard.columns.assign(frames, 0);
  std::size_t n = phonemes - 1;
  hard.columns[frames - 1] = n;
  for (std::size_t t = frames - 1; t > 0; --t) {
    // Advance only when strictly better, or when staying is infeasible.
    if (n > 0 && (q(t - 1, n - 1) > q(t - 1, n) || n > t - 1)) --n;
    hard.columns[t - 1] = n;
  }
  return hard;
}

HardAlignment monotonic_best_path(const SoftAlignment& soft) {
  Matrix lp(soft.frames(), soft.phonemes());
  const auto d = soft.log_prob.data();
  std::copy(d.begin(), d.end(), lp.values.begin());
  return monotonic_best_path(lp);
}

DurationVector durations_from_path(const HardAlignment& hard) {
  hard.validate();
  DurationVector d(hard.phonemes, 0);
  for (std::size_t col : hard.columns) ++d[col];
  return d;
}

Tensor kl_binarization_loss(const HardAlignment& hard, const SoftAlignment& soft) {
  if (hard.frames() != soft.frames() || hard.phonemes != soft.phonemes()) {
    throw ad::ShapeError("kl_binarization_loss", ad::Shape{hard.frames(), hard.phonemes}, soft.log_prob.shape());
  }
  std::vector<std::size_t> idx(hard.frames());
  for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = t * hard.phonemes + hard.columns[t];
  return ad::neg(ad::mean(ad::take(soft.log_prob, idx)));
}

AlignLossTerms align_loss(const SoftAlignment& soft, const HardAlignment& hard, const Tensor* log_duration_pred) {
  AlignLossTerms terms;
  terms.forward_sum = forward_sum_loss(soft);
  terms.binarization = kl_binarization_loss(hard, soft);
  terms.total = ad::add(terms.forward_sum, terms.binarization);
  if (log_duration_pred != nullptr) {
    terms.duration = model::duration_loss(*log_duration_pred, durations_from_path(hard));
    terms.total = ad::add(terms.total, terms.duration);
  }
  return terms;
}

namespace {
constexpr double kPhonemeProjectionGain = 0.01;
constexpr double kNormFloor = 1e-4;

Tensor normalize_bands(const Tensor& mel) {
  const std::size_t frames = mel.dim(0), bands = mel.dim(1);
  const auto x = mel.data();
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t b = 0; b < bands; ++b) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < frames; ++t) {
      mean += x[t * bands + b];
      sq += x[t * bands + b] * x[t * bands + b];
    }
    mean /= static_cast<double>(frames);
    const double sd = std::sqrt(std::max(sq / static_cast<double>(frames) - mean * mean, 0.0) + kNormFloor);
    for (std::size_t t = 0; t < frames; ++t) out[t * bands + b] = (x[t * bands + b] - mean) / sd;
  }
  return Tensor::from({frames, bands}, std::move(out));
}
}  // namespace

AlignerNet::AlignerNet(std::size_t mel_bands, std::size_t channels, model::Rng& rng)
    : projection_(mel_bands, channels, rng),
      phoneme_projection_(channels, channels, rng, kPhonemeProjectionGain, false),
      distance_scale_(Tensor::full({1}, 1.0, true)) {}

EmbeddingSequence AlignerNet::encode_acoustic(const Tensor& mel) const {
  return {projection_(normalize_bands(mel)), model::Scale::Frame};
}

EmbeddingSequence AlignerNet::encode_phonemes(const EmbeddingSequence& phon) const {
  return {phoneme_projection_(phon.values), model::Scale::Phoneme};
}

SoftAlignment AlignerNet::operator()(const EmbeddingSequence& phon, const Tensor& mel) const {
  return soft_alignment(encode_phonemes(phon), encode_acoustic(mel), distance_scale_);
}

void AlignerNet::collect(const std::string& prefix, model::ParamList& out) const {
  projection_.collect(prefix + ".projection", out);
  phoneme_projection_.collect(prefix + ".phoneme_projection", out);
  out.push_back({prefix + ".distance_scale", distance_scale_});
}

void write_pgm(const std::filesystem::path& path, const Matrix& values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write pgm: " + path.string());
  os << "P5\n" << values.cols << ' ' << values.rows << "\n255\n";
  for (double v : values.values) {
    const auto px = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    os.put(static_cast<char>(px));
  }
}

}  // namespace ptts::aligner
