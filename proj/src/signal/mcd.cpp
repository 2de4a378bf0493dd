#include "ptts/signal/mcd.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ptts::signal {

double mcd_scale() { return 10.0 / std::numbers::ln10 * std::numbers::sqrt2; }

Matrix mel_cepstra(const MelSpectrogram& mel, std::size_t order) {
  const std::size_t bands = mel.values.cols;
  if (order >= bands) throw std::invalid_argument("mel_cepstra: order must be below the band count");
  const double nb = static_cast<double>(bands);
  Matrix basis(order, bands);
  for (std::size_t k = 1; k <= order; ++k) {
    for (std::size_t b = 0; b < bands; ++b) {
      basis(k - 1, b) = std::sqrt(2.0 / nb) *
                        std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(b) + 1.0) /
                                 (2.0 * nb));
    }
  }
  Matrix out(mel.values.rows, order);
  for (std::size_t t = 0; t < mel.values.rows; ++t) {
    const auto x = mel.values.row(t);
    for (std::size_t k = 0; k < order; ++k) {
      double acc = 0.0;
      for (std::size_t b = 0; b < bands; ++b) acc += basis(k, b) * x[b];
      out(t, k) = acc;
    }
  }
  return out;
}

double mcd(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument("mcd: cepstra shapes differ (" + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols) + "); use mcd_dtw for unequal lengths");
  }
  if (a.rows == 0) throw std::invalid_argument("mcd: empty cepstra");
  double total = 0.0;
  for (std::size_t t = 0; t < a.rows; ++t) {
    double sq = 0.0;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double d = a(t, k) - b(t, k);
      sq += d * d;
    }
    total += std::sqrt(sq);
  }
  return mcd_scale() * total / static_cast<double>(a.rows);
}

WarpPath dtw_path(const Matrix& cost) {
  if (cost.empty()) throw std::invalid_argument("dtw_path: empty cost matrix");
  const std::size_t rows = cost.rows, cols = cost.cols;
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 0: diagonal, 1: from (i-1, j), 2: from (i, j-1)
  std::vector<unsigned char> from(rows * cols, 0);
  Matrix acc(rows, cols, inf);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (i == 0 && j == 0) {
        acc(0, 0) = cost(0, 0);
        continue;
      }
      double best = inf;
      unsigned char move = 0;
      if (i > 0 && j > 0 && acc(i - 1, j - 1) < best) {
        best = acc(i - 1, j - 1);
        move = 0;
      }
      if (i > 0 && acc(i - 1, j) < best) {
        best = acc(i - 1, j);
        move = 1;
      }
      if (j > 0 && acc(i, j - 1) < best) {
        best = acc(i, j - 1);
        move = 2;
      }
      acc(i, j) = cost(i, j) + best;
      from[i * cols + j] = move;
    }
  }
  WarpPath path;
  std::size_t i = rows - 1, j = cols - 1;
  path.emplace_back(i, j);
  while (i != 0 || j != 0) {
    switch (from[i * cols + j]) {
      case 0: --i, --j; break;
      case 1: --i; break;
      default: --j; break;
    }
    path.emplace_back(i, j);
  }
  return {path.rbegin(), path.rend()};
}

Matrix cepstral_distance_matrix(const Matrix& ca, const Matrix& cb) {
  if (ca.cols != cb.cols) throw std::invalid_argument("cepstral_distance_matrix: coefficient counts differ");
  Matrix cost(ca.rows, cb.rows);
  const double s = mcd_scale();
  for (std::size_t i = 0; i < ca.rows; ++i) {
    for (std::size_t j = 0; j < cb.rows; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < ca.cols; ++k) {
        const double d = ca(i, k) - cb(j, k);
        sq += d * d;
      }
      cost(i, j) = s * std::sqrt(sq);
    }
  }
  return cost;
}

McdDtwResult mcd_dtw_detailed(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.frames == 0 || b.frames == 0) throw std::invalid_argument("mcd_dtw: empty mel spectrogram");
  const Matrix cost = cepstral_distance_matrix(mel_cepstra(a), mel_cepstra(b));
  McdDtwResult result;
  result.path = dtw_path(cost);
  double total = 0.0;
  for (const auto& [i, j] : result.path) total += cost(i, j);
  result.mcd = total / static_cast<double>(result.path.size());
  return result;
}

double mcd_dtw(const MelSpectrogram& a, const MelSpectrogram& b) { return mcd_dtw_detailed(a, b).mcd; }

}  // namespace ptts::signal
