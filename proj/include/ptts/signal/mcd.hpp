#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ptts/matrix.hpp"
#include "ptts/signal/spectral.hpp"

namespace ptts::signal {

inline constexpr std::size_t kCepstralOrder = 13;

/// (10 / ln 10) * sqrt(2)
double mcd_scale();

/// Orthonormal DCT-II of each log-mel frame, keeping coefficients 1..order.
Matrix mel_cepstra(const MelSpectrogram& mel, std::size_t order = kCepstralOrder);

/// Frame-aligned mel-cepstral distortion in dB. Throws on length mismatch.
double mcd(const Matrix& a, const Matrix& b);

using WarpPath = std::vector<std::pair<std::size_t, std::size_t>>;

/// Minimum-total-cost monotonic path from (0,0) to (rows-1, cols-1) with steps
/// (1,0), (0,1), (1,1). Ties prefer (1,1), then (1,0).
WarpPath dtw_path(const Matrix& cost);

struct McdDtwResult {
  double mcd = 0.0;
  WarpPath path;
};

/// MCD averaged over the entries of the DTW path through the frame-pair
/// cepstral distance matrix.
McdDtwResult mcd_dtw_detailed(const MelSpectrogram& a, const MelSpectrogram& b);
double mcd_dtw(const MelSpectrogram& a, const MelSpectrogram& b);

/// Scaled Euclidean distances between every cepstral frame pair.
Matrix cepstral_distance_matrix(const Matrix& ca, const Matrix& cb);

}  // namespace ptts::signal
