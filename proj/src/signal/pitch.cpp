#include "ptts/signal/pitch.hpp"

#include <algorithm>
#include <cmath>

#include "ptts/signal/spectral.hpp"

namespace ptts::signal {

double normalized_autocorrelation(std::span<const double> frame, std::size_t lag) {
  if (lag >= frame.size()) return 0.0;
  double xy = 0.0, xx = 0.0, yy = 0.0;
  const std::size_t n = frame.size() - lag;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = frame[i], b = frame[i + lag];
    xy += a * b;
    xx += a * a;
    yy += b * b;
  }
  const double denom = std::sqrt(xx * yy);
  return denom > 1e-12 ? xy / denom : 0.0;
}

std::vector<double> pitch_track(std::span<const double> wave, const PitchConfig& config) {
  const std::size_t frames = frame_count(wave.size(), config.frame, config.hop);
  const auto min_lag = static_cast<std::size_t>(std::ceil(config.sample_rate / config.fmax));
  const auto max_lag = std::min(static_cast<std::size_t>(std::floor(config.sample_rate / config.fmin)),
                                config.frame - 2);
  std::vector<double> f0(frames, 0.0);
  std::vector<double> r(max_lag + 2, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto frame = wave.subspan(t * config.hop, config.frame);
    double best = 0.0;
    for (std::size_t lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
      r[lag] = normalized_autocorrelation(frame, lag);
      if (lag >= min_lag && lag <= max_lag) best = std::max(best, r[lag]);
    }
    if (best < config.voicing_threshold) continue;

    // The autocorrelation of a periodic frame peaks at every multiple of the
    // period; take the shortest lag whose local peak is within 10% of the best.
    std::size_t chosen = 0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      if (r[lag] >= 0.9 * best && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
        chosen = lag;
        break;
      }
    }
    if (chosen == 0) continue;

    double lag = static_cast<double>(chosen);
    const double a = r[chosen - 1], b = r[chosen], c = r[chosen + 1];
    const double curvature = a - 2.0 * b + c;
    if (curvature < 0.0) lag += 0.5 * (a - c) / curvature;
    const double hz = config.sample_rate / lag;
    f0[t] = std::clamp(hz, config.fmin, config.fmax);
  }
  return f0;
}

}  // namespace ptts::signal
