#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ptts::signal {

struct PitchConfig {
  double sample_rate = 22050.0;
  std::size_t frame = 1024;
  std::size_t hop = 256;
  double fmin = 50.0;
  double fmax = 600.0;
  double voicing_threshold = 0.3;
};

/// Frame-level prosody targets. Pitch is 0 on unvoiced frames.
struct ProsodyTargets {
  std::vector<double> pitch;
  std::vector<double> energy;
};

/// Per-frame f0 in Hz from the normalized autocorrelation peak over lags
/// [sr/fmax, sr/fmin]. Frames whose peak is below the voicing threshold (or
/// which are silent) are unvoiced and reported as 0. Frames follow the same
/// uncentered layout as stft(); a wave shorter than one frame yields no frames.
std::vector<double> pitch_track(std::span<const double> wave, const PitchConfig& config = {});

/// Normalized autocorrelation of one frame at lag `lag`.
double normalized_autocorrelation(std::span<const double> frame, std::size_t lag);

}  // namespace ptts::signal
