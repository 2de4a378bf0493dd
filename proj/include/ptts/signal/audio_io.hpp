#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ptts/signal/spectral.hpp"

namespace ptts::signal {

struct Wave {
  double sample_rate = 22050.0;
  std::vector<double> samples;  // [-1, 1]
};

/// Reads a mono PCM16 RIFF/WAVE file. Other encodings are rejected.
Wave read_wav(const std::filesystem::path& path);
/// Writes mono PCM16; samples are clipped to [-1, 1] and rounded.
void write_wav(const std::filesystem::path& path, std::span<const double> samples, double sample_rate = 22050.0);

// Mel matrix file: "MEL0", int32 frames, int32 bands, int32 reserved (0), then
// frames*bands little-endian float64 values, row-major.
void write_mel(const std::filesystem::path& path, const MelSpectrogram& mel);
MelSpectrogram read_mel(const std::filesystem::path& path);

}  // namespace ptts::signal
