#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ptts/autodiff/tensor.hpp"
#include "ptts/matrix.hpp"

namespace ptts::signal {

inline constexpr double kMelFloor = 1e-5;

struct StftConfig {
  std::size_t fft = 1024;
  std::size_t win = 1024;
  std::size_t hop = 256;
};

struct MelConfig {
  double sample_rate = 22050.0;
  StftConfig stft{};
  std::size_t bands = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
};

/// T x bands log-mel energies.
struct MelSpectrogram {
  std::size_t frames = 0;
  std::size_t bands = 0;
  double sample_rate = 0.0;
  std::size_t hop = 0;
  Matrix values;
};

/// Number of analysis frames for an uncentered STFT; 0 when len < win.
std::size_t frame_count(std::size_t num_samples, std::size_t win, std::size_t hop);

/// Periodic Hann window.
std::vector<double> hann_window(std::size_t win);

/// Magnitude STFT, T x (fft/2+1), without center padding.
Matrix stft(std::span<const double> wave, const StftConfig& config = {});

/// Triangular filters on the HTK mel scale, bands x (fft/2+1).
Matrix mel_filterbank(std::size_t fft, std::size_t bands, double sample_rate, double fmin, double fmax);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
/// Center frequency of every filter of mel_filterbank(...).
std::vector<double> mel_center_frequencies(std::size_t bands, double fmin, double fmax);

/// log(max(filterbank * |STFT|, 1e-5)).
MelSpectrogram mel_spectrogram(std::span<const double> wave, const MelConfig& config = {});

/// Per-frame log of the mean over bands of exp(log-mel).
std::vector<double> energy_track(const MelSpectrogram& mel);

/// Differentiable magnitude STFT of a rank-1 waveform tensor: [T, fft/2+1].
/// Gradient of |X| at |X| == 0 is taken as 0.
ad::Tensor stft_magnitude(const ad::Tensor& wave, const StftConfig& config = {});

}  // namespace ptts::signal
