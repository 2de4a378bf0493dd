#include "ptts/signal/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ptts::signal {

namespace {

std::mutex g_planner_mutex;

// FFTW plans plus scratch buffers for one transform size. The planner is not
// thread-safe, so creation is serialized; execution uses per-thread buffers.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    real_ = fftw_alloc_real(n);
    spec_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(g_planner_mutex);
    forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec_, real_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(g_planner_mutex);
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  double* real() { return real_; }
  fftw_complex* spectrum() { return spec_; }
  void forward() { fftw_execute(forward_); }
  void inverse() { fftw_execute(inverse_); }

  static RealFft& get(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
  }

 private:
  std::size_t n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

void validate(const StftConfig& c) {
  if (c.fft == 0 || c.win == 0 || c.hop == 0 || c.win > c.fft) {
    throw std::invalid_argument("stft: require 0 < win <= fft and hop > 0");
  }
}

// Loads frame `t` of the windowed signal into the FFT input buffer.
void load_frame(RealFft& fft, std::span<const double> wave, std::span<const double> window, std::size_t t,
                const StftConfig& c) {
  double* buf = fft.real();
  std::fill(buf, buf + c.fft, 0.0);
  const std::size_t offset = (c.fft - c.win) / 2;
  const std::size_t start = t * c.hop;
  for (std::size_t n = 0; n < c.win; ++n) buf[offset + n] = window[n] * wave[start + n];
}

}  // namespace

std::size_t frame_count(std::size_t num_samples, std::size_t win, std::size_t hop) {
  if (num_samples < win) return 0;
  return (num_samples - win) / hop + 1;
}

std::vector<double> hann_window(std::size_t win) {
  std::vector<double> w(win);
  for (std::size_t n = 0; n < win; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(win));
  }
  return w;
}

Matrix stft(std::span<const double> wave, const StftConfig& config) {
  validate(config);
  if (wave.size() < config.win) {
    throw std::invalid_argument("stft: wave of " + std::to_string(wave.size()) +
                                " samples is shorter than one window (" + std::to_string(config.win) + ")");
  }
  const std::size_t frames = frame_count(wave.size(), config.win, config.hop);
  const std::size_t bins = config.fft / 2 + 1;
  const auto window = hann_window(config.win);
  RealFft& fft = RealFft::get(config.fft);
  Matrix out(frames, bins);
  for (std::size_t t = 0; t < frames; ++t) {
    load_frame(fft, wave, window, t, config);
    fft.forward();
    const fftw_complex* spec = fft.spectrum();
    for (std::size_t k = 0; k < bins; ++k) out(t, k) = std::hypot(spec[k][0], spec[k][1]);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {
std::vector<double> mel_edges(std::size_t bands, double fmin, double fmax) {
  const double lo = hz_to_mel(fmin), hi = hz_to_mel(fmax);
  std::vector<double> hz(bands + 2);
  for (std::size_t i = 0; i < bands + 2; ++i) {
    hz[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bands + 1));
  }
  return hz;
}
}  // namespace

std::vector<double> mel_center_frequencies(std::size_t bands, double fmin, double fmax) {
  auto edges = mel_edges(bands, fmin, fmax);
  return {edges.begin() + 1, edges.end() - 1};
}

Matrix mel_filterbank(std::size_t fft, std::size_t bands, double sample_rate, double fmin, double fmax) {
  if (bands == 0) throw std::invalid_argument("mel_filterbank: bands must be >= 1");
  if (fft < 2 || !(sample_rate > 0.0)) throw std::invalid_argument("mel_filterbank: invalid fft size or rate");
  if (!(fmin >= 0.0) || !(fmin < fmax) || fmax > sample_rate / 2.0) {
    throw std::invalid_argument("mel_filterbank: require 0 <= fmin < fmax <= sample_rate/2");
  }
  const std::size_t bins = fft / 2 + 1;
  const auto edges = mel_edges(bands, fmin, fmax);
  Matrix fb(bands, bins);
  for (std::size_t b = 0; b < bands; ++b) {
    const double l = edges[b], c = edges[b + 1], r = edges[b + 2];
    double area = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(fft);
      const double w = std::max(0.0, std::min((f - l) / (c - l), (r - f) / (r - c)));
      fb(b, k) = w;
      area += w;
    }
    if (!(area > 0.0)) {
      throw std::invalid_argument("mel_filterbank: band " + std::to_string(b) +
                                  " covers no FFT bin; too many bands for this resolution");
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(std::span<const double> wave, const MelConfig& config) {
  const Matrix mag = stft(wave, config.stft);
  const Matrix fb = mel_filterbank(config.stft.fft, config.bands, config.sample_rate, config.fmin, config.fmax);
  MelSpectrogram mel;
  mel.frames = mag.rows;
  mel.bands = config.bands;
  mel.sample_rate = config.sample_rate;
  mel.hop = config.stft.hop;
  mel.values = Matrix(mag.rows, config.bands);
  const double floor_log = std::log(kMelFloor);
  for (std::size_t t = 0; t < mag.rows; ++t) {
    const auto m = mag.row(t);
    for (std::size_t b = 0; b < config.bands; ++b) {
      const auto w = fb.row(b);
      double e = 0.0;
      for (std::size_t k = 0; k < mag.cols; ++k) e += w[k] * m[k];
      mel.values(t, b) = e > kMelFloor ? std::log(e) : floor_log;
    }
  }
  return mel;
}

std::vector<double> energy_track(const MelSpectrogram& mel) {
  std::vector<double> energy(mel.frames);
  for (std::size_t t = 0; t < mel.frames; ++t) {
    double acc = 0.0;
    for (double v : mel.values.row(t)) acc += std::exp(v);
    energy[t] = std::log(acc / static_cast<double>(mel.bands));
  }
  return energy;
}

ad::Tensor stft_magnitude(const ad::Tensor& wave, const StftConfig& config) {
  validate(config);
  if (wave.rank() != 1) throw ad::ShapeError("stft_magnitude", "expected rank-1 wave, got " + ad::to_string(wave.shape()));
  const std::size_t len = wave.numel();
  if (len < config.win) {
    throw ad::ShapeError("stft_magnitude", "wave of " + std::to_string(len) + " samples is shorter than one window");
  }
  const std::size_t frames = frame_count(len, config.win, config.hop);
  const std::size_t bins = config.fft / 2 + 1;
  auto window = std::make_shared<std::vector<double>>(hann_window(config.win));
  // Unit phase of every bin, kept for the backward pass.
  auto phase = std::make_shared<std::vector<std::complex<double>>>(frames * bins);
  std::vector<double> out(frames * bins);
  RealFft& fft = RealFft::get(config.fft);
  for (std::size_t t = 0; t < frames; ++t) {
    load_frame(fft, wave.data(), *window, t, config);
    fft.forward();
    const fftw_complex* spec = fft.spectrum();
    for (std::size_t k = 0; k < bins; ++k) {
      const std::complex<double> x(spec[k][0], spec[k][1]);
      const double m = std::abs(x);
      out[t * bins + k] = m;
      (*phase)[t * bins + k] = m > 0.0 ? x / m : std::complex<double>(0.0, 0.0);
    }
  }
  return ad::Tensor::make_result(
      "stft_magnitude", {frames, bins}, std::move(out), {wave},
      [window, phase, config, frames, bins](std::span<const double> g,
                                            std::span<std::vector<double>* const> grads) {
        auto& gx = *grads[0];
        RealFft& f = RealFft::get(config.fft);
        const std::size_t half = config.fft / 2;
        const std::size_t offset = (config.fft - config.win) / 2;
        for (std::size_t t = 0; t < frames; ++t) {
          // d|X_k|/da_n summed over k equals Re(sum_k g_k u_k e^{+i w k n}),
          // which a c2r transform evaluates once DC/Nyquist are kept real and
          // the interior bins are halved.
          fftw_complex* spec = f.spectrum();
          for (std::size_t k = 0; k <= half; ++k) {
            const std::complex<double> z = g[t * bins + k] * (*phase)[t * bins + k];
            const bool edge = k == 0 || (config.fft % 2 == 0 && k == half);
            spec[k][0] = edge ? z.real() : 0.5 * z.real();
            spec[k][1] = edge ? 0.0 : 0.5 * z.imag();
          }
          f.inverse();
          const double* y = f.real();
          const std::size_t start = t * config.hop;
          for (std::size_t n = 0; n < config.win; ++n) gx[start + n] += (*window)[n] * y[offset + n];
        }
      });
}

}  // namespace ptts::signal
