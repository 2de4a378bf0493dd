#include "ptts/signal/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "ptts/binary_io.hpp"

namespace ptts::signal {

namespace {

std::string read_tag(std::istream& is) {
  char tag[4];
  if (!is.read(tag, 4)) throw std::runtime_error("wav: truncated chunk header");
  return {tag, 4};
}

}  // namespace

Wave read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open wav file: " + path.string());
  if (read_tag(is) != "RIFF") throw std::runtime_error(path.string() + ": not a RIFF file");
  io::get_le<std::uint32_t>(is, "riff size");
  if (read_tag(is) != "WAVE") throw std::runtime_error(path.string() + ": not a WAVE file");

  Wave wave;
  bool have_fmt = false;
  while (true) {
    const std::string tag = read_tag(is);
    const auto size = io::get_le<std::uint32_t>(is, "chunk size");
    if (tag == "fmt ") {
      const auto format = io::get_le<std::uint16_t>(is, "format");
      const auto channels = io::get_le<std::uint16_t>(is, "channels");
      const auto rate = io::get_le<std::uint32_t>(is, "sample rate");
      io::get_le<std::uint32_t>(is, "byte rate");
      io::get_le<std::uint16_t>(is, "block align");
      const auto bits = io::get_le<std::uint16_t>(is, "bits per sample");
      if (format != 1 || channels != 1 || bits != 16) {
        throw std::runtime_error(path.string() + ": only mono 16-bit PCM is supported");
      }
      wave.sample_rate = rate;
      is.seekg(static_cast<std::streamoff>(size - 16 + (size & 1)), std::ios::cur);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw std::runtime_error(path.string() + ": data chunk before fmt chunk");
      wave.samples.resize(size / 2);
      for (auto& s : wave.samples) s = io::get_le<std::int16_t>(is, "sample") / 32768.0;
      return wave;
    } else {
      is.seekg(static_cast<std::streamoff>(size + (size & 1)), std::ios::cur);
    }
    if (!is) throw std::runtime_error(path.string() + ": missing data chunk");
  }
}

void write_wav(const std::filesystem::path& path, std::span<const double> samples, double sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write wav file: " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  const auto rate = static_cast<std::uint32_t>(std::lround(sample_rate));
  os.write("RIFF", 4);
  io::put_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  io::put_le<std::uint32_t>(os, 16);
  io::put_le<std::uint16_t>(os, 1);
  io::put_le<std::uint16_t>(os, 1);
  io::put_le<std::uint32_t>(os, rate);
  io::put_le<std::uint32_t>(os, rate * 2);
  io::put_le<std::uint16_t>(os, 2);
  io::put_le<std::uint16_t>(os, 16);
  os.write("data", 4);
  io::put_le<std::uint32_t>(os, data_bytes);
  for (double s : samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    io::put_le<std::int16_t>(os, static_cast<std::int16_t>(std::clamp(std::lround(clipped * 32768.0), -32768L, 32767L)));
  }
  if (!os) throw std::runtime_error("failed writing wav file: " + path.string());
}

void write_mel(const std::filesystem::path& path, const MelSpectrogram& mel) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write mel file: " + path.string());
  os.write("MEL0", 4);
  io::put_le<std::int32_t>(os, static_cast<std::int32_t>(mel.values.rows));
  io::put_le<std::int32_t>(os, static_cast<std::int32_t>(mel.values.cols));
  io::put_le<std::int32_t>(os, 0);
  for (double v : mel.values.values) io::put_le<double>(os, v);
  if (!os) throw std::runtime_error("failed writing mel file: " + path.string());
}

MelSpectrogram read_mel(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open mel file: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "MEL0") throw std::runtime_error(path.string() + ": bad mel magic");
  const auto frames = io::get_le<std::int32_t>(is, "frames");
  const auto bands = io::get_le<std::int32_t>(is, "bands");
  io::get_le<std::int32_t>(is, "reserved");
  if (frames < 0 || bands <= 0) throw std::runtime_error(path.string() + ": invalid mel dimensions");
  MelSpectrogram mel;
  mel.frames = static_cast<std::size_t>(frames);
  mel.bands = static_cast<std::size_t>(bands);
  mel.values = Matrix(mel.frames, mel.bands);
  for (double& v : mel.values.values) v = io::get_le<double>(is, "mel value");
  return mel;
}

}  // namespace ptts::signal
