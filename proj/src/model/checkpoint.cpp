#include "ptts/model/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "ptts/binary_io.hpp"

namespace ptts::model {

namespace {

constexpr std::uint32_t kVersion = 1;

struct StoredTensor {
  ad::Shape shape;
  std::vector<double> values;
};

std::ifstream open_checked(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "PTCK") {
    throw std::runtime_error(path.string() + ": not a checkpoint file");
  }
  const auto version = io::get_le<std::uint32_t>(is, "checkpoint version");
  if (version != kVersion) throw std::runtime_error(path.string() + ": unsupported checkpoint version");
  return is;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamList& params, std::uint64_t step) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
  os.write("PTCK", 4);
  io::put_le<std::uint32_t>(os, kVersion);
  io::put_le<std::uint64_t>(os, step);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t d : p.tensor.shape()) io::put_le<std::uint64_t>(os, d);
    for (double v : p.tensor.data()) io::put_le<double>(os, v);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

std::uint64_t checkpoint_step(const std::filesystem::path& path) {
  auto is = open_checked(path);
  return io::get_le<std::uint64_t>(is, "step");
}

std::uint64_t load_checkpoint(const std::filesystem::path& path, const ParamList& params) {
  auto is = open_checked(path);
  const auto step = io::get_le<std::uint64_t>(is, "step");
  const auto count = io::get_le<std::uint32_t>(is, "tensor count");
  std::map<std::string, StoredTensor> stored;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = io::get_le<std::uint32_t>(is, "name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw std::runtime_error(path.string() + ": truncated tensor name");
    StoredTensor t;
    const auto rank = io::get_le<std::uint32_t>(is, "rank");
    for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(io::get_le<std::uint64_t>(is, "dimension"));
    t.values.resize(ad::numel(t.shape));
    for (double& v : t.values) v = io::get_le<double>(is, name);
    stored.emplace(std::move(name), std::move(t));
  }
  for (const auto& p : params) {
    auto it = stored.find(p.name);
    if (it == stored.end()) throw std::runtime_error(path.string() + ": missing tensor '" + p.name + "'");
    if (it->second.shape != p.tensor.shape()) {
      throw std::runtime_error(path.string() + ": tensor '" + p.name + "' has shape " + ad::to_string(it->second.shape) +
                               " but the model expects " + ad::to_string(p.tensor.shape()));
    }
    ad::Tensor target = p.tensor;
    auto dst = target.mutable_data();
    std::copy(it->second.values.begin(), it->second.values.end(), dst.begin());
  }
  return step;
}

}  // namespace ptts::model
