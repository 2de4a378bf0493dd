#pragma once

#include <cstdint>
#include <filesystem>

#include "ptts/model/layers.hpp"

namespace ptts::model {

// Checkpoint layout, all integers and values little-endian:
//   "PTCK" | u32 version (1) | u64 step | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 values
void save_checkpoint(const std::filesystem::path& path, const ParamList& params, std::uint64_t step);

/// Loads values into the given parameters by name. Throws when a name is
/// missing or a shape differs from the model's.
std::uint64_t load_checkpoint(const std::filesystem::path& path, const ParamList& params);

/// Step recorded in a checkpoint header.
std::uint64_t checkpoint_step(const std::filesystem::path& path);

}  // namespace ptts::model
