#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "igtrack/param_store.hpp"

namespace igtrack {

/// Binary layout, all integers little-endian u32:
///   "IGT1" | count | count x { name_len | name | ndim | dims[ndim] | f32 payload }
std::vector<std::uint8_t> serialize_params(const ParamStore& params);
ParamStore deserialize_params(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace igtrack
