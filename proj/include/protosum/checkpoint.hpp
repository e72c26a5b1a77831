#pragma once

#include <filesystem>

#include "json.hpp"

#include "protosum/autodiff.hpp"

namespace protosum {

// A checkpoint is a directory holding
//   manifest.json  {"format", "params": [{"name", "shape": [r, c], "offset"}], "metadata"}
//   params.bin     every parameter as little-endian IEEE-754 doubles, manifest order
// Offsets count doubles from the start of params.bin. save then load is bit-exact.
void save_checkpoint(const std::filesystem::path& dir, const ParameterSet& params,
                     const nlohmann::json& metadata);

// Overwrites the values of `params` by name; every parameter must be present
// with the same shape. Returns the stored metadata.
nlohmann::json load_checkpoint(const std::filesystem::path& dir, ParameterSet& params);

nlohmann::json read_checkpoint_metadata(const std::filesystem::path& dir);

bool checkpoint_exists(const std::filesystem::path& dir);

inline constexpr const char* kCheckpointFormat = "protosum-checkpoint-v1";

}  // namespace protosum
