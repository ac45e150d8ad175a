#pragma once

// Binary parameter checkpoints. Layout (all integers little-endian):
//   8 bytes  magic "DRMCKPT\0"
//   u32      format version (1)
//   u32      tensor count
//   per tensor: u32 name length, name bytes, u32 rows, u32 cols,
//               rows * cols f64 values in column-major order
//   u64      FNV-1a hash of every preceding byte

#include <filesystem>
#include <string>

#include "dreamlab/nn/layers.hpp"

namespace dreamlab::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const ParamRefs& params);
// Overwrites parameter values. Names, order and shapes must match exactly.
void decode_checkpoint(const std::string& bytes, const ParamRefs& params);

void save_checkpoint(const std::filesystem::path& path, const ParamRefs& params);
void load_checkpoint(const std::filesystem::path& path, const ParamRefs& params);

}  // namespace dreamlab::nn
