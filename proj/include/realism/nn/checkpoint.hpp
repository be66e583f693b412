#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "realism/tensor.hpp"

namespace realism::nn {

/// Single-file binary checkpoint:
///   8 bytes   magic "RLCKPT01"
///   u32       format_version
///   u64       header length, then that many bytes of JSON header text
///   u32       block count, then per block:
///               u32 name length, name bytes, u32 ndim, ndim x i64 dims,
///               u64 element count, elements (f32 or f64, per header "scalar")
/// All integers and floats are little-endian.
struct CheckpointFile {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::string header_json;  // must carry "scalar": "float32" | "float64"
  std::vector<std::pair<std::string, Tensor<double>>> blocks;

  const Tensor<double>* find(const std::string& name) const {
    for (const auto& [n, t] : blocks)
      if (n == name) return &t;
    return nullptr;
  }
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointFile& file);
CheckpointFile read_checkpoint(const std::filesystem::path& path);

}  // namespace realism::nn
