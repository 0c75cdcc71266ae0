#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cvtslr/tensor.hpp"

namespace cvtslr {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;

  bool operator==(const CheckpointEntry&) const = default;
};

// On disk: "CVTS", u32 version, u32 entry count, then per entry a u16-length
// UTF-8 name, u8 rank, u32 dims and little-endian f64 values.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace cvtslr
