#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cvtslr {

// Validity of padded frames in a [batch, frames] layout.
struct FrameMask {
  std::size_t batch = 0;
  std::size_t frames = 0;
  std::vector<std::uint8_t> valid;

  FrameMask() = default;
  FrameMask(std::size_t b, std::size_t t, bool fill = true) : batch(b), frames(t), valid(b * t, fill ? 1 : 0) {}

  bool at(std::size_t b, std::size_t t) const { return valid[b * frames + t] != 0; }
  void set(std::size_t b, std::size_t t, bool v) { valid[b * frames + t] = v ? 1 : 0; }
  std::size_t length(std::size_t b) const {
    std::size_t n = 0;
    for (std::size_t t = 0; t < frames; ++t) n += at(b, t) ? 1 : 0;
    return n;
  }
};

}  // namespace cvtslr
