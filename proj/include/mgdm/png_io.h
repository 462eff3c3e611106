// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mgdm::png {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

// Throws FormatError (with the file name) on unreadable or malformed files.
Image read(const std::filesystem::path& path, int channels);
void write(const std::filesystem::path& path, int width, int height, int channels,
           std::span<const std::uint8_t> pixels);

}  // namespace mgdm::png
