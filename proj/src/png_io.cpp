// SPDX-License-Identifier: Apache-2.0
#include "mgdm/png_io.h"

#include <png.h>

#include <cstring>

#include "mgdm/error.h"

namespace mgdm::png {

Image read(const std::filesystem::path& path, int channels) {
  if (!std::filesystem::exists(path)) {
    throw FormatError("missing file " + path.string());
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw FormatError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = channels;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

void write(const std::filesystem::path& path, int width, int height, int channels,
           std::span<const std::uint8_t> pixels) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels) {
    throw InputError("png::write: pixel buffer size does not match geometry");
  }
  if (!png_image_write_to_file(&img, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace mgdm::png
