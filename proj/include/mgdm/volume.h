// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mgdm/error.h"

namespace mgdm {

struct Shape4 {
  int n = 0;
  int h = 0;
  int w = 0;
  int c = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(n) * h * w * c;
  }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
           std::to_string(c) + "]";
  }
};

// Dense row-major [N, H, W, C] array. Frame clips, motion fields and masks all
// use this layout on the codec and file side.
template <typename T>
class Volume {
 public:
  Volume() = default;
  explicit Volume(Shape4 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {}
  Volume(int n, int h, int w, int c, T fill = T{}) : Volume(Shape4{n, h, w, c}, fill) {}

  const Shape4& shape() const { return shape_; }
  int frames() const { return shape_.n; }
  int height() const { return shape_.h; }
  int width() const { return shape_.w; }
  int channels() const { return shape_.c; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  std::size_t index(int n, int y, int x, int c) const {
    return ((static_cast<std::size_t>(n) * shape_.h + y) * shape_.w + x) * shape_.c + c;
  }
  T& at(int n, int y, int x, int c = 0) { return data_[index(n, y, x, c)]; }
  const T& at(int n, int y, int x, int c = 0) const { return data_[index(n, y, x, c)]; }

  std::size_t frame_size() const { return static_cast<std::size_t>(shape_.h) * shape_.w * shape_.c; }
  std::span<T> frame(int n) { return {data_.data() + n * frame_size(), frame_size()}; }
  std::span<const T> frame(int n) const { return {data_.data() + n * frame_size(), frame_size()}; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Volume&) const = default;

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

using Frames = Volume<std::uint8_t>;     // [N, H, W, 3], 8-bit RGB
using MotionField = Volume<float>;       // [N, H, W, 4], fwd dx, fwd dy, bwd dx, bwd dy
using BinaryMask = Volume<std::uint8_t>; // [N, H, W, 1], values in {0, 1}
using ProbMap = Volume<float>;           // [N, H, W, 1], values in [0, 1]

inline void require_same_shape(const Shape4& a, const Shape4& b, const char* what) {
  if (!(a == b)) {
    throw InputError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
  }
}

}  // namespace mgdm
