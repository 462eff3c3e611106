// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "mgdm/codec.h"

namespace mgdm::synth {

// Moving-scene generator for toy datasets: a periodic smooth texture that
// translates by an integer velocity plus a few rectangles moving on their own.
struct SceneParams {
  int frames = 16;
  int height = 64;
  int width = 64;
  int max_speed = 2;  // px/frame, per axis
  int objects = 2;
};

codec::CleanClip make_scene(const SceneParams& params, std::uint64_t seed);

// Periodic texture translated by (dx, dy) px per frame, no objects.
codec::CleanClip make_global_shift(int frames, int height, int width, int dx, int dy,
                                   std::uint64_t seed);

// Every frame the same uniform gray value.
codec::CleanClip make_static_gray(int frames, int height, int width, std::uint8_t value);

}  // namespace mgdm::synth
