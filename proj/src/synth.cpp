// SPDX-License-Identifier: Apache-2.0
#include "mgdm/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace mgdm::synth {
namespace {

struct Wave {
  int fx, fy;
  double amp[3];
  double phase[3];
};

struct Texture {
  std::vector<Wave> waves;
  double base[3];

  std::uint8_t sample(int c, int x, int y, int w, int h) const {
    double v = base[c];
    for (const auto& wv : waves) {
      const double arg =
          2.0 * std::numbers::pi * (wv.fx * static_cast<double>(x) / w + wv.fy * static_cast<double>(y) / h);
      v += wv.amp[c] * std::sin(arg + wv.phase[c]);
    }
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
};

int wrap(int v, int m) { return ((v % m) + m) % m; }

Texture random_texture(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> freq(-3, 3);
  std::uniform_real_distribution<double> amp(8.0, 22.0), phase(0.0, 2.0 * std::numbers::pi),
      base(90.0, 166.0);
  Texture t;
  for (double& b : t.base) b = base(rng);
  for (int k = 0; k < 4; ++k) {
    Wave w{};
    do {
      w.fx = freq(rng);
      w.fy = freq(rng);
    } while (w.fx == 0 && w.fy == 0);
    for (int c = 0; c < 3; ++c) {
      w.amp[c] = amp(rng);
      w.phase[c] = phase(rng);
    }
    t.waves.push_back(w);
  }
  return t;
}

}  // namespace

codec::CleanClip make_scene(const SceneParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Texture bg = random_texture(rng);
  std::uniform_int_distribution<int> speed(-p.max_speed, p.max_speed);
  int vx = speed(rng), vy = speed(rng);
  if (vx == 0 && vy == 0) vx = 1;

  struct Object {
    int x, y, w, h, vx, vy;
    double color[3];
    double grad;
  };
  std::vector<Object> objs;
  std::uniform_int_distribution<int> size(p.height / 6, p.height / 3), posx(0, p.width - 1),
      posy(0, p.height - 1), ospeed(-p.max_speed - 1, p.max_speed + 1);
  std::uniform_real_distribution<double> col(30.0, 225.0), grad(-1.5, 1.5);
  for (int k = 0; k < p.objects; ++k) {
    Object o{posx(rng), posy(rng), size(rng), size(rng), ospeed(rng), ospeed(rng), {}, grad(rng)};
    for (double& c : o.color) c = col(rng);
    objs.push_back(o);
  }

  codec::CleanClip clip;
  clip.clip_id = "scene_" + std::to_string(seed);
  clip.frames = Frames(p.frames, p.height, p.width, 3);
  for (int f = 0; f < p.frames; ++f) {
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x)
        for (int c = 0; c < 3; ++c)
          clip.frames.at(f, y, x, c) = bg.sample(c, x - vx * f, y - vy * f, p.width, p.height);
    for (const auto& o : objs) {
      const int ox = o.x + o.vx * f;
      const int oy = o.y + o.vy * f;
      for (int dy = 0; dy < o.h; ++dy)
        for (int dx = 0; dx < o.w; ++dx) {
          const int x = wrap(ox + dx, p.width);
          const int y = wrap(oy + dy, p.height);
          for (int c = 0; c < 3; ++c) {
            const double v = o.color[c] + o.grad * (dx + dy);
            clip.frames.at(f, y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
          }
        }
    }
  }
  return clip;
}

codec::CleanClip make_global_shift(int frames, int height, int width, int dx, int dy,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Texture bg = random_texture(rng);
  codec::CleanClip clip;
  clip.clip_id = "shift_" + std::to_string(seed);
  clip.frames = Frames(frames, height, width, 3);
  for (int f = 0; f < frames; ++f)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        for (int c = 0; c < 3; ++c)
          clip.frames.at(f, y, x, c) = bg.sample(c, x - dx * f, y - dy * f, width, height);
  return clip;
}

codec::CleanClip make_static_gray(int frames, int height, int width, std::uint8_t value) {
  codec::CleanClip clip;
  clip.clip_id = "gray";
  clip.frames = Frames(frames, height, width, 3, value);
  return clip;
}

}  // namespace mgdm::synth
