// SPDX-License-Identifier: Apache-2.0
#include "mgdm/schedule.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mgdm/error.h"

namespace mgdm::diffusion {

NoiseSchedule NoiseSchedule::cosine(int steps, double offset, double max_beta) {
  if (steps <= 0) throw ConfigError("schedule: step count must be positive");
  auto f = [&](double t) {
    const double c = std::cos((t / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  NoiseSchedule s;
  s.steps = steps;
  s.gamma.resize(steps + 1);
  s.delta.resize(steps + 1);
  double alpha_bar = 1.0;
  s.gamma[0] = 1.0;
  s.delta[0] = 0.0;
  for (int t = 1; t <= steps; ++t) {
    const double beta = std::min(1.0 - f(t) / f(t - 1), max_beta);
    alpha_bar *= 1.0 - beta;
    s.gamma[t] = std::sqrt(alpha_bar);
    s.delta[t] = std::sqrt(1.0 - alpha_bar);
  }
  return s;
}

Spacing parse_spacing(std::string_view name) {
  if (name == "trailing") return Spacing::kTrailing;
  if (name == "leading") return Spacing::kLeading;
  throw ConfigError("diffusion.spacing must be trailing or leading, got '" + std::string(name) + "'");
}

std::vector<int> NoiseSchedule::sampling_timesteps(int n, Spacing spacing) const {
  if (n <= 0) throw InputError("sample: steps must be positive");
  if (n > steps) throw InputError("sample: steps exceed schedule length");
  std::vector<int> ts;
  for (int i = n; i >= 1; --i) {
    const int k = spacing == Spacing::kLeading ? i - 1 : i;
    const int offset = spacing == Spacing::kLeading ? 1 : 0;
    ts.push_back(static_cast<int>(std::lround(static_cast<double>(steps) * k / n)) + offset);
  }
  return ts;
}

}  // namespace mgdm::diffusion
