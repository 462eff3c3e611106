// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>
#include <vector>

namespace mgdm::diffusion {

// trailing: round(T * i / n) for i = n..1, so the first step is t = T.
// leading: round(T * (i - 1) / n) + 1 for i = n..1, which skips the
// near-zero signal level at T unless n = T.
enum class Spacing { kTrailing, kLeading };

// Accepts trailing|leading. Throws ConfigError otherwise.
Spacing parse_spacing(std::string_view name);

// Variance-preserving schedule: x_t = gamma_t x_0 + delta_t eps with
// gamma_t^2 + delta_t^2 = 1. Index 0 is the clean endpoint.
struct NoiseSchedule {
  int steps = 0;  // T
  std::vector<double> gamma;  // T + 1 entries
  std::vector<double> delta;  // T + 1 entries

  // Cosine alpha-bar schedule with offset s and per-step beta capped at max_beta.
  static NoiseSchedule cosine(int steps, double offset = 0.008, double max_beta = 0.999);

  // Sampling timesteps, descending, ending at or above 1.
  std::vector<int> sampling_timesteps(int n, Spacing spacing = Spacing::kTrailing) const;
};

}  // namespace mgdm::diffusion
