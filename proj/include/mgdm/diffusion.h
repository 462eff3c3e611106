// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>

#include "mgdm/metadata_encoder.h"
#include "mgdm/schedule.h"
#include "mgdm/unet.h"

namespace mgdm::diffusion {

// gamma_t * x0 + delta_t * eps. Throws InputError for t outside [0, T].
torch::Tensor add_noise(const NoiseSchedule& schedule, const torch::Tensor& x0, int t,
                        const torch::Tensor& eps);
// Per-sample timesteps, t: [B] int64.
torch::Tensor add_noise(const NoiseSchedule& schedule, const torch::Tensor& x0,
                        const torch::Tensor& t, const torch::Tensor& eps);

struct DiffusionCondition {
  torch::Tensor corrupted_latent;  // [B, c, N, h, w]
  meta::MetadataRepresentation metadata;
};

struct DenoiseResult {
  torch::Tensor eps;    // predicted noise, shape of x_t
  torch::Tensor prior;  // attention prior att_d, [B, c_att, N, h, w]
};

DenoiseResult denoise_step(VideoUNet& unet, const torch::Tensor& x_t, const torch::Tensor& t,
                           const DiffusionCondition& cond, AttentionTrace* trace = nullptr);

// Mean squared error between the true and predicted noise.
torch::Tensor loss_denoise(const torch::Tensor& eps, const torch::Tensor& eps_hat);

using EpsPredictor = std::function<DenoiseResult(const torch::Tensor& x_t, int t)>;

struct SampleOptions {
  int steps = 20;
  std::uint64_t seed = 0;
  // When > 0, the x0 estimate is clamped to [-clip_x0, clip_x0] at each step.
  double clip_x0 = 0.0;
  Spacing spacing = Spacing::kTrailing;
};

struct SampleResult {
  torch::Tensor latent;  // final x_0
  torch::Tensor prior;   // attention prior from the last denoising call
};

// Deterministic sampler. Starts from seeded Gaussian noise of `shape` and, for
// each timestep t with successor s, forms x0_hat = (x_t - delta_t eps_hat) / gamma_t
// and x_s = gamma_s x0_hat + delta_s eps_hat.
SampleResult sample(const NoiseSchedule& schedule, const EpsPredictor& predictor,
                    torch::IntArrayRef shape, torch::TensorOptions options,
                    const SampleOptions& sample_options);
// Same, starting from a caller-provided x_T.
SampleResult sample_from(const NoiseSchedule& schedule, const EpsPredictor& predictor,
                         torch::Tensor x_T, const SampleOptions& sample_options);

SampleResult sample(VideoUNet& unet, const NoiseSchedule& schedule, const DiffusionCondition& cond,
                    const SampleOptions& sample_options);

}  // namespace mgdm::diffusion
