// SPDX-License-Identifier: Apache-2.0
#pragma once

// End-to-end recovery of one clip with a trained model.

#include <torch/torch.h>

#include <cstdint>
#include <string>

#include "mgdm/bundle.h"
#include "mgdm/model.h"

namespace mgdm::pipeline {

// A bundle converted to [1, C, N, H, W] tensors. `clean` and `mask` are
// undefined for bundles without a clean reference.
struct ClipTensors {
  std::string id;
  torch::Tensor clean;
  torch::Tensor corrupted;
  torch::Tensor motion;
  torch::Tensor types;  // [1, N] int64
  torch::Tensor mask;   // [1, 1, N, H, W] in {0, 1}

  static ClipTensors from_bundle(const ClipBundle& bundle);
  bool supervised() const { return clean.defined(); }
  // Frames [start, start + count) of every tensor.
  ClipTensors window(int64_t start, int64_t count) const;
};

struct InferenceOptions {
  int sample_steps = 20;
  uint64_t seed = 0;
  double clip_x0 = 0.0;
  diffusion::Spacing spacing = diffusion::Spacing::kTrailing;
  bool refine = true;

  static InferenceOptions from_model(const model::Model& m, uint64_t seed);
};

struct Inference {
  torch::Tensor corrupted_latent;  // [1, c, N, h, w]
  torch::Tensor latent;            // sampled clean latent
  torch::Tensor y_tilde;           // decoded intermediate frames, clamped to [0, 1]
  torch::Tensor probs;             // mask probabilities [1, 1, N, H, W]
  torch::Tensor binary;            // thresholded mask
  torch::Tensor x_tilde;           // composed frames
  torch::Tensor y_hat;             // refined frames, clamped to [0, 1]; undefined without refine
};

// encode -> metadata encoder -> sampler -> mask predictor on the final-step
// attention prior -> decode -> compose -> refine. Runs without autograd.
Inference infer(model::Model& m, const ClipTensors& clip, const InferenceOptions& options);

}  // namespace mgdm::pipeline
