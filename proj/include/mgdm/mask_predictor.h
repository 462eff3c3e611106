// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <torch/torch.h>

#include <vector>

#include "mgdm/config.h"

namespace mgdm::mask {

struct MaskPredictorOptions {
  int64_t latent_channels = 4;
  int64_t prior_dim = 32;          // p_m channels
  int64_t attention_channels = 448;  // att_d channels
  int64_t factor = 4;              // latent -> pixel upsampling
  std::vector<int64_t> widths = {64, 64, 32, 32};  // first four conv outputs
  double leaky_slope = 0.2;
  double threshold = 0.5;

  static MaskPredictorOptions from_config(const KeyValueConfig& cfg);
};

struct PseudoMask {
  torch::Tensor probs;   // [B, 1, N, H, W] in [0, 1]
  torch::Tensor binary;  // float {0, 1}, probs > threshold
  double threshold = 0.5;
};

PseudoMask binarize(const torch::Tensor& probs, double threshold);

// Five 3x3x3 conv layers with LeakyReLU between them over the channel
// concatenation of latent, metadata prior and attention prior, then
// depth-to-space by the latent factor and a sigmoid. The last conv is
// zero-initialized so the untrained predictor outputs 0.5 everywhere.
class MaskPredictorImpl : public torch::nn::Module {
 public:
  explicit MaskPredictorImpl(MaskPredictorOptions options = {});

  // Pre-sigmoid full-resolution map [B, 1, N, h*f, w*f].
  torch::Tensor logits(const torch::Tensor& latent, const torch::Tensor& meta_prior,
                       const torch::Tensor& attention_prior);
  // Pre-depth-to-space fusion output [B, f*f, N, h, w].
  torch::Tensor fuse(const torch::Tensor& latent, const torch::Tensor& meta_prior,
                     const torch::Tensor& attention_prior);
  PseudoMask forward(const torch::Tensor& latent, const torch::Tensor& meta_prior,
                     const torch::Tensor& attention_prior);

  const MaskPredictorOptions& options() const { return opt_; }
  torch::nn::ModuleList convs{nullptr};

 private:
  MaskPredictorOptions opt_;
};
TORCH_MODULE(MaskPredictor);

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross entropy with probabilities clamped to [1e-7, 1 - 1e-7].
torch::Tensor loss_mask(const torch::Tensor& probs, const torch::Tensor& target);

}  // namespace mgdm::mask
