// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <torch/torch.h>

#include "mgdm/config.h"

namespace mgdm::diffusion {

struct AutoencoderOptions {
  int64_t factor = 4;  // spatial downsample, power of two
  int64_t latent_channels = 4;
  int64_t width = 64;

  static AutoencoderOptions from_config(const KeyValueConfig& cfg);
};

// Small per-frame convolutional autoencoder. Latents are divided by a stored
// scale so that they have unit variance over the training set.
class FrameAutoencoderImpl : public torch::nn::Module {
 public:
  explicit FrameAutoencoderImpl(AutoencoderOptions options = {});

  // [B, 3, N, H, W] in [0, 1] -> [B, c, N, H/f, W/f]
  torch::Tensor encode(const torch::Tensor& frames);
  // [B, c, N, h, w] -> [B, 3, N, h*f, w*f] (unclamped)
  torch::Tensor decode(const torch::Tensor& latent);

  double latent_scale() const { return latent_scale_.item<double>(); }
  void set_latent_scale(double scale);
  const AutoencoderOptions& options() const { return opt_; }

  torch::nn::Sequential encoder{nullptr}, decoder{nullptr};

 private:
  AutoencoderOptions opt_;
  torch::Tensor latent_scale_;
};
TORCH_MODULE(FrameAutoencoder);

}  // namespace mgdm::diffusion
