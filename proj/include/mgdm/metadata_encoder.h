// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dual-stream metadata encoder.
//
// Motion branch: per-frame [conv3x3 -> LeakyReLU(0.2) -> avgpool] x 2 on the
// 4-channel block flow, then one pre-norm temporal transformer layer that
// attends across frames at each spatial site (no positional encoding, so the
// layer is permutation-equivariant over frames).
// Frame-type branch: one-hot over {I, P, B} -> Linear -> SiLU -> Linear.
// Fusion: the frame-type embedding is broadcast over space and added, then two
// linear heads give the cross-attention tokens and the spatial prior.

#include <torch/torch.h>

#include "mgdm/attention.h"
#include "mgdm/config.h"

namespace mgdm::meta {

struct MetadataEncoderOptions {
  int64_t conv_width = 32;   // first conv stage
  int64_t embed_width = 64;  // second conv stage == fused width d
  int64_t pool = 2;          // per stage; total downsample pool^2
  int64_t mlp_hidden = 64;
  int64_t heads = 4;
  int64_t ctx_dim = 128;
  int64_t prior_dim = 32;
  double motion_scale = 4.0;  // motion vectors are divided by this before the convs
  bool temporal_attention = true;
  double leaky_slope = 0.2;

  int64_t downsample() const { return pool * pool; }
  static MetadataEncoderOptions from_config(const KeyValueConfig& cfg);
};

struct MetadataRepresentation {
  torch::Tensor tokens;  // r_m: [B, N, L, ctx_dim], L = h * w
  torch::Tensor prior;   // p_m: [B, prior_dim, N, h, w]
  int64_t h = 0;
  int64_t w = 0;
};

// Zero tokens of the right shape (used where the metadata context is disabled).
torch::Tensor zero_tokens(int64_t batch, int64_t frames, int64_t h, int64_t w, int64_t ctx_dim,
                          torch::TensorOptions opts);

class MetadataEncoderImpl : public torch::nn::Module {
 public:
  explicit MetadataEncoderImpl(MetadataEncoderOptions options = {});

  // [B, 4, N, H, W] -> [B, d, N, H/f, W/f]
  torch::Tensor encode_motion(const torch::Tensor& motion);
  // [B, N] int64 in {0, 1, 2} -> [B, N, d]
  torch::Tensor encode_frametype(const torch::Tensor& types);
  MetadataRepresentation fuse_and_project(const torch::Tensor& motion_feat,
                                          const torch::Tensor& type_feat);
  MetadataRepresentation forward(const torch::Tensor& motion, const torch::Tensor& types);

  // [B, N] -> [B, N, 3]; throws InputError on symbols outside {0, 1, 2}.
  static torch::Tensor one_hot(const torch::Tensor& types, torch::Dtype dtype);

  const MetadataEncoderOptions& options() const { return opt_; }
  void set_temporal_attention(bool on) { opt_.temporal_attention = on; }

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::LayerNorm temporal_norm1{nullptr}, temporal_norm2{nullptr};
  nn::MultiHeadAttention temporal_attn{nullptr};
  nn::FeedForward temporal_ff{nullptr};
  torch::nn::Linear type_fc1{nullptr}, type_fc2{nullptr};
  torch::nn::Linear token_proj{nullptr}, prior_proj{nullptr};

 private:
  MetadataEncoderOptions opt_;
};
TORCH_MODULE(MetadataEncoder);

}  // namespace mgdm::meta
