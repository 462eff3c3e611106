// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <torch/torch.h>

#include <vector>

#include "mgdm/attention.h"
#include "mgdm/config.h"

namespace mgdm::diffusion {

struct UNetOptions {
  int64_t latent_channels = 4;  // noisy latent; the corrupted latent adds as many again
  std::vector<int64_t> widths = {64, 128, 256};
  int64_t ctx_dim = 128;
  int64_t heads = 4;
  int64_t time_dim = 128;
  int64_t ff_mult = 2;
  bool temporal_attention = true;

  static UNetOptions from_config(const KeyValueConfig& cfg);
};

// Optional capture of attention probabilities, for inspection and tests.
struct AttentionTrace {
  std::vector<torch::Tensor> self_weights;
  std::vector<torch::Tensor> cross_weights;
  std::vector<torch::Tensor> temporal_weights;
};

torch::Tensor timestep_embedding(const torch::Tensor& t, int64_t dim);

class ResBlock3dImpl : public torch::nn::Module {
 public:
  ResBlock3dImpl(int64_t in, int64_t out, int64_t time_dim);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& temb);

  torch::nn::GroupNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Conv3d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
  torch::nn::Linear time_proj{nullptr};
};
TORCH_MODULE(ResBlock3d);

// Spatial self-attention -> metadata cross-attention -> temporal attention ->
// feed-forward, each pre-norm with a residual connection. The cross-attention
// output (after its output projection, before the residual add) is exposed
// as this block's contribution to the attention prior.
class VideoTransformerBlockImpl : public torch::nn::Module {
 public:
  VideoTransformerBlockImpl(int64_t channels, int64_t ctx_dim, int64_t heads, int64_t ff_mult,
                            bool temporal);

  // x: [B, C, N, h, w]; context: [B, N, L, ctx_dim]
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context,
                        torch::Tensor* cross_out = nullptr, AttentionTrace* trace = nullptr);

  torch::nn::LayerNorm norm_self{nullptr}, norm_cross{nullptr}, norm_temporal{nullptr},
      norm_ff{nullptr};
  nn::MultiHeadAttention self_attn{nullptr}, cross_attn{nullptr}, temporal_attn{nullptr};
  nn::FeedForward ff{nullptr};
  bool temporal = true;
};
TORCH_MODULE(VideoTransformerBlock);

struct UNetOutput {
  torch::Tensor eps;                 // same shape as x_t
  std::vector<torch::Tensor> cross;  // per transformer block, [B, C_l, N, h_l, w_l]
};

// Three-level video U-Net over latents. Input is the channel concatenation of
// the noisy latent and the corrupted-frame latent.
class VideoUNetImpl : public torch::nn::Module {
 public:
  explicit VideoUNetImpl(UNetOptions options = {});

  UNetOutput forward(const torch::Tensor& x_t, const torch::Tensor& t,
                     const torch::Tensor& cond_latent, const torch::Tensor& context,
                     AttentionTrace* trace = nullptr);

  // Sum of widths: channel count of the interpolated attention prior.
  int64_t prior_channels() const;
  const UNetOptions& options() const { return opt_; }

  torch::nn::Linear time_fc1{nullptr}, time_fc2{nullptr};
  torch::nn::Conv3d conv_in{nullptr}, down0{nullptr}, down1{nullptr}, up1_conv{nullptr},
      up0_conv{nullptr}, conv_out{nullptr};
  ResBlock3d res0{nullptr}, res1{nullptr}, mid_res_a{nullptr}, mid_res_b{nullptr},
      up1_res{nullptr}, up0_res{nullptr};
  VideoTransformerBlock attn0{nullptr}, attn1{nullptr}, mid_attn{nullptr};
  torch::nn::GroupNorm norm_out{nullptr};

 private:
  UNetOptions opt_;
};
TORCH_MODULE(VideoUNet);

// Bilinearly resizes each per-block cross-attention output to [h, w] and
// concatenates along channels: [B, sum C_l, N, h, w].
torch::Tensor gather_attention_prior(const std::vector<torch::Tensor>& cross, int64_t h, int64_t w);

}  // namespace mgdm::diffusion
