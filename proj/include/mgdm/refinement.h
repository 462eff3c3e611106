// SPDX-License-Identifier: Apache-2.0
#pragma once

// Hard-mask composition, the windowed-attention refinement network and the
// temporal patch discriminator used in the last training stage.

#include <torch/torch.h>

#include <utility>

#include "mgdm/attention.h"
#include "mgdm/config.h"
#include "mgdm/volume.h"

namespace mgdm::refine {

// x~ = where(mask, y~, x). Exact selection; mask is {0, 1} and broadcasts over
// channels ([B, 1, N, H, W] against [B, 3, N, H, W]).
torch::Tensor hard_compose(const torch::Tensor& x, const torch::Tensor& y_tilde,
                           const torch::Tensor& mask);
// m * y~ + (1 - m) * x with a real-valued mask.
torch::Tensor soft_compose(const torch::Tensor& x, const torch::Tensor& y_tilde,
                           const torch::Tensor& mask);
// 8-bit variant on [N, H, W, 3] frames with a [N, H, W, 1] mask.
Frames hard_compose(const Frames& x, const Frames& y_tilde, const BinaryMask& mask);

// [B, H, W, C] -> [B * nW, win * win, C]
torch::Tensor window_partition(const torch::Tensor& x, int64_t window);
// Inverse of window_partition.
torch::Tensor window_reverse(const torch::Tensor& windows, int64_t window, int64_t batch,
                             int64_t height, int64_t width);
// Additive mask [nW, L, L] that blocks attention across the wrap-around seams
// of a cyclically shifted feature map (0 or -100).
torch::Tensor shifted_window_mask(int64_t height, int64_t width, int64_t window, int64_t shift);
// Pairwise index into the (2w-1)^2 relative position table, [L, L].
torch::Tensor relative_position_index(int64_t window);

struct RefinerOptions {
  int64_t width = 64;
  int64_t blocks = 2;           // residual Swin blocks
  int64_t layers_per_block = 2; // alternating regular / shifted windows
  int64_t window = 8;
  int64_t heads = 4;
  int64_t mlp_ratio = 2;
  bool soft = false;

  static RefinerOptions from_config(const KeyValueConfig& cfg);
};

class SwinLayerImpl : public torch::nn::Module {
 public:
  SwinLayerImpl(int64_t dim, int64_t heads, int64_t window, int64_t shift, int64_t mlp_ratio);
  // x: [B, H, W, C]
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  nn::MultiHeadAttention attn{nullptr};
  nn::FeedForward mlp{nullptr};
  torch::Tensor bias_table;  // [(2w-1)^2, heads]

 private:
  int64_t window_, shift_, heads_;
  torch::Tensor index_;
};
TORCH_MODULE(SwinLayer);

// Swin layers followed by a 3x3 conv, with an identity skip around the block.
class ResidualSwinBlockImpl : public torch::nn::Module {
 public:
  ResidualSwinBlockImpl(int64_t dim, int64_t heads, int64_t window, int64_t layers, int64_t mlp_ratio);
  // x: [B, C, H, W]
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::ModuleList layers{nullptr};
  torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(ResidualSwinBlock);

struct RefineOutput {
  torch::Tensor x_tilde;  // composed input
  torch::Tensor y_hat;    // refined output
};

// Per-frame refinement of the composed frames. The input is x~ with the mask
// as a fourth channel. The output conv is zero-initialized, so the fresh
// network returns x~ unchanged.
class RefinerImpl : public torch::nn::Module {
 public:
  explicit RefinerImpl(RefinerOptions options = {});

  // x~ [B, 3, N, H, W], mask [B, 1, N, H, W] -> y^ [B, 3, N, H, W]
  torch::Tensor forward(const torch::Tensor& x_tilde, const torch::Tensor& mask);
  // Compose (hard unless configured soft) then refine.
  RefineOutput refine(const torch::Tensor& x, const torch::Tensor& y_tilde, const torch::Tensor& mask);

  const RefinerOptions& options() const { return opt_; }
  torch::nn::Conv2d head{nullptr}, tail{nullptr};
  torch::nn::ModuleList body{nullptr};

 private:
  RefinerOptions opt_;
};
TORCH_MODULE(Refiner);

struct DiscriminatorOptions {
  std::vector<int64_t> widths = {32, 64, 64};
  double leaky_slope = 0.2;
  static DiscriminatorOptions from_config(const KeyValueConfig& cfg);
};

// Temporal patch discriminator: (3, 5, 5) convs with (1, 2, 2) stride and
// LeakyReLU, producing a space-time score map.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit PatchDiscriminatorImpl(DiscriminatorOptions options = {});
  // video [B, 3, N, H, W] in [0, 1] -> scores [B, 1, N, H / 2^k, W / 2^k]
  torch::Tensor forward(const torch::Tensor& video);

  torch::nn::ModuleList convs{nullptr};

 private:
  DiscriminatorOptions opt_;
};
TORCH_MODULE(PatchDiscriminator);

struct AdversarialLoss {
  torch::Tensor d_loss;
  torch::Tensor g_loss;
};

// Hinge losses from precomputed score maps.
AdversarialLoss hinge_losses(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);
// Both losses under the current discriminator state. d_loss uses a detached
// y^, g_loss keeps the graph through y^.
AdversarialLoss loss_adversarial(PatchDiscriminator& disc, const torch::Tensor& y_real,
                                 const torch::Tensor& y_hat);
torch::Tensor discriminator_loss(PatchDiscriminator& disc, const torch::Tensor& y_real,
                                 const torch::Tensor& y_hat);
torch::Tensor generator_loss(PatchDiscriminator& disc, const torch::Tensor& y_hat);
// L1(y^, y) + w_adv * g_loss
torch::Tensor loss_stage3(const torch::Tensor& y_hat, const torch::Tensor& y,
                          const torch::Tensor& g_loss, double w_adv);

}  // namespace mgdm::refine
