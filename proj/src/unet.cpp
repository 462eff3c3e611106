// SPDX-License-Identifier: Apache-2.0
#include "mgdm/unet.h"

#include <cmath>

#include "mgdm/error.h"
#include "mgdm/tensor_util.h"

namespace mgdm::diffusion {

using torch::nn::Conv3d;
using torch::nn::Conv3dOptions;

UNetOptions UNetOptions::from_config(const KeyValueConfig& cfg) {
  UNetOptions o;
  o.latent_channels = cfg.get_int("latent.channels", o.latent_channels);
  const auto w = cfg.get_int_list("unet.widths", {});
  if (!w.empty()) o.widths.assign(w.begin(), w.end());
  o.ctx_dim = cfg.get_int("dme.ctx_dim", o.ctx_dim);
  o.heads = cfg.get_int("unet.heads", o.heads);
  o.time_dim = cfg.get_int("unet.time_dim", o.time_dim);
  o.temporal_attention = cfg.get_bool("unet.temporal", o.temporal_attention);
  return o;
}

torch::Tensor timestep_embedding(const torch::Tensor& t, int64_t dim) {
  const int64_t half = dim / 2;
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto freqs = torch::exp(torch::arange(half, opts).mul(-std::log(10000.0) / half));
  auto args = t.to(torch::kFloat64).unsqueeze(-1) * freqs.unsqueeze(0);
  return torch::cat({torch::cos(args), torch::sin(args)}, -1);
}

ResBlock3dImpl::ResBlock3dImpl(int64_t in, int64_t out, int64_t time_dim) {
  norm1 = register_module("norm1", torch::nn::GroupNorm(nn::norm_groups(in), in));
  conv1 = register_module("conv1", Conv3d(Conv3dOptions(in, out, 3).padding(1)));
  time_proj = register_module("time_proj", torch::nn::Linear(time_dim, out));
  norm2 = register_module("norm2", torch::nn::GroupNorm(nn::norm_groups(out), out));
  conv2 = register_module("conv2", Conv3d(Conv3dOptions(out, out, 3).padding(1)));
  if (in != out) skip = register_module("skip", Conv3d(Conv3dOptions(in, out, 1)));
}

torch::Tensor ResBlock3dImpl::forward(const torch::Tensor& x, const torch::Tensor& temb) {
  auto h = conv1(torch::silu(norm1(x)));
  h = h + time_proj(temb).unsqueeze(-1).unsqueeze(-1).unsqueeze(-1);
  h = conv2(torch::silu(norm2(h)));
  return (skip ? skip(x) : x) + h;
}

VideoTransformerBlockImpl::VideoTransformerBlockImpl(int64_t c, int64_t ctx_dim, int64_t heads,
                                                     int64_t ff_mult, bool temporal_on)
    : temporal(temporal_on) {
  auto ln = [&](const char* name) {
    return register_module(name, torch::nn::LayerNorm(torch::nn::LayerNormOptions({c})));
  };
  norm_self = ln("norm_self");
  self_attn = register_module("self_attn", nn::MultiHeadAttention(c, c, heads));
  norm_cross = ln("norm_cross");
  cross_attn = register_module("cross_attn", nn::MultiHeadAttention(c, ctx_dim, heads));
  norm_temporal = ln("norm_temporal");
  temporal_attn = register_module("temporal_attn", nn::MultiHeadAttention(c, c, heads, true));
  norm_ff = ln("norm_ff");
  ff = register_module("ff", nn::FeedForward(c, ff_mult * c));
}

torch::Tensor VideoTransformerBlockImpl::forward(const torch::Tensor& x,
                                                 const torch::Tensor& context,
                                                 torch::Tensor* cross_out, AttentionTrace* trace) {
  const auto b = x.size(0), c = x.size(1), n = x.size(2), h = x.size(3), w = x.size(4);
  if (context.size(0) != b || context.size(1) != n) {
    throw ConfigError("transformer block: context batch/frames do not match latent");
  }
  torch::Tensor weights;
  torch::Tensor* wp = trace ? &weights : nullptr;

  // Per-frame spatial tokens [B*N, h*w, C].
  auto tokens = x.permute({0, 2, 3, 4, 1}).reshape({b * n, h * w, c});
  auto normed = norm_self(tokens);
  tokens = tokens + self_attn->forward(normed, normed, torch::Tensor(), wp);
  if (trace) trace->self_weights.push_back(weights);

  const auto ctx = context.reshape({b * n, context.size(2), context.size(3)});
  const auto cross = cross_attn->forward(norm_cross(tokens), ctx, torch::Tensor(), wp);
  if (trace) trace->cross_weights.push_back(weights);
  tokens = tokens + cross;
  if (cross_out) *cross_out = cross.reshape({b, n, h, w, c}).permute({0, 4, 1, 2, 3});

  if (temporal) {
    // Per-site temporal tokens [B*h*w, N, C].
    auto seq = tokens.reshape({b, n, h * w, c}).permute({0, 2, 1, 3}).reshape({b * h * w, n, c});
    auto tn = norm_temporal(seq);
    seq = seq + temporal_attn->forward(tn, tn, torch::Tensor(), wp);
    if (trace) trace->temporal_weights.push_back(weights);
    tokens = seq.reshape({b, h * w, n, c}).permute({0, 2, 1, 3}).reshape({b * n, h * w, c});
  }

  tokens = tokens + ff(norm_ff(tokens));
  return tokens.reshape({b, n, h, w, c}).permute({0, 4, 1, 2, 3});
}

VideoUNetImpl::VideoUNetImpl(UNetOptions o) : opt_(std::move(o)) {
  if (opt_.widths.size() != 3) throw ConfigError("unet: exactly three widths expected");
  const auto w0 = opt_.widths[0], w1 = opt_.widths[1], w2 = opt_.widths[2];
  const auto td = opt_.time_dim;
  const auto c = opt_.latent_channels;
  auto block = [&](const char* name, int64_t ch) {
    return register_module(name, VideoTransformerBlock(ch, opt_.ctx_dim, opt_.heads, opt_.ff_mult,
                                                       opt_.temporal_attention));
  };

  time_fc1 = register_module("time_fc1", torch::nn::Linear(w0, td));
  time_fc2 = register_module("time_fc2", torch::nn::Linear(td, td));
  conv_in = register_module("conv_in", Conv3d(Conv3dOptions(2 * c, w0, 3).padding(1)));
  res0 = register_module("res0", ResBlock3d(w0, w0, td));
  attn0 = block("attn0", w0);
  down0 = register_module("down0", Conv3d(Conv3dOptions(w0, w0, {1, 3, 3}).stride({1, 2, 2}).padding({0, 1, 1})));
  res1 = register_module("res1", ResBlock3d(w0, w1, td));
  attn1 = block("attn1", w1);
  down1 = register_module("down1", Conv3d(Conv3dOptions(w1, w1, {1, 3, 3}).stride({1, 2, 2}).padding({0, 1, 1})));
  mid_res_a = register_module("mid_res_a", ResBlock3d(w1, w2, td));
  mid_attn = block("mid_attn", w2);
  mid_res_b = register_module("mid_res_b", ResBlock3d(w2, w2, td));
  up1_conv = register_module("up1_conv", Conv3d(Conv3dOptions(w2, w1, 3).padding(1)));
  up1_res = register_module("up1_res", ResBlock3d(2 * w1, w1, td));
  up0_conv = register_module("up0_conv", Conv3d(Conv3dOptions(w1, w0, 3).padding(1)));
  up0_res = register_module("up0_res", ResBlock3d(2 * w0, w0, td));
  norm_out = register_module("norm_out", torch::nn::GroupNorm(nn::norm_groups(w0), w0));
  conv_out = register_module("conv_out", Conv3d(Conv3dOptions(w0, c, 3).padding(1)));
}

int64_t VideoUNetImpl::prior_channels() const {
  return opt_.widths[0] + opt_.widths[1] + opt_.widths[2];
}

namespace {

torch::Tensor upsample_spatial(const torch::Tensor& x) {
  const auto b = x.size(0);
  auto y = torch::upsample_nearest2d(nn::fold_frames(x), {x.size(3) * 2, x.size(4) * 2});
  return nn::unfold_frames(y, b);
}

}  // namespace

UNetOutput VideoUNetImpl::forward(const torch::Tensor& x_t, const torch::Tensor& t,
                                  const torch::Tensor& cond_latent, const torch::Tensor& context,
                                  AttentionTrace* trace) {
  if (x_t.sizes() != cond_latent.sizes()) {
    throw ConfigError("denoise: corrupted latent is not aligned with the noisy latent");
  }
  if (x_t.size(1) != opt_.latent_channels) throw ConfigError("denoise: latent channel mismatch");
  if (x_t.size(3) % 4 != 0 || x_t.size(4) % 4 != 0) {
    throw ConfigError("denoise: latent size must be divisible by 4");
  }
  if (context.dim() != 4 || context.size(2) < 1 || context.size(3) != opt_.ctx_dim) {
    throw ConfigError("denoise: metadata context must be [B, N, L >= 1, ctx_dim]");
  }
  const auto dtype = x_t.scalar_type();
  auto temb = timestep_embedding(t, opt_.widths[0]).to(dtype);
  temb = time_fc2(torch::silu(time_fc1(temb)));

  UNetOutput out;
  out.cross.resize(3);
  auto h = conv_in(torch::cat({x_t, cond_latent}, 1));
  h = attn0(res0(h, temb), context, &out.cross[0], trace);
  const auto skip0 = h;
  h = attn1(res1(down0(h), temb), context, &out.cross[1], trace);
  const auto skip1 = h;
  h = mid_res_a(down1(h), temb);
  h = mid_attn(h, context, &out.cross[2], trace);
  h = mid_res_b(h, temb);
  h = up1_res(torch::cat({up1_conv(upsample_spatial(h)), skip1}, 1), temb);
  h = up0_res(torch::cat({up0_conv(upsample_spatial(h)), skip0}, 1), temb);
  out.eps = conv_out(torch::silu(norm_out(h)));
  return out;
}

torch::Tensor gather_attention_prior(const std::vector<torch::Tensor>& cross, int64_t h, int64_t w) {
  std::vector<torch::Tensor> maps;
  for (const auto& c : cross) {
    const auto b = c.size(0);
    auto folded = nn::fold_frames(c);
    if (folded.size(2) != h || folded.size(3) != w) {
      folded = torch::nn::functional::interpolate(
          folded, torch::nn::functional::InterpolateFuncOptions()
                      .size(std::vector<int64_t>{h, w})
                      .mode(torch::kBilinear)
                      .align_corners(false));
    }
    maps.push_back(nn::unfold_frames(folded, b));
  }
  return torch::cat(maps, 1);
}

}  // namespace mgdm::diffusion
