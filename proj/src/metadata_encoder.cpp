// SPDX-License-Identifier: Apache-2.0
#include "mgdm/metadata_encoder.h"

#include "mgdm/error.h"
#include "mgdm/tensor_util.h"

namespace mgdm::meta {

MetadataEncoderOptions MetadataEncoderOptions::from_config(const KeyValueConfig& cfg) {
  MetadataEncoderOptions o;
  o.conv_width = cfg.get_int("dme.conv_width", o.conv_width);
  o.embed_width = cfg.get_int("dme.embed_width", o.embed_width);
  o.mlp_hidden = cfg.get_int("dme.mlp_hidden", o.mlp_hidden);
  o.heads = cfg.get_int("dme.heads", o.heads);
  o.ctx_dim = cfg.get_int("dme.ctx_dim", o.ctx_dim);
  o.prior_dim = cfg.get_int("dme.prior_dim", o.prior_dim);
  o.pool = cfg.get_int("dme.pool", o.pool);
  o.motion_scale = cfg.get_double("dme.motion_scale", o.motion_scale);
  o.temporal_attention = cfg.get_bool("dme.temporal", o.temporal_attention);
  return o;
}

torch::Tensor zero_tokens(int64_t batch, int64_t frames, int64_t h, int64_t w, int64_t ctx_dim,
                          torch::TensorOptions opts) {
  return torch::zeros({batch, frames, h * w, ctx_dim}, opts);
}

MetadataEncoderImpl::MetadataEncoderImpl(MetadataEncoderOptions o) : opt_(o) {
  const auto d = o.embed_width;
  conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(4, o.conv_width, 3).padding(1)));
  conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(o.conv_width, d, 3).padding(1)));
  temporal_norm1 = register_module("temporal_norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  temporal_attn = register_module("temporal_attn", nn::MultiHeadAttention(d, d, o.heads));
  temporal_norm2 = register_module("temporal_norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({d})));
  temporal_ff = register_module("temporal_ff", nn::FeedForward(d, 2 * d));
  type_fc1 = register_module("type_fc1", torch::nn::Linear(3, o.mlp_hidden));
  type_fc2 = register_module("type_fc2", torch::nn::Linear(o.mlp_hidden, d));
  token_proj = register_module("token_proj", torch::nn::Linear(d, o.ctx_dim));
  prior_proj = register_module("prior_proj", torch::nn::Linear(d, o.prior_dim));
  // Tokens start at zero so that enabling the metadata context after a
  // context-free warm-up does not perturb the denoiser.
  torch::NoGradGuard guard;
  token_proj->weight.zero_();
  token_proj->bias.zero_();
}

torch::Tensor MetadataEncoderImpl::encode_motion(const torch::Tensor& motion) {
  if (motion.dim() != 5 || motion.size(1) != 4) {
    throw InputError("encode_motion: expected [B, 4, N, H, W]");
  }
  const auto b = motion.size(0), n = motion.size(2), hh = motion.size(3), ww = motion.size(4);
  const auto f = opt_.downsample();
  if (hh % f != 0 || ww % f != 0) {
    throw ConfigError("encode_motion: frame size " + std::to_string(hh) + "x" + std::to_string(ww) +
                      " not divisible by pooling factor " + std::to_string(f));
  }
  auto x = nn::fold_frames(motion).div(opt_.motion_scale);
  x = torch::avg_pool2d(torch::leaky_relu(conv1(x), opt_.leaky_slope), opt_.pool);
  x = torch::avg_pool2d(torch::leaky_relu(conv2(x), opt_.leaky_slope), opt_.pool);
  const auto d = x.size(1), h = x.size(2), w = x.size(3);
  if (!opt_.temporal_attention) return nn::unfold_frames(x, b);

  // [B*N, d, h, w] -> [B*h*w, N, d]
  auto seq = x.reshape({b, n, d, h, w}).permute({0, 3, 4, 1, 2}).reshape({b * h * w, n, d});
  const auto normed = temporal_norm1(seq);
  seq = seq + temporal_attn(normed, normed);
  seq = seq + temporal_ff(temporal_norm2(seq));
  return seq.reshape({b, h, w, n, d}).permute({0, 4, 3, 1, 2});
}

torch::Tensor MetadataEncoderImpl::one_hot(const torch::Tensor& types, torch::Dtype dtype) {
  if (types.numel() > 0 && (types.min().item<int64_t>() < 0 || types.max().item<int64_t>() > 2)) {
    throw InputError("encode_frametype: frame type outside {I, P, B}");
  }
  return torch::one_hot(types.to(torch::kInt64), 3).to(dtype);
}

torch::Tensor MetadataEncoderImpl::encode_frametype(const torch::Tensor& types) {
  const auto x = one_hot(types, type_fc1->weight.scalar_type());
  return type_fc2(torch::silu(type_fc1(x)));
}

MetadataRepresentation MetadataEncoderImpl::fuse_and_project(const torch::Tensor& motion_feat,
                                                             const torch::Tensor& type_feat) {
  const auto b = motion_feat.size(0), d = motion_feat.size(1), n = motion_feat.size(2),
             h = motion_feat.size(3), w = motion_feat.size(4);
  if (type_feat.size(-1) != d || type_feat.size(1) != n) {
    throw ConfigError("fuse_and_project: frame-type width " + std::to_string(type_feat.size(-1)) +
                      " does not match motion width " + std::to_string(d));
  }
  // [B, d, N, h, w] + [B, d, N, 1, 1]
  const auto fused = motion_feat + type_feat.permute({0, 2, 1}).unsqueeze(-1).unsqueeze(-1);
  const auto per_site = fused.permute({0, 2, 3, 4, 1});  // [B, N, h, w, d]
  MetadataRepresentation rep;
  rep.h = h;
  rep.w = w;
  rep.tokens = token_proj(per_site).reshape({b, n, h * w, opt_.ctx_dim});
  rep.prior = prior_proj(per_site).permute({0, 4, 1, 2, 3});
  return rep;
}

MetadataRepresentation MetadataEncoderImpl::forward(const torch::Tensor& motion,
                                                    const torch::Tensor& types) {
  return fuse_and_project(encode_motion(motion), encode_frametype(types));
}

}  // namespace mgdm::meta
