// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite-difference checks of the trainable modules on tiny double-precision
// configurations. Every parameter is re-drawn at random first so that
// zero-initialized layers do not hide gradient paths.

#include <torch/torch.h>

#include <string>
#include <vector>

#include "gradcheck.h"
#include "mgdm/diffusion.h"
#include "mgdm/mask_predictor.h"
#include "mgdm/metadata_encoder.h"
#include "mgdm/refinement.h"
#include "mgdm/unet.h"

namespace mgdm::testing {

struct NamedGradCheck {
  std::string name;
  GradCheckResult result;
};

inline torch::Tensor dd(torch::IntArrayRef shape, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randn(shape, gen, torch::kFloat64);
}

inline GradCheckResult check_metadata_encoder() {
  meta::MetadataEncoderOptions o;
  o.conv_width = 4;
  o.embed_width = 4;
  o.mlp_hidden = 5;
  o.heads = 2;
  o.ctx_dim = 6;
  o.prior_dim = 3;
  meta::MetadataEncoder dme(o);
  dme->to(torch::kFloat64);
  randomize_parameters(*dme, 101, 0.5);
  auto motion = dd({1, 4, 3, 8, 8}, 102).requires_grad_(true);
  const auto types = torch::tensor({{0, 1, 2}}, torch::kInt64);
  const auto probe = dme->forward(motion, types);
  const auto wt = probe_weights(probe.tokens, 103), wp = probe_weights(probe.prior, 104);
  auto loss = [&] {
    const auto rep = dme->forward(motion, types);
    return (rep.tokens * wt).sum() + (rep.prior * wp).sum();
  };
  return gradcheck(*dme, loss, {motion});
}

inline GradCheckResult check_transformer_block() {
  diffusion::VideoTransformerBlock blk(8, 6, 2, 2, true);
  blk->to(torch::kFloat64);
  randomize_parameters(*blk, 111, 0.4);
  auto x = dd({1, 8, 3, 4, 4}, 112).requires_grad_(true);
  auto ctx = dd({1, 3, 2, 6}, 113).requires_grad_(true);
  const auto w = probe_weights(x, 114);
  torch::Tensor cross;
  blk->forward(x, ctx, &cross);
  const auto wc = probe_weights(cross, 115);
  auto loss = [&] {
    torch::Tensor c;
    const auto y = blk->forward(x, ctx, &c);
    return (y * w).sum() + (c * wc).sum();
  };
  return gradcheck(*blk, loss, {x, ctx});
}

inline GradCheckResult check_denoise_step() {
  diffusion::UNetOptions o;
  o.latent_channels = 2;
  o.widths = {4, 8, 8};
  o.ctx_dim = 6;
  o.heads = 2;
  o.time_dim = 8;
  diffusion::VideoUNet unet(o);
  unet->to(torch::kFloat64);
  randomize_parameters(*unet, 121, 0.3);
  const auto s = diffusion::NoiseSchedule::cosine(1000);
  const auto x0 = dd({1, 2, 2, 8, 8}, 122);
  const auto eps = dd({1, 2, 2, 8, 8}, 123);
  const auto t = torch::tensor({400}, torch::kInt64);
  auto cond_latent = dd({1, 2, 2, 8, 8}, 124).requires_grad_(true);
  auto tokens = dd({1, 2, 3, 6}, 125).requires_grad_(true);
  const auto x_t = diffusion::add_noise(s, x0, t, eps);
  diffusion::DiffusionCondition cond{cond_latent, {tokens, torch::Tensor(), 8, 8}};
  const auto probe = diffusion::denoise_step(unet, x_t, t, cond);
  const auto wp = probe_weights(probe.prior, 126);
  auto loss = [&] {
    const auto r = diffusion::denoise_step(unet, x_t, t, cond);
    return diffusion::loss_denoise(eps, r.eps) + 0.1 * (r.prior * wp).sum();
  };
  return gradcheck(*unet, loss, {cond_latent, tokens}, 4);
}

inline GradCheckResult check_mask_predictor() {
  mask::MaskPredictorOptions o;
  o.latent_channels = 2;
  o.prior_dim = 3;
  o.attention_channels = 4;
  o.factor = 2;
  o.widths = {5, 5, 4, 4};
  mask::MaskPredictor pmp(o);
  pmp->to(torch::kFloat64);
  randomize_parameters(*pmp, 131, 0.3);
  auto xl = dd({1, 2, 3, 4, 4}, 132).requires_grad_(true);
  auto pm = dd({1, 3, 3, 4, 4}, 133).requires_grad_(true);
  auto att = dd({1, 4, 3, 4, 4}, 134).requires_grad_(true);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(135);
  const auto target = torch::randint(0, 2, {1, 1, 3, 8, 8}, gen, torch::kFloat64);
  auto loss = [&] { return mask::loss_mask(pmp->forward(xl, pm, att).probs, target); };
  return gradcheck(*pmp, loss, {xl, pm, att});
}

inline GradCheckResult check_refinement() {
  refine::RefinerOptions o;
  o.width = 8;
  o.blocks = 1;
  o.layers_per_block = 2;
  o.window = 4;
  o.heads = 2;
  refine::Refiner prm(o);
  prm->to(torch::kFloat64);
  randomize_parameters(*prm, 141, 0.2);
  refine::DiscriminatorOptions dopt;
  dopt.widths = {4, 4};
  refine::PatchDiscriminator disc(dopt);
  disc->to(torch::kFloat64);
  randomize_parameters(*disc, 142, 0.3);
  for (auto& p : disc->parameters()) p.requires_grad_(false);

  auto gen = at::make_generator<at::CPUGeneratorImpl>(143);
  const auto x = torch::rand({1, 3, 2, 8, 8}, gen, torch::kFloat64);
  auto y_tilde = torch::rand({1, 3, 2, 8, 8}, gen, torch::kFloat64).requires_grad_(true);
  const auto m = torch::randint(0, 2, {1, 1, 2, 8, 8}, gen, torch::kFloat64);
  const auto y = torch::rand({1, 3, 2, 8, 8}, gen, torch::kFloat64);
  auto loss = [&] {
    const auto out = prm->refine(x, y_tilde, m);
    return refine::loss_stage3(out.y_hat, y, refine::generator_loss(disc, out.y_hat), 0.5);
  };
  return gradcheck(*prm, loss, {y_tilde});
}

inline std::vector<NamedGradCheck> run_gradient_suite() {
  torch::set_num_threads(1);
  return {
      {"metadata encoder", check_metadata_encoder()},
      {"transformer block", check_transformer_block()},
      {"denoise step", check_denoise_step()},
      {"mask predictor", check_mask_predictor()},
      {"refinement", check_refinement()},
  };
}

}  // namespace mgdm::testing
