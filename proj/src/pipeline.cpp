// SPDX-License-Identifier: Apache-2.0
#include "mgdm/pipeline.h"

#include "mgdm/diffusion.h"
#include "mgdm/error.h"
#include "mgdm/tensor_util.h"

namespace mgdm::pipeline {

ClipTensors ClipTensors::from_bundle(const ClipBundle& b) {
  ClipTensors c;
  c.id = b.clip_id;
  c.corrupted = nn::frames_to_tensor(b.corrupted);
  c.motion = nn::motion_to_tensor(b.motion);
  c.types = nn::frame_types_to_tensor(b.frame_types);
  if (b.clean) c.clean = nn::frames_to_tensor(*b.clean);
  if (b.gt_mask) c.mask = nn::mask_to_tensor(*b.gt_mask);
  return c;
}

ClipTensors ClipTensors::window(int64_t start, int64_t count) const {
  auto cut = [&](const torch::Tensor& t, int64_t dim) {
    return t.defined() ? t.narrow(dim, start, count) : t;
  };
  ClipTensors w;
  w.id = id;
  w.clean = cut(clean, 2);
  w.corrupted = cut(corrupted, 2);
  w.motion = cut(motion, 2);
  w.types = cut(types, 1);
  w.mask = cut(mask, 2);
  return w;
}

InferenceOptions InferenceOptions::from_model(const model::Model& m, uint64_t seed) {
  InferenceOptions o;
  o.sample_steps = m.config().sample_steps;
  o.clip_x0 = m.config().clip_x0;
  o.spacing = m.config().spacing;
  o.seed = seed;
  return o;
}

Inference infer(model::Model& m, const ClipTensors& clip, const InferenceOptions& options) {
  torch::NoGradGuard guard;
  Inference r;
  r.corrupted_latent = m.ae->encode(clip.corrupted);
  const auto rep = m.dme->forward(clip.motion, clip.types);
  diffusion::SampleOptions so;
  so.steps = options.sample_steps;
  so.seed = options.seed;
  so.clip_x0 = options.clip_x0;
  so.spacing = options.spacing;
  const auto sampled = diffusion::sample(m.unet, m.schedule(), {r.corrupted_latent, rep}, so);
  r.latent = sampled.latent;
  const auto mask = m.pmp->forward(r.corrupted_latent, rep.prior, sampled.prior);
  r.probs = mask.probs;
  r.binary = mask.binary;
  r.y_tilde = m.ae->decode(r.latent).clamp(0.0, 1.0);
  if (options.refine) {
    const auto out = m.prm->refine(clip.corrupted, r.y_tilde, m.config().prm.soft ? r.probs : r.binary);
    r.x_tilde = out.x_tilde;
    r.y_hat = out.y_hat.clamp(0.0, 1.0);
  } else {
    r.x_tilde = m.config().prm.soft ? refine::soft_compose(clip.corrupted, r.y_tilde, r.probs)
                                    : refine::hard_compose(clip.corrupted, r.y_tilde, r.binary);
  }
  return r;
}

}  // namespace mgdm::pipeline
