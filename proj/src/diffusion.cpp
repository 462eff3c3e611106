// SPDX-License-Identifier: Apache-2.0
#include "mgdm/diffusion.h"

#include "mgdm/error.h"
#include "mgdm/tensor_util.h"

namespace mgdm::diffusion {

torch::Tensor add_noise(const NoiseSchedule& schedule, const torch::Tensor& x0, int t,
                        const torch::Tensor& eps) {
  if (t < 0 || t > schedule.steps) {
    throw InputError("add_noise: t = " + std::to_string(t) + " outside [0, " +
                     std::to_string(schedule.steps) + "]");
  }
  if (x0.sizes() != eps.sizes()) throw InputError("add_noise: eps shape differs from x0");
  return x0 * schedule.gamma[t] + eps * schedule.delta[t];
}

torch::Tensor add_noise(const NoiseSchedule& schedule, const torch::Tensor& x0,
                        const torch::Tensor& t, const torch::Tensor& eps) {
  if (x0.sizes() != eps.sizes()) throw InputError("add_noise: eps shape differs from x0");
  if (t.numel() != x0.size(0)) throw InputError("add_noise: need one timestep per sample");
  const auto tmin = t.min().item<int64_t>(), tmax = t.max().item<int64_t>();
  if (tmin < 0 || tmax > schedule.steps) throw InputError("add_noise: timestep out of range");
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto gamma = torch::tensor(schedule.gamma, opts).index_select(0, t.to(torch::kInt64));
  auto delta = torch::tensor(schedule.delta, opts).index_select(0, t.to(torch::kInt64));
  std::vector<int64_t> bshape(x0.dim(), 1);
  bshape[0] = x0.size(0);
  gamma = gamma.reshape(bshape).to(x0.scalar_type());
  delta = delta.reshape(bshape).to(x0.scalar_type());
  return x0 * gamma + eps * delta;
}

DenoiseResult denoise_step(VideoUNet& unet, const torch::Tensor& x_t, const torch::Tensor& t,
                           const DiffusionCondition& cond, AttentionTrace* trace) {
  const auto& tokens = cond.metadata.tokens;
  if (cond.metadata.h != 0 && (cond.metadata.h != x_t.size(3) || cond.metadata.w != x_t.size(4))) {
    throw ConfigError("denoise: metadata grid does not match the latent grid");
  }
  auto out = unet->forward(x_t, t, cond.corrupted_latent, tokens, trace);
  DenoiseResult r;
  r.eps = out.eps;
  r.prior = gather_attention_prior(out.cross, x_t.size(3), x_t.size(4));
  return r;
}

torch::Tensor loss_denoise(const torch::Tensor& eps, const torch::Tensor& eps_hat) {
  return torch::mse_loss(eps_hat, eps);
}

SampleResult sample_from(const NoiseSchedule& schedule, const EpsPredictor& predictor,
                         torch::Tensor x, const SampleOptions& so) {
  const auto ts = schedule.sampling_timesteps(so.steps, so.spacing);
  SampleResult res;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int s = i + 1 < ts.size() ? ts[i + 1] : 0;
    auto pred = predictor(x, t);
    auto eps = pred.eps;
    auto x0_hat = (x - eps * schedule.delta[t]) / schedule.gamma[t];
    if (so.clip_x0 > 0.0) {
      // keep x_t consistent with the clamped estimate
      x0_hat = x0_hat.clamp(-so.clip_x0, so.clip_x0);
      eps = (x - x0_hat * schedule.gamma[t]) / schedule.delta[t];
    }
    x = x0_hat * schedule.gamma[s] + eps * schedule.delta[s];
    res.prior = pred.prior;
  }
  res.latent = x;
  return res;
}

SampleResult sample(const NoiseSchedule& schedule, const EpsPredictor& predictor,
                    torch::IntArrayRef shape, torch::TensorOptions options,
                    const SampleOptions& so) {
  if (so.steps <= 0) throw InputError("sample: steps must be positive");
  auto gen = nn::make_generator(so.seed);
  auto x = torch::randn(shape, gen, options.dtype(torch::kFloat64)).to(options);
  return sample_from(schedule, predictor, x, so);
}

SampleResult sample(VideoUNet& unet, const NoiseSchedule& schedule, const DiffusionCondition& cond,
                    const SampleOptions& so) {
  torch::NoGradGuard guard;
  const auto& ref = cond.corrupted_latent;
  EpsPredictor predictor = [&](const torch::Tensor& x_t, int t) {
    auto tt = torch::full({x_t.size(0)}, t, torch::kInt64);
    return denoise_step(unet, x_t, tt, cond);
  };
  return sample(schedule, predictor, ref.sizes(), ref.options(), so);
}

}  // namespace mgdm::diffusion
