// SPDX-License-Identifier: Apache-2.0
#include "mgdm/mask_predictor.h"

#include "mgdm/error.h"
#include "mgdm/tensor_util.h"

namespace mgdm::mask {

MaskPredictorOptions MaskPredictorOptions::from_config(const KeyValueConfig& cfg) {
  MaskPredictorOptions o;
  o.latent_channels = cfg.get_int("latent.channels", o.latent_channels);
  o.prior_dim = cfg.get_int("dme.prior_dim", o.prior_dim);
  o.factor = cfg.get_int("latent.factor", o.factor);
  const auto w = cfg.get_int_list("mask.widths", {});
  if (!w.empty()) o.widths.assign(w.begin(), w.end());
  o.threshold = cfg.get_double("mask.threshold", o.threshold);
  return o;
}

PseudoMask binarize(const torch::Tensor& probs, double threshold) {
  PseudoMask m;
  m.probs = probs;
  m.threshold = threshold;
  m.binary = probs.gt(threshold).to(probs.scalar_type());
  return m;
}

MaskPredictorImpl::MaskPredictorImpl(MaskPredictorOptions o) : opt_(std::move(o)) {
  if (opt_.widths.size() != 4) throw ConfigError("mask predictor: four hidden widths expected");
  convs = register_module("convs", torch::nn::ModuleList());
  int64_t in = opt_.latent_channels + opt_.prior_dim + opt_.attention_channels;
  std::vector<int64_t> outs = opt_.widths;
  outs.push_back(opt_.factor * opt_.factor);
  for (auto out : outs) {
    convs->push_back(torch::nn::Conv3d(torch::nn::Conv3dOptions(in, out, 3).padding(1)));
    in = out;
  }
  torch::NoGradGuard guard;
  auto last = convs->ptr<torch::nn::Conv3dImpl>(convs->size() - 1);
  last->weight.zero_();
  last->bias.zero_();
}

torch::Tensor MaskPredictorImpl::fuse(const torch::Tensor& latent, const torch::Tensor& meta_prior,
                                      const torch::Tensor& attention_prior) {
  for (int d : {0, 2, 3, 4}) {
    if (latent.size(d) != meta_prior.size(d) || latent.size(d) != attention_prior.size(d)) {
      throw ConfigError("predict_mask: latent, metadata prior and attention prior disagree on [B, N, h, w]");
    }
  }
  auto x = torch::cat({latent, meta_prior, attention_prior}, 1);
  if (x.size(1) != convs->ptr<torch::nn::Conv3dImpl>(0)->options.in_channels()) {
    throw ConfigError("predict_mask: input channel count does not match configuration");
  }
  for (std::size_t i = 0; i < convs->size(); ++i) {
    x = convs->ptr<torch::nn::Conv3dImpl>(i)->forward(x);
    if (i + 1 < convs->size()) x = torch::leaky_relu(x, opt_.leaky_slope);
  }
  return x;
}

torch::Tensor MaskPredictorImpl::logits(const torch::Tensor& latent, const torch::Tensor& meta_prior,
                                        const torch::Tensor& attention_prior) {
  return nn::depth_to_space(fuse(latent, meta_prior, attention_prior), opt_.factor);
}

PseudoMask MaskPredictorImpl::forward(const torch::Tensor& latent, const torch::Tensor& meta_prior,
                                      const torch::Tensor& attention_prior) {
  return binarize(torch::sigmoid(logits(latent, meta_prior, attention_prior)), opt_.threshold);
}

torch::Tensor loss_mask(const torch::Tensor& probs, const torch::Tensor& target) {
  if (probs.sizes() != target.sizes()) throw InputError("loss_mask: shape mismatch");
  const auto p = probs.clamp(kProbClamp, 1.0 - kProbClamp);
  return -(target * torch::log(p) + (1.0 - target) * torch::log(1.0 - p)).mean();
}

}  // namespace mgdm::mask
