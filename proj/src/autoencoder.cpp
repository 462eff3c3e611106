// SPDX-License-Identifier: Apache-2.0
#include "mgdm/autoencoder.h"

#include "mgdm/error.h"
#include "mgdm/tensor_util.h"

namespace mgdm::diffusion {
namespace {

class ResidualUnitImpl : public torch::nn::Module {
 public:
  explicit ResidualUnitImpl(int64_t ch) {
    conv1 = register_module("conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 3).padding(1)));
    conv2 = register_module("conv2", torch::nn::Conv2d(torch::nn::Conv2dOptions(ch, ch, 3).padding(1)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    return x + conv2(torch::silu(conv1(torch::silu(x))));
  }
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ResidualUnit);

int stages_for(int64_t factor) {
  int s = 0;
  for (int64_t f = factor; f > 1; f /= 2) {
    if (f % 2 != 0) throw ConfigError("autoencoder: latent factor must be a power of two");
    ++s;
  }
  return s;
}

}  // namespace

AutoencoderOptions AutoencoderOptions::from_config(const KeyValueConfig& cfg) {
  AutoencoderOptions o;
  o.factor = cfg.get_int("latent.factor", o.factor);
  o.latent_channels = cfg.get_int("latent.channels", o.latent_channels);
  o.width = cfg.get_int("ae.width", o.width);
  return o;
}

FrameAutoencoderImpl::FrameAutoencoderImpl(AutoencoderOptions o) : opt_(o) {
  using torch::nn::Conv2d;
  using torch::nn::Conv2dOptions;
  const int stages = stages_for(o.factor);
  const auto w = o.width;

  torch::nn::Sequential enc;
  enc->push_back(Conv2d(Conv2dOptions(3, w, 3).padding(1)));
  for (int s = 0; s < stages; ++s) {
    enc->push_back(ResidualUnit(w));
    enc->push_back(Conv2d(Conv2dOptions(w, w, 4).stride(2).padding(1)));
  }
  enc->push_back(ResidualUnit(w));
  enc->push_back(torch::nn::SiLU());
  enc->push_back(Conv2d(Conv2dOptions(w, o.latent_channels, 1)));
  encoder = register_module("encoder", enc);

  torch::nn::Sequential dec;
  dec->push_back(Conv2d(Conv2dOptions(o.latent_channels, w, 3).padding(1)));
  dec->push_back(ResidualUnit(w));
  for (int s = 0; s < stages; ++s) {
    dec->push_back(torch::nn::Upsample(
        torch::nn::UpsampleOptions().scale_factor(std::vector<double>{2.0, 2.0}).mode(torch::kNearest)));
    dec->push_back(Conv2d(Conv2dOptions(w, w, 3).padding(1)));
    dec->push_back(ResidualUnit(w));
  }
  dec->push_back(torch::nn::SiLU());
  dec->push_back(Conv2d(Conv2dOptions(w, 3, 3).padding(1)));
  decoder = register_module("decoder", dec);

  latent_scale_ = register_buffer("latent_scale", torch::ones({1}));
}

void FrameAutoencoderImpl::set_latent_scale(double scale) {
  if (!(scale > 0.0)) throw InputError("latent scale must be positive");
  torch::NoGradGuard guard;
  latent_scale_.fill_(scale);
}

torch::Tensor FrameAutoencoderImpl::encode(const torch::Tensor& frames) {
  const auto h = frames.size(3), w = frames.size(4);
  if (h % opt_.factor != 0 || w % opt_.factor != 0) {
    throw ConfigError("autoencode: frame size " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by latent factor " + std::to_string(opt_.factor));
  }
  const auto b = frames.size(0);
  auto z = encoder->forward(nn::fold_frames(frames).mul(2.0).sub(1.0));
  return nn::unfold_frames(z, b).div(latent_scale_);
}

torch::Tensor FrameAutoencoderImpl::decode(const torch::Tensor& latent) {
  const auto b = latent.size(0);
  auto y = decoder->forward(nn::fold_frames(latent.mul(latent_scale_)));
  return nn::unfold_frames(y, b).add(1.0).mul(0.5);
}

}  // namespace mgdm::diffusion
