// SPDX-License-Identifier: Apache-2.0
#include "mgdm/refinement.h"

#include "mgdm/error.h"
#include "mgdm/tensor_util.h"

namespace mgdm::refine {
namespace {

void require_compose_shapes(const torch::Tensor& x, const torch::Tensor& y, const torch::Tensor& m) {
  if (x.sizes() != y.sizes()) throw InputError("compose: frame shapes differ");
  if (m.dim() != x.dim()) throw InputError("compose: mask rank differs from frames");
  for (int64_t d = 0; d < x.dim(); ++d) {
    if (d == 1) continue;
    if (m.size(d) != x.size(d)) throw InputError("compose: mask shape does not match frames");
  }
  if (m.size(1) != 1 && m.size(1) != x.size(1)) throw InputError("compose: mask channel count");
}

}  // namespace

torch::Tensor hard_compose(const torch::Tensor& x, const torch::Tensor& y_tilde,
                           const torch::Tensor& mask) {
  require_compose_shapes(x, y_tilde, mask);
  return torch::where(mask.gt(0.5), y_tilde, x);
}

torch::Tensor soft_compose(const torch::Tensor& x, const torch::Tensor& y_tilde,
                           const torch::Tensor& mask) {
  require_compose_shapes(x, y_tilde, mask);
  return mask * y_tilde + (1.0 - mask) * x;
}

Frames hard_compose(const Frames& x, const Frames& y_tilde, const BinaryMask& mask) {
  require_same_shape(x.shape(), y_tilde.shape(), "compose");
  const Shape4 ms{x.frames(), x.height(), x.width(), 1};
  require_same_shape(mask.shape(), ms, "compose mask");
  Frames out = x;
  for (int n = 0; n < x.frames(); ++n) {
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) {
        const auto m = mask.at(n, y, xx);
        if (m > 1) throw InputError("compose: mask is not binary");
        if (m == 1) {
          for (int c = 0; c < x.channels(); ++c) out.at(n, y, xx, c) = y_tilde.at(n, y, xx, c);
        }
      }
    }
  }
  return out;
}

torch::Tensor window_partition(const torch::Tensor& x, int64_t window) {
  const auto b = x.size(0), h = x.size(1), w = x.size(2), c = x.size(3);
  return x.view({b, h / window, window, w / window, window, c})
      .permute({0, 1, 3, 2, 4, 5})
      .reshape({-1, window * window, c});
}

torch::Tensor window_reverse(const torch::Tensor& windows, int64_t window, int64_t batch,
                             int64_t height, int64_t width) {
  const auto c = windows.size(-1);
  return windows.reshape({batch, height / window, width / window, window, window, c})
      .permute({0, 1, 3, 2, 4, 5})
      .reshape({batch, height, width, c});
}

torch::Tensor shifted_window_mask(int64_t height, int64_t width, int64_t window, int64_t shift) {
  auto region = torch::zeros({1, height, width, 1});
  const int64_t hs[4] = {0, height - window, height - shift, height};
  const int64_t ws[4] = {0, width - window, width - shift, width};
  int64_t label = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      region.slice(1, hs[i], hs[i + 1]).slice(2, ws[j], ws[j + 1]).fill_(static_cast<double>(label++));
    }
  }
  const auto labels = window_partition(region, window).squeeze(-1);  // [nW, L]
  const auto diff = labels.unsqueeze(1) - labels.unsqueeze(2);
  return torch::where(diff.ne(0), torch::full_like(diff, -100.0), torch::zeros_like(diff));
}

torch::Tensor relative_position_index(int64_t window) {
  auto coords = torch::stack(torch::meshgrid({torch::arange(window), torch::arange(window)}, "ij"))
                    .flatten(1);                                    // [2, L]
  auto rel = (coords.unsqueeze(2) - coords.unsqueeze(1)).permute({1, 2, 0});  // [L, L, 2]
  rel = rel + (window - 1);
  return rel.select(2, 0) * (2 * window - 1) + rel.select(2, 1);
}

RefinerOptions RefinerOptions::from_config(const KeyValueConfig& cfg) {
  RefinerOptions o;
  o.width = cfg.get_int("prm.width", o.width);
  o.blocks = cfg.get_int("prm.blocks", o.blocks);
  o.layers_per_block = cfg.get_int("prm.layers", o.layers_per_block);
  o.window = cfg.get_int("prm.window", o.window);
  o.heads = cfg.get_int("prm.heads", o.heads);
  o.mlp_ratio = cfg.get_int("prm.mlp_ratio", o.mlp_ratio);
  o.soft = cfg.get_bool("compose.soft", o.soft);
  return o;
}

SwinLayerImpl::SwinLayerImpl(int64_t dim, int64_t heads, int64_t window, int64_t shift,
                             int64_t mlp_ratio)
    : window_(window), shift_(shift), heads_(heads) {
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn = register_module("attn", nn::MultiHeadAttention(dim, dim, heads));
  mlp = register_module("mlp", nn::FeedForward(dim, mlp_ratio * dim));
  bias_table = register_parameter("bias_table",
                                  torch::randn({(2 * window - 1) * (2 * window - 1), heads}) * 0.02);
  index_ = relative_position_index(window);
}

torch::Tensor SwinLayerImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), h = x.size(1), w = x.size(2);
  if (h % window_ != 0 || w % window_ != 0) {
    throw ConfigError("refine: window " + std::to_string(window_) + " does not divide " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  const auto l = window_ * window_;
  const auto nw = (h / window_) * (w / window_);
  auto bias = bias_table.index_select(0, index_.flatten()).view({l, l, heads_}).permute({2, 0, 1});
  bias = bias.unsqueeze(0);  // [1, heads, L, L]
  const bool shifted = shift_ > 0 && window_ < h && window_ < w;
  if (shifted) {
    const auto m = shifted_window_mask(h, w, window_, shift_).to(x.options());
    bias = bias + m.unsqueeze(1);  // [nW, heads, L, L]
  } else {
    bias = bias.expand({nw, heads_, l, l});
  }
  bias = bias.repeat({b, 1, 1, 1});

  auto y = norm1(x);
  if (shifted) y = torch::roll(y, {-shift_, -shift_}, {1, 2});
  auto win = window_partition(y, window_);
  win = attn->forward(win, win, bias);
  y = window_reverse(win, window_, b, h, w);
  if (shifted) y = torch::roll(y, {shift_, shift_}, {1, 2});
  auto out = x + y;
  return out + mlp(norm2(out));
}

ResidualSwinBlockImpl::ResidualSwinBlockImpl(int64_t dim, int64_t heads, int64_t window,
                                             int64_t n_layers, int64_t mlp_ratio) {
  layers = register_module("layers", torch::nn::ModuleList());
  for (int64_t i = 0; i < n_layers; ++i) {
    layers->push_back(SwinLayer(dim, heads, window, (i % 2 == 1) ? window / 2 : 0, mlp_ratio));
  }
  conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, 3).padding(1)));
}

torch::Tensor ResidualSwinBlockImpl::forward(const torch::Tensor& x) {
  auto t = x.permute({0, 2, 3, 1});
  for (const auto& layer : *layers) t = layer->as<SwinLayerImpl>()->forward(t);
  return x + conv(t.permute({0, 3, 1, 2}));
}

RefinerImpl::RefinerImpl(RefinerOptions o) : opt_(o) {
  using torch::nn::Conv2d;
  using torch::nn::Conv2dOptions;
  head = register_module("head", Conv2d(Conv2dOptions(4, o.width, 3).padding(1)));
  body = register_module("body", torch::nn::ModuleList());
  for (int64_t i = 0; i < o.blocks; ++i) {
    body->push_back(ResidualSwinBlock(o.width, o.heads, o.window, o.layers_per_block, o.mlp_ratio));
  }
  tail = register_module("tail", Conv2d(Conv2dOptions(o.width, 3, 3).padding(1)));
  torch::NoGradGuard guard;
  tail->weight.zero_();
  tail->bias.zero_();
}

torch::Tensor RefinerImpl::forward(const torch::Tensor& x_tilde, const torch::Tensor& mask) {
  const auto b = x_tilde.size(0), h = x_tilde.size(3), w = x_tilde.size(4);
  if (h % opt_.window != 0 || w % opt_.window != 0) {
    throw ConfigError("refine: window " + std::to_string(opt_.window) + " does not divide " +
                      std::to_string(h) + "x" + std::to_string(w));
  }
  auto in = nn::fold_frames(torch::cat({x_tilde, mask.to(x_tilde.scalar_type())}, 1));
  auto shallow = head(in);
  auto f = shallow;
  for (const auto& blk : *body) f = blk->as<ResidualSwinBlockImpl>()->forward(f);
  return x_tilde + nn::unfold_frames(tail(f + shallow), b);
}

RefineOutput RefinerImpl::refine(const torch::Tensor& x, const torch::Tensor& y_tilde,
                                 const torch::Tensor& mask) {
  RefineOutput out;
  out.x_tilde = opt_.soft ? soft_compose(x, y_tilde, mask) : hard_compose(x, y_tilde, mask);
  out.y_hat = forward(out.x_tilde, mask);
  return out;
}

DiscriminatorOptions DiscriminatorOptions::from_config(const KeyValueConfig& cfg) {
  DiscriminatorOptions o;
  const auto w = cfg.get_int_list("disc.widths", {});
  if (!w.empty()) o.widths.assign(w.begin(), w.end());
  return o;
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(DiscriminatorOptions o) : opt_(std::move(o)) {
  convs = register_module("convs", torch::nn::ModuleList());
  int64_t in = 3;
  auto outs = opt_.widths;
  outs.push_back(1);
  for (auto out : outs) {
    convs->push_back(torch::nn::Conv3d(torch::nn::Conv3dOptions(in, out, {3, 5, 5})
                                           .stride({1, 2, 2})
                                           .padding({1, 2, 2})));
    in = out;
  }
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& video) {
  auto x = video * 2.0 - 1.0;
  for (std::size_t i = 0; i < convs->size(); ++i) {
    x = convs->ptr<torch::nn::Conv3dImpl>(i)->forward(x);
    if (i + 1 < convs->size()) x = torch::leaky_relu(x, opt_.leaky_slope);
  }
  return x;
}

AdversarialLoss hinge_losses(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  AdversarialLoss l;
  l.d_loss = torch::relu(1.0 - real_scores).mean() + torch::relu(1.0 + fake_scores).mean();
  l.g_loss = -fake_scores.mean();
  return l;
}

AdversarialLoss loss_adversarial(PatchDiscriminator& disc, const torch::Tensor& y_real,
                                 const torch::Tensor& y_hat) {
  AdversarialLoss l;
  l.d_loss = discriminator_loss(disc, y_real, y_hat);
  l.g_loss = generator_loss(disc, y_hat);
  return l;
}

torch::Tensor discriminator_loss(PatchDiscriminator& disc, const torch::Tensor& y_real,
                                 const torch::Tensor& y_hat) {
  return hinge_losses(disc->forward(y_real), disc->forward(y_hat.detach())).d_loss;
}

torch::Tensor generator_loss(PatchDiscriminator& disc, const torch::Tensor& y_hat) {
  return -disc->forward(y_hat).mean();
}

torch::Tensor loss_stage3(const torch::Tensor& y_hat, const torch::Tensor& y,
                          const torch::Tensor& g_loss, double w_adv) {
  if (y_hat.sizes() != y.sizes()) throw InputError("loss_stage3: shape mismatch");
  return (y_hat - y).abs().mean() + w_adv * g_loss;
}

}  // namespace mgdm::refine
