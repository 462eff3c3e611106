// SPDX-License-Identifier: Apache-2.0
#include "mgdm/attention.h"

#include <cmath>

#include "mgdm/error.h"

namespace mgdm::nn {

torch::Tensor attention_weights(const torch::Tensor& q, const torch::Tensor& k, double scale,
                                const torch::Tensor& bias) {
  auto logits = torch::matmul(q, k.transpose(-1, -2)).mul(scale);
  if (bias.defined()) logits = logits + bias;
  return torch::softmax(logits, -1);
}

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int64_t query_dim, int64_t context_dim,
                                               int64_t heads, bool zero_init_out)
    : heads_(heads) {
  if (heads <= 0 || query_dim % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(query_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
  head_dim_ = query_dim / heads;
  to_q = register_module("to_q", torch::nn::Linear(torch::nn::LinearOptions(query_dim, query_dim).bias(false)));
  to_k = register_module("to_k", torch::nn::Linear(torch::nn::LinearOptions(context_dim, query_dim).bias(false)));
  to_v = register_module("to_v", torch::nn::Linear(torch::nn::LinearOptions(context_dim, query_dim).bias(false)));
  to_out = register_module("to_out", torch::nn::Linear(query_dim, query_dim));
  if (zero_init_out) {
    torch::NoGradGuard guard;
    to_out->weight.zero_();
    to_out->bias.zero_();
  }
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& context,
                                              const torch::Tensor& bias,
                                              torch::Tensor* weights_out) {
  const auto b = x.size(0), lq = x.size(1), lk = context.size(1);
  auto split = [&](const torch::Tensor& t, int64_t len) {
    return t.reshape({b, len, heads_, head_dim_}).transpose(1, 2);
  };
  const auto q = split(to_q(x), lq);
  const auto k = split(to_k(context), lk);
  const auto v = split(to_v(context), lk);
  const auto w = attention_weights(q, k, 1.0 / std::sqrt(static_cast<double>(head_dim_)), bias);
  if (weights_out) *weights_out = w;
  auto out = torch::matmul(w, v).transpose(1, 2).reshape({b, lq, heads_ * head_dim_});
  return to_out(out);
}

FeedForwardImpl::FeedForwardImpl(int64_t dim, int64_t hidden) {
  fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& x) {
  return fc2(torch::gelu(fc1(x)));
}

}  // namespace mgdm::nn
