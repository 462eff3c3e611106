// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <torch/torch.h>

namespace mgdm::nn {

// softmax(q k^T * scale + bias) over the last axis.
// q: [..., Lq, d], k: [..., Lk, d]; bias broadcastable to [..., Lq, Lk].
torch::Tensor attention_weights(const torch::Tensor& q, const torch::Tensor& k, double scale,
                                const torch::Tensor& bias = {});

// Multi-head attention with separate query and context widths. Queries come
// from `x` [B, Lq, query_dim], keys and values from `context` [B, Lk, context_dim].
class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(int64_t query_dim, int64_t context_dim, int64_t heads,
                         bool zero_init_out = false);

  // `bias` is added to the attention logits, shape broadcastable to
  // [B, heads, Lq, Lk]. When `weights_out` is non-null it receives the
  // attention probabilities [B, heads, Lq, Lk].
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& context,
                        const torch::Tensor& bias = {}, torch::Tensor* weights_out = nullptr);

  int64_t heads() const { return heads_; }
  torch::nn::Linear to_q{nullptr}, to_k{nullptr}, to_v{nullptr}, to_out{nullptr};

 private:
  int64_t heads_;
  int64_t head_dim_;
};
TORCH_MODULE(MultiHeadAttention);

// Pre-norm feed-forward: x + W2 gelu(W1 norm(x)) is assembled by callers;
// this is just the MLP.
class FeedForwardImpl : public torch::nn::Module {
 public:
  FeedForwardImpl(int64_t dim, int64_t hidden);
  torch::Tensor forward(const torch::Tensor& x);
  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(FeedForward);

}  // namespace mgdm::nn
