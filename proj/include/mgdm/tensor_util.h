// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "mgdm/codec.h"
#include "mgdm/volume.h"

namespace mgdm::nn {

// Video tensors are laid out [B, C, N, H, W]; pixel values are normalized to [0, 1].
torch::Tensor frames_to_tensor(const Frames& frames);
// Accepts [1, 3, N, H, W] or [3, N, H, W]; clamps to [0, 1] and rounds to 8 bit.
Frames tensor_to_frames(const torch::Tensor& video);
torch::Tensor motion_to_tensor(const MotionField& motion);  // [1, 4, N, H, W]
torch::Tensor mask_to_tensor(const BinaryMask& mask);       // [1, 1, N, H, W], {0, 1}
BinaryMask tensor_to_mask(const torch::Tensor& mask);       // expects {0, 1} values
ProbMap tensor_to_probs(const torch::Tensor& probs);
torch::Tensor frame_types_to_tensor(const std::vector<codec::FrameType>& types);  // [1, N] int64

// [B, C*f*f, N, h, w] -> [B, C, N, h*f, w*f]
torch::Tensor depth_to_space(const torch::Tensor& x, int64_t factor);
// [B, C, N, H, W] -> [B, C*f*f, N, H/f, W/f]
torch::Tensor space_to_depth(const torch::Tensor& x, int64_t factor);

// Flattens frames into the batch axis for per-frame 2D ops and back.
torch::Tensor fold_frames(const torch::Tensor& x);  // [B, C, N, H, W] -> [B*N, C, H, W]
torch::Tensor unfold_frames(const torch::Tensor& x, int64_t batch);  // inverse

// GroupNorm group count for a channel width.
int64_t norm_groups(int64_t channels);

// Deterministic CPU generator.
torch::Generator make_generator(uint64_t seed);

// Hex SHA-256 over all parameters and buffers (names, shapes, raw bytes).
std::string parameter_digest(const torch::nn::Module& module);
std::string sha256_hex(const void* data, std::size_t size);
std::string file_sha256(const std::string& path);

}  // namespace mgdm::nn
