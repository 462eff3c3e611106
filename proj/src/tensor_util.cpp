// SPDX-License-Identifier: Apache-2.0
#include "mgdm/tensor_util.h"

#include <ATen/CPUGeneratorImpl.h>
#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <memory>

#include "mgdm/error.h"

namespace mgdm::nn {

torch::Tensor frames_to_tensor(const Frames& frames) {
  const auto s = frames.shape();
  auto t = torch::from_blob(const_cast<std::uint8_t*>(frames.data().data()), {s.n, s.h, s.w, s.c},
                            torch::kUInt8)
               .to(torch::kFloat32)
               .div(255.0);
  return t.permute({3, 0, 1, 2}).unsqueeze(0).contiguous();
}

Frames tensor_to_frames(const torch::Tensor& video) {
  auto v = video.dim() == 5 ? video.squeeze(0) : video;
  if (v.dim() != 4) throw InputError("tensor_to_frames: expected [3, N, H, W]");
  auto px = v.detach().to(torch::kFloat32).clamp(0.0, 1.0).mul(255.0).round().to(torch::kUInt8);
  px = px.permute({1, 2, 3, 0}).contiguous();
  Frames out(static_cast<int>(px.size(0)), static_cast<int>(px.size(1)),
             static_cast<int>(px.size(2)), static_cast<int>(px.size(3)));
  std::memcpy(out.data().data(), px.data_ptr<std::uint8_t>(), out.size());
  return out;
}

torch::Tensor motion_to_tensor(const MotionField& motion) {
  const auto s = motion.shape();
  auto t = torch::from_blob(const_cast<float*>(motion.data().data()), {s.n, s.h, s.w, s.c},
                            torch::kFloat32);
  return t.permute({3, 0, 1, 2}).unsqueeze(0).contiguous();
}

torch::Tensor mask_to_tensor(const BinaryMask& mask) {
  const auto s = mask.shape();
  auto t = torch::from_blob(const_cast<std::uint8_t*>(mask.data().data()), {s.n, s.h, s.w},
                            torch::kUInt8)
               .to(torch::kFloat32);
  return t.unsqueeze(0).unsqueeze(0).contiguous();
}

BinaryMask tensor_to_mask(const torch::Tensor& mask) {
  auto m = mask.detach().reshape({-1, mask.size(-2), mask.size(-1)}).gt(0.5).to(torch::kUInt8).contiguous();
  BinaryMask out(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)),
                 static_cast<int>(m.size(2)), 1);
  std::memcpy(out.data().data(), m.data_ptr<std::uint8_t>(), out.size());
  return out;
}

ProbMap tensor_to_probs(const torch::Tensor& probs) {
  auto p = probs.detach().to(torch::kFloat32).reshape({-1, probs.size(-2), probs.size(-1)}).contiguous();
  ProbMap out(static_cast<int>(p.size(0)), static_cast<int>(p.size(1)),
              static_cast<int>(p.size(2)), 1);
  std::memcpy(out.data().data(), p.data_ptr<float>(), out.size() * sizeof(float));
  return out;
}

torch::Tensor frame_types_to_tensor(const std::vector<codec::FrameType>& types) {
  std::vector<int64_t> ids;
  ids.reserve(types.size());
  for (auto t : types) ids.push_back(static_cast<int64_t>(t));
  return torch::tensor(ids, torch::kInt64).unsqueeze(0);
}

torch::Tensor depth_to_space(const torch::Tensor& x, int64_t f) {
  const auto b = x.size(0), cff = x.size(1), n = x.size(2), h = x.size(3), w = x.size(4);
  if (cff % (f * f) != 0) throw ConfigError("depth_to_space: channels not divisible by factor^2");
  const auto c = cff / (f * f);
  return x.reshape({b, c, f, f, n, h, w})
      .permute({0, 1, 4, 5, 2, 6, 3})
      .reshape({b, c, n, h * f, w * f});
}

torch::Tensor space_to_depth(const torch::Tensor& x, int64_t f) {
  const auto b = x.size(0), c = x.size(1), n = x.size(2), hh = x.size(3), ww = x.size(4);
  if (hh % f != 0 || ww % f != 0) throw ConfigError("space_to_depth: size not divisible by factor");
  const auto h = hh / f, w = ww / f;
  return x.reshape({b, c, n, h, f, w, f})
      .permute({0, 1, 4, 6, 2, 3, 5})
      .reshape({b, c * f * f, n, h, w});
}

torch::Tensor fold_frames(const torch::Tensor& x) {
  const auto b = x.size(0), c = x.size(1), n = x.size(2), h = x.size(3), w = x.size(4);
  return x.permute({0, 2, 1, 3, 4}).reshape({b * n, c, h, w});
}

torch::Tensor unfold_frames(const torch::Tensor& x, int64_t batch) {
  const auto bn = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  return x.reshape({batch, bn / batch, c, h, w}).permute({0, 2, 1, 3, 4});
}

int64_t norm_groups(int64_t channels) {
  for (int64_t g : {32, 16, 8, 4, 2}) {
    if (channels % g == 0 && channels / g >= 2) return g;
  }
  return 1;
}

torch::Generator make_generator(uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

namespace {

struct DigestCtx {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
  DigestCtx() { EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr); }
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx.get(), p, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::string out;
    char buf[3];
    for (unsigned i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof(buf), "%02x", md[i]);
      out += buf;
    }
    return out;
  }
};

void digest_tensor(DigestCtx& d, const std::string& name, const torch::Tensor& t) {
  d.update(name.data(), name.size());
  const auto c = t.detach().contiguous().cpu();
  for (auto s : c.sizes()) d.update(&s, sizeof(s));
  d.update(c.data_ptr(), c.numel() * c.element_size());
}

}  // namespace

std::string parameter_digest(const torch::nn::Module& module) {
  DigestCtx d;
  for (const auto& p : module.named_parameters()) digest_tensor(d, p.key(), p.value());
  for (const auto& b : module.named_buffers()) digest_tensor(d, b.key(), b.value());
  return d.hex();
}

std::string sha256_hex(const void* data, std::size_t size) {
  DigestCtx d;
  d.update(data, size);
  return d.hex();
}

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  DigestCtx d;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    d.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

}  // namespace mgdm::nn
