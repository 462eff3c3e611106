// SPDX-License-Identifier: Apache-2.0
#include "mgdm/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace mgdm::metrics {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

double psnr_from_mse(double mse, double max_value) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_value * max_value / mse));
}

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += g[i];
  }
  for (auto& v : g) v /= sum;
  return g;
}

// Valid-mode separable filter: [h, w] -> [h - 10, w - 10].
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w) {
  static const auto g = gaussian_taps();
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

std::vector<double> gray_frame(const Frames& f, int n) {
  const auto px = f.frame(n);
  std::vector<double> g(static_cast<std::size_t>(f.height()) * f.width());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double s = 0.0;
    for (int c = 0; c < f.channels(); ++c) s += px[i * f.channels() + c];
    g[i] = s / f.channels();
  }
  return g;
}

void check_binary(const BinaryMask& m, const char* what) {
  for (auto v : m.data()) {
    if (v > 1) throw InputError(std::string(what) + ": mask values must be 0 or 1");
  }
}

}  // namespace

double psnr(std::span<const double> a, std::span<const double> b, double max_value) {
  if (a.size() != b.size()) throw InputError("psnr: size mismatch");
  if (a.empty()) throw InputError("psnr: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return psnr_from_mse(acc / static_cast<double>(a.size()), max_value);
}

double psnr(const Frames& a, const Frames& b) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (a.empty()) throw InputError("psnr: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    acc += d * d;
  }
  return psnr_from_mse(acc / static_cast<double>(a.size()), 255.0);
}

double psnr_region(const Frames& a, const Frames& b, const BinaryMask& region) {
  require_same_shape(a.shape(), b.shape(), "psnr_region");
  require_same_shape({a.frames(), a.height(), a.width(), 1}, region.shape(), "psnr_region");
  check_binary(region, "psnr_region");
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < region.size(); ++p) {
    if (!region.data()[p]) continue;
    for (int c = 0; c < a.channels(); ++c) {
      const double d = static_cast<double>(a.data()[p * a.channels() + c]) - b.data()[p * a.channels() + c];
      acc += d * d;
      ++count;
    }
  }
  return count == 0 ? kPsnrCap : psnr_from_mse(acc / static_cast<double>(count), 255.0);
}

double ssim_gray(std::span<const double> a, std::span<const double> b, int height, int width,
                 double max_value) {
  if (height < kWindow || width < kWindow) throw InputError("ssim: image smaller than the 11x11 window");
  const auto n = static_cast<std::size_t>(height) * width;
  if (a.size() != n || b.size() != n) throw InputError("ssim: size mismatch");
  const double c1 = (0.01 * max_value) * (0.01 * max_value);
  const double c2 = (0.03 * max_value) * (0.03 * max_value);
  std::vector<double> va(a.begin(), a.end()), vb(b.begin(), b.end()), aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = va[i] * va[i];
    bb[i] = vb[i] * vb[i];
    ab[i] = va[i] * vb[i];
  }
  const auto mu_a = filter_valid(va, height, width), mu_b = filter_valid(vb, height, width);
  const auto e_aa = filter_valid(aa, height, width), e_bb = filter_valid(bb, height, width);
  const auto e_ab = filter_valid(ab, height, width);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double sa = e_aa[i] - ma * ma, sb = e_bb[i] - mb * mb, sab = e_ab[i] - ma * mb;
    sum += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

double ssim(const Frames& a, const Frames& b) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  if (a.frames() == 0) throw InputError("ssim: empty input");
  double sum = 0.0;
  for (int n = 0; n < a.frames(); ++n) {
    sum += ssim_gray(gray_frame(a, n), gray_frame(b, n), a.height(), a.width(), 255.0);
  }
  return sum / a.frames();
}

MaskScores mask_scores(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred.shape(), gt.shape(), "mask_scores");
  check_binary(pred, "mask_scores");
  check_binary(gt, "mask_scores");
  std::size_t inter = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i], g = gt.data()[i];
    inter += p && g;
    np += p;
    ng += g;
  }
  const std::size_t uni = np + ng - inter;
  if (uni == 0) return {1.0, 1.0};
  return {static_cast<double>(inter) / static_cast<double>(uni),
          2.0 * static_cast<double>(inter) / static_cast<double>(np + ng)};
}

}  // namespace mgdm::metrics
