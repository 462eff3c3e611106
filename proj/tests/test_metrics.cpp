// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "metric_oracles.h"
#include "mgdm/error.h"
#include "mgdm/metrics.h"

using namespace mgdm;

namespace {

Frames constant(int n, int h, int w, std::uint8_t v) { return Frames(n, h, w, 3, v); }

}  // namespace

TEST_CASE("psnr of identical clips is the cap") {
  const auto a = constant(2, 16, 16, 77);
  CHECK(metrics::psnr(a, a) == metrics::kPsnrCap);
}

TEST_CASE("psnr of a uniform 16-level offset is 20 log10(255/16)") {
  const auto a = constant(3, 8, 8, 100), b = constant(3, 8, 8, 116);
  CHECK(std::abs(metrics::psnr(a, b) - 20.0 * std::log10(255.0 / 16.0)) < 1e-12);
  CHECK(std::abs(metrics::psnr(a, b) - 24.0484) < 1e-4);
}

TEST_CASE("psnr matches the brute-force reference on random pairs") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 100; ++i) {
    const auto [a, b] = testing::random_pair(rng, 2, 24, 20);
    CHECK(std::abs(metrics::psnr(a, b) - testing::psnr_reference(a, b)) <= 1e-6);
  }
}

TEST_CASE("psnr is symmetric and decreases with noise amplitude") {
  std::mt19937_64 rng(1);
  const auto [a, b] = testing::random_pair(rng, 1, 16, 16);
  CHECK(metrics::psnr(a, b) == metrics::psnr(b, a));
  const auto base = constant(1, 16, 16, 128);
  double last = metrics::kPsnrCap + 1;
  for (int amp = 1; amp <= 64; amp *= 2) {
    auto noisy = base;
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy.data()[i] = static_cast<std::uint8_t>(128 + (i % 2 ? amp : -amp));
    const double p = metrics::psnr(base, noisy);
    CHECK(p < last);
    last = p;
  }
}

TEST_CASE("psnr on normalized values uses the declared peak") {
  const std::vector<double> a{0.0, 0.5, 1.0}, b{0.1, 0.4, 0.9};
  CHECK(std::abs(metrics::psnr(a, b, 1.0) - 20.0) < 1e-9);
  CHECK_THROWS_AS(metrics::psnr(a, std::vector<double>{0.0}, 1.0), InputError);
}

TEST_CASE("psnr rejects shape mismatch") {
  CHECK_THROWS_AS(metrics::psnr(constant(1, 8, 8, 0), constant(1, 8, 9, 0)), InputError);
  CHECK_THROWS_AS(metrics::ssim(constant(1, 16, 16, 0), constant(2, 16, 16, 0)), InputError);
}

TEST_CASE("region psnr only looks at the region") {
  auto a = constant(1, 4, 4, 10), b = constant(1, 4, 4, 10);
  BinaryMask region(1, 4, 4, 1, 0);
  b.at(0, 0, 0, 0) = 200;
  CHECK(metrics::psnr_region(a, b, region) == metrics::kPsnrCap);
  region.at(0, 1, 1) = 1;
  CHECK(metrics::psnr_region(a, b, region) == metrics::kPsnrCap);
  region.at(0, 0, 0) = 1;
  // one channel differs by 190 among 2 pixels x 3 channels
  CHECK(std::abs(metrics::psnr_region(a, b, region) - 10 * std::log10(255.0 * 255.0 / (190.0 * 190.0 / 6))) < 1e-9);
}

TEST_CASE("ssim of identical images is exactly one") {
  std::mt19937_64 rng(3);
  const auto [a, b] = testing::random_pair(rng, 2, 20, 20);
  CHECK(metrics::ssim(a, a) == 1.0);
  CHECK(metrics::ssim(b, b) == 1.0);
}

TEST_CASE("ssim of two constants equals the luminance term") {
  for (auto [ca, cb] : {std::pair{30, 220}, std::pair{0, 255}, std::pair{100, 110}}) {
    const auto a = constant(1, 16, 16, static_cast<std::uint8_t>(ca));
    const auto b = constant(1, 16, 16, static_cast<std::uint8_t>(cb));
    const double c1 = std::pow(0.01 * 255, 2);
    const double expected = (2.0 * ca * cb + c1) / (double(ca) * ca + double(cb) * cb + c1);
    CHECK(std::abs(metrics::ssim(a, b) - expected) < 1e-9);
  }
}

TEST_CASE("ssim matches the naive sliding-window reference on random pairs") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto [a, b] = testing::random_pair(rng, 1, 12 + i % 9, 11 + i % 13);
    const double s = metrics::ssim(a, b);
    CHECK(std::abs(s - testing::ssim_reference(a, b)) <= 1e-4);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("ssim is symmetric") {
  std::mt19937_64 rng(8);
  const auto [a, b] = testing::random_pair(rng, 2, 16, 16);
  CHECK(metrics::ssim(a, b) == metrics::ssim(b, a));
}

TEST_CASE("ssim rejects images smaller than the window") {
  CHECK_THROWS_AS(metrics::ssim(constant(1, 10, 16, 0), constant(1, 10, 16, 0)), InputError);
  CHECK_THROWS_AS(metrics::ssim(constant(1, 16, 10, 0), constant(1, 16, 10, 0)), InputError);
}

TEST_CASE("mask scores: identical, disjoint, half, empty") {
  BinaryMask gt(1, 4, 4, 1, 0), pred(1, 4, 4, 1, 0);
  auto s = metrics::mask_scores(pred, gt);
  CHECK(s.iou == 1.0);
  CHECK(s.f1 == 1.0);
  gt.at(0, 0, 0) = gt.at(0, 0, 1) = gt.at(0, 1, 0) = gt.at(0, 1, 1) = 1;
  s = metrics::mask_scores(gt, gt);
  CHECK(s.iou == 1.0);
  CHECK(s.f1 == 1.0);
  pred.at(0, 3, 3) = 1;
  s = metrics::mask_scores(pred, gt);
  CHECK(s.iou == 0.0);
  CHECK(s.f1 == 0.0);
  pred = BinaryMask(1, 4, 4, 1, 0);
  pred.at(0, 0, 0) = pred.at(0, 0, 1) = 1;
  s = metrics::mask_scores(pred, gt);
  CHECK(s.iou == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("mask scores reject non-binary input and shape mismatch") {
  BinaryMask a(1, 2, 2, 1, 0), b(1, 2, 2, 1, 0);
  b.at(0, 0, 0) = 255;
  CHECK_THROWS_AS(metrics::mask_scores(a, b), InputError);
  CHECK_THROWS_AS(metrics::mask_scores(b, a), InputError);
  CHECK_THROWS_AS(metrics::mask_scores(a, BinaryMask(1, 2, 3, 1, 0)), InputError);
}
