// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "mgdm/volume.h"

namespace mgdm::metrics {

// Reported for identical inputs instead of +inf.
inline constexpr double kPsnrCap = 100.0;

// 10 log10(max^2 / MSE), capped at kPsnrCap. Throws InputError on size mismatch
// or empty input.
double psnr(std::span<const double> a, std::span<const double> b, double max_value);
// 8-bit clips, MSE over every sample of the clip.
double psnr(const Frames& a, const Frames& b);
// MSE restricted to pixels where `region` is 1 (all channels). Returns the cap
// for an empty region.
double psnr_region(const Frames& a, const Frames& b, const BinaryMask& region);

// Mean SSIM over valid 11x11 windows with a Gaussian of sigma 1.5 and the
// usual stabilizers (0.01 L)^2, (0.03 L)^2. Images are row-major [h, w].
// Throws InputError when the image is smaller than the window.
double ssim_gray(std::span<const double> a, std::span<const double> b, int height, int width,
                 double max_value);
// Channel-mean grayscale SSIM, averaged over frames.
double ssim(const Frames& a, const Frames& b);

struct MaskScores {
  double iou = 0.0;
  double f1 = 0.0;
};
// Both scores are 1 when both masks are empty. Throws InputError on shape
// mismatch or values outside {0, 1}.
MaskScores mask_scores(const BinaryMask& pred, const BinaryMask& gt);

}  // namespace mgdm::metrics
