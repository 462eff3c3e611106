// SPDX-License-Identifier: Apache-2.0
#pragma once

// Per-clip recovery metrics and the evaluation report.
//
// Report file: one JSON object per line, one per clip, then one aggregate
// record. A CSV mirror with the same per-clip values is written next to it.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgdm/bundle.h"
#include "mgdm/model.h"
#include "mgdm/pipeline.h"
#include "mgdm/volume.h"

namespace mgdm::eval {

// 8-bit outputs of one recovery run.
struct Recovered {
  Frames intermediate;  // decoded diffusion output
  Frames composed;      // hard or soft composition with the corrupted input
  Frames refined;       // final output
  BinaryMask mask;      // thresholded predicted mask
  ProbMap probs;
};
Recovered to_frames(const pipeline::Inference& r);

struct ClipMetrics {
  std::string id;
  bool supervised = true;
  double psnr_corrupted = 0, psnr_intermediate = 0, psnr_composed = 0, psnr_recovered = 0;
  double ssim_corrupted = 0, ssim_intermediate = 0, ssim_composed = 0, ssim_recovered = 0;
  double mask_iou = 0, mask_f1 = 0;
  // Region where both the reference and predicted masks are 0.
  double intact_fraction = 0;
  double intact_psnr_intermediate = 0;  // against the corrupted input
  double intact_psnr_composed = 0;
  double intact_psnr_recovered = 0;
  bool intact_exact_composed = false;  // composed == corrupted on the region
  bool intact_exact_recovered = false;

  bool operator==(const ClipMetrics&) const = default;
};

// Throws InputError when the bundle has no clean reference.
ClipMetrics score_clip(const ClipBundle& bundle, const Recovered& out);

struct Report {
  std::vector<ClipMetrics> clips;  // unsupervised clips carry only `id`
  std::string config_sha256;
  std::string checkpoint_sha256;
  uint64_t seed = 0;
  int sample_steps = 0;

  // Arithmetic means over supervised clips; nullopt when there are none.
  std::optional<ClipMetrics> aggregate() const;
  std::string to_jsonl() const;
  static Report from_jsonl(const std::string& text);
  std::string to_csv() const;
  bool operator==(const Report&) const = default;
};

nlohmann::json to_json(const ClipMetrics& m);
ClipMetrics clip_from_json(const nlohmann::json& j);

// Runs recovery on every bundle under `dataset`. Throws IoError when there
// are no bundles. `on_clip` is called with each clip's outputs, if given.
using ClipCallback = std::function<void(const ClipBundle&, const Recovered&)>;
Report evaluate(model::Model& m, const std::filesystem::path& dataset, uint64_t seed,
                const ClipCallback& on_clip = {});

// Writes `path` and `path` with a .csv extension.
void write_report(const Report& report, const std::filesystem::path& path);

}  // namespace mgdm::eval
