// SPDX-License-Identifier: Apache-2.0
#pragma once

// On-disk clip bundle. One directory per clip:
//
//   frames_clean/%05d.png    8-bit RGB (absent for sidecar-only bundles)
//   frames_corrupt/%05d.png  8-bit RGB
//   motion.bin               "MGDM-MV1", u32 N, H, W (LE), N*H*W*4 float32 (LE, row-major)
//   frame_types.txt          one of I/P/B per line
//   mask/%05d.png            8-bit, 0 or 255 (absent when there is no clean reference)
//   meta.json                generation config, seeds, provenance

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgdm/codec.h"
#include "mgdm/volume.h"

namespace mgdm {

struct ClipBundle {
  std::string clip_id;
  std::optional<Frames> clean;
  Frames corrupted;
  MotionField motion;
  std::vector<codec::FrameType> frame_types;
  std::optional<BinaryMask> gt_mask;
  nlohmann::json meta = nlohmann::json::object();

  // Real extracted metadata without a clean reference.
  bool unsupervised() const { return !clean.has_value(); }
  int frames() const { return corrupted.frames(); }
  int height() const { return corrupted.height(); }
  int width() const { return corrupted.width(); }

  bool operator==(const ClipBundle&) const = default;
};

inline constexpr char kMotionMagic[8] = {'M', 'G', 'D', 'M', '-', 'M', 'V', '1'};

// Writes every frame of an 8-bit volume (1 or 3 channels) as dir/%05d.png.
void write_frames(const Volume<std::uint8_t>& frames, const std::filesystem::path& dir);

void write_motion(const std::filesystem::path& file, const MotionField& motion);
MotionField read_motion(const std::filesystem::path& file);

void write_bundle(const ClipBundle& bundle, const std::filesystem::path& dir);
// Throws FormatError naming the offending file on missing/truncated inputs or
// bad magic.
ClipBundle read_bundle(const std::filesystem::path& dir);

// Clip directories under `root` (those holding a frame_types.txt), sorted by name.
std::vector<std::filesystem::path> list_bundles(const std::filesystem::path& root);

}  // namespace mgdm
