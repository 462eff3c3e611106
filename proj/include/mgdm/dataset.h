// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mgdm/bundle.h"
#include "mgdm/codec.h"
#include "mgdm/config.h"
#include "mgdm/synth.h"

namespace mgdm::data {

struct GenerateConfig {
  codec::CodecConfig codec;
  double drop_probability = 0.4;
  codec::DropScope scope = codec::DropScope::kAllPackets;
  codec::MaskParams mask;
  synth::SceneParams scene;

  // Keys: codec.*, corrupt.p, corrupt.scope, gt.threshold, gt.dilation,
  // frames, size, scene.max_speed, scene.objects.
  static GenerateConfig from_config(const KeyValueConfig& cfg);
};

// encode -> corrupt -> decode -> extract metadata -> ground-truth mask.
// A pure function of (clip bytes, config, corruption seed).
ClipBundle make_bundle(const codec::CleanClip& clip, const codec::CodecConfig& codec,
                       const codec::CorruptionParams& corruption, const codec::MaskParams& mask);

// Derives independent per-clip seeds from one master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

// Writes `clips` synthetic bundles as clip_%03d under `out`.
std::vector<std::filesystem::path> generate_dataset(const GenerateConfig& cfg,
                                                    const std::filesystem::path& out,
                                                    std::uint64_t seed, int clips);

}  // namespace mgdm::data
