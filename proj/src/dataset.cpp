// SPDX-License-Identifier: Apache-2.0
#include "mgdm/dataset.h"

#include <cstdio>

#include "mgdm/error.h"
#include "mgdm/log.h"

namespace mgdm::data {

GenerateConfig GenerateConfig::from_config(const KeyValueConfig& cfg) {
  GenerateConfig g;
  g.codec = codec::CodecConfig::from_config(cfg);
  g.drop_probability = cfg.get_double("corrupt.p", g.drop_probability);
  g.scope = codec::parse_drop_scope(cfg.get_string("corrupt.scope", "all_packets"));
  g.mask.threshold = cfg.get_double("gt.threshold", g.mask.threshold);
  g.mask.dilation_radius = static_cast<int>(cfg.get_int("gt.dilation", g.mask.dilation_radius));
  g.scene.frames = static_cast<int>(cfg.get_int("frames", g.scene.frames));
  const int size = static_cast<int>(cfg.get_int("size", g.scene.height));
  g.scene.height = static_cast<int>(cfg.get_int("height", size));
  g.scene.width = static_cast<int>(cfg.get_int("width", size));
  g.scene.max_speed = static_cast<int>(cfg.get_int("scene.max_speed", g.scene.max_speed));
  g.scene.objects = static_cast<int>(cfg.get_int("scene.objects", g.scene.objects));
  if (g.drop_probability < 0.0 || g.drop_probability > 1.0) {
    throw ConfigError("corrupt.p must lie in [0, 1]");
  }
  return g;
}

ClipBundle make_bundle(const codec::CleanClip& clip, const codec::CodecConfig& codec_cfg,
                       const codec::CorruptionParams& corruption,
                       const codec::MaskParams& mask) {
  const auto encoded = codec::encode(clip, codec_cfg);
  const auto damaged = codec::corrupt(encoded, corruption);
  ClipBundle b;
  b.clip_id = clip.clip_id;
  b.clean = clip.frames;
  b.corrupted = codec::decode(damaged);
  auto meta = codec::extract_metadata(damaged);
  b.motion = std::move(meta.motion);
  b.frame_types = std::move(meta.frame_types);
  b.gt_mask = codec::ground_truth_mask(b.corrupted, clip.frames, mask.threshold,
                                       mask.dilation_radius);
  b.meta = {
      {"codec",
       {{"gop_length", codec_cfg.gop_length},
        {"frame_pattern", codec_cfg.frame_pattern},
        {"block_size", codec_cfg.block_size},
        {"search_range", codec_cfg.search_range},
        {"packet_blocks", codec_cfg.packet_blocks}}},
      {"corruption",
       {{"drop_probability", corruption.drop_probability},
        {"seed", corruption.seed},
        {"scope", std::string(codec::to_string(corruption.scope))}}},
      {"gt_mask", {{"threshold", mask.threshold}, {"dilation_radius", mask.dilation_radius}}},
      {"packets", {{"total", encoded.packets.size()}, {"surviving", damaged.packets.size()}}},
      {"provenance", "toy-codec"},
  };
  return b;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  // splitmix64 over a mixed key
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (stream * 0x10001ULL + index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::filesystem::path> generate_dataset(const GenerateConfig& cfg,
                                                    const std::filesystem::path& out,
                                                    std::uint64_t seed, int clips) {
  if (clips <= 0) throw InputError("generate: --clips must be positive");
  std::vector<std::filesystem::path> dirs;
  for (int k = 0; k < clips; ++k) {
    auto clip = synth::make_scene(cfg.scene, derive_seed(seed, 1, k));
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%03d", k);
    clip.clip_id = name;
    const codec::CorruptionParams corruption{cfg.drop_probability, derive_seed(seed, 2, k),
                                             cfg.scope};
    auto bundle = make_bundle(clip, cfg.codec, corruption, cfg.mask);
    bundle.meta["seed"] = seed;
    bundle.meta["clip_index"] = k;
    const auto dir = out / name;
    write_bundle(bundle, dir);
    MGDM_LOG_INFO("wrote %s (%zu/%zu packets kept)", dir.c_str(),
                  bundle.meta["packets"]["surviving"].get<std::size_t>(),
                  bundle.meta["packets"]["total"].get<std::size_t>());
    dirs.push_back(dir);
  }
  return dirs;
}

}  // namespace mgdm::data
