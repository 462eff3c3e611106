// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small model and dataset configurations that train in seconds.

#include <filesystem>
#include <string>

#include "mgdm/config.h"
#include "mgdm/dataset.h"

namespace mgdm::testing {

inline const char* kTinyModelConfig = R"(# tiny model
ae.width = 8
latent.channels = 4
latent.factor = 4
dme.conv_width = 8
dme.embed_width = 8
dme.mlp_hidden = 16
dme.heads = 2
dme.ctx_dim = 16
dme.prior_dim = 4
dme.pool = 2
unet.widths = 8,16,16
unet.heads = 2
unet.time_dim = 16
mask.widths = 8,8,8,8
prm.width = 8
prm.blocks = 1
prm.layers = 2
prm.window = 4
prm.heads = 2
disc.widths = 4,8
diffusion.sample_steps = 4
diffusion.clip_x0 = 5
frames = 4
size = 32
batch = 2
steps = 3
steps.ae = 3
ae.frames = 2
stage3.window = 2
lr.ae = 1e-3
lr.unet = 1e-4
lr.dme = 1e-4
lr.pmp = 1e-4
lr.prm = 1e-4
lr.disc = 1e-4
log_every = 0
)";

inline KeyValueConfig tiny_config() { return KeyValueConfig::parse(kTinyModelConfig); }

inline std::filesystem::path tiny_dataset(const std::filesystem::path& dir, int clips = 2, uint64_t seed = 5) {
  auto g = data::GenerateConfig::from_config(KeyValueConfig::parse("frames = 4\nsize = 32\ncorrupt.p = 0.5\n"));
  std::filesystem::remove_all(dir);
  data::generate_dataset(g, dir, seed, clips);
  return dir;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mgdm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace mgdm::testing
