// SPDX-License-Identifier: Apache-2.0
#pragma once

// The full recovery model (autoencoder, metadata encoder, video U-Net, mask
// predictor, refiner, discriminator) and its checkpoint file.

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mgdm/autoencoder.h"
#include "mgdm/config.h"
#include "mgdm/mask_predictor.h"
#include "mgdm/metadata_encoder.h"
#include "mgdm/refinement.h"
#include "mgdm/schedule.h"
#include "mgdm/unet.h"

namespace mgdm::model {

struct ModelConfig {
  diffusion::AutoencoderOptions ae;
  meta::MetadataEncoderOptions dme;
  diffusion::UNetOptions unet;
  mask::MaskPredictorOptions pmp;
  refine::RefinerOptions prm;
  refine::DiscriminatorOptions disc;
  int diffusion_steps = 1000;  // diffusion.T
  int sample_steps = 20;       // diffusion.sample_steps
  double clip_x0 = 0.0;        // diffusion.clip_x0, 0 disables
  diffusion::Spacing spacing = diffusion::Spacing::kTrailing;  // diffusion.spacing

  // Derives the cross-module widths (context, prior, latent channels and
  // factor) so the modules agree. Throws ConfigError when the metadata
  // encoder's downsampling differs from the latent factor.
  static ModelConfig from_config(const KeyValueConfig& cfg);
};

class Model {
 public:
  // Parameters are drawn from a generator seeded with `seed`.
  explicit Model(const KeyValueConfig& cfg, uint64_t seed = 0);

  const KeyValueConfig& source() const { return source_; }
  const ModelConfig& config() const { return config_; }
  const diffusion::NoiseSchedule& schedule() const { return schedule_; }

  // Named top-level modules in a fixed order: ae, dme, unet, pmp, prm, disc.
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> modules() const;
  std::shared_ptr<torch::nn::Module> module(const std::string& name) const;
  void train(bool on);

  diffusion::FrameAutoencoder ae{nullptr};
  meta::MetadataEncoder dme{nullptr};
  diffusion::VideoUNet unet{nullptr};
  mask::MaskPredictor pmp{nullptr};
  refine::Refiner prm{nullptr};
  refine::PatchDiscriminator disc{nullptr};

 private:
  KeyValueConfig source_;
  ModelConfig config_;
  diffusion::NoiseSchedule schedule_;
};

inline constexpr int64_t kCheckpointVersion = 1;

struct Checkpoint {
  std::shared_ptr<Model> model;
  int stage = 0;       // last completed training stage, 0 for untrained
  int64_t step = 0;    // optimizer steps taken in that stage
  std::map<std::string, std::string> optimizer_state;  // serialized per optimizer
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws IoError when the file is missing, FormatError when it is unreadable
// or written by an incompatible version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Serializes Adam moments and step counts to bytes and back. Throws
// FormatError when the bytes do not fit the optimizer's parameter list.
std::string optimizer_bytes(const torch::optim::Adam& opt);
void restore_optimizer(torch::optim::Adam& opt, const std::string& bytes);

}  // namespace mgdm::model
