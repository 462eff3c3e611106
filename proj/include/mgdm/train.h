// SPDX-License-Identifier: Apache-2.0
#pragma once

// Three-stage training.
//
//   1. autoencoder pretraining, latent scale, then U-Net denoising with an
//      all-zero metadata context
//   2. joint lambda1 * L_d + lambda2 * L_m over U-Net, metadata encoder and
//      mask predictor with per-module learning rates
//   3. refiner and discriminator on frozen intermediate outputs

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "mgdm/config.h"
#include "mgdm/model.h"
#include "mgdm/pipeline.h"

namespace mgdm::train {

struct TrainConfig {
  int stage = 1;
  int steps = 500;       // optimizer steps of the stage's main loop
  int ae_steps = 1500;   // stage 1 autoencoder pretraining
  int ae_frames = 8;     // frames per autoencoder batch
  double lr_ae = 1e-3;
  double lr_unet = 1e-5;
  double lr_dme = 1e-4;
  double lr_pmp = 1e-4;
  double lr_prm = 1e-5;
  double lr_disc = 1e-5;
  double lambda1 = 1.0;
  double lambda2 = 1e-3;
  double w_adv = 0.01;
  int batch = 2;
  int accum = 1;  // gradient accumulation micro-batches per step (stages 1 and 2)
  int frames = 16;
  int size = 64;
  int window = 4;  // stage 3 temporal window
  uint64_t seed = 0;
  int log_every = 50;

  // Stage defaults: steps 500 / 2000 / 1000, lr.unet 1e-5 / 1e-6. A key
  // `sN.<key>` overrides `<key>` when training stage N.
  static TrainConfig from_config(const KeyValueConfig& cfg, int stage);
  nlohmann::json to_json() const;
};

struct TrainLog {
  int stage = 0;
  std::vector<double> loss;         // per step, main loop
  std::vector<double> ae_loss;      // stage 1 pretraining
  double probe_start = std::numeric_limits<double>::quiet_NaN();
  double probe_end = std::numeric_limits<double>::quiet_NaN();
  double ae_psnr = std::numeric_limits<double>::quiet_NaN();
  double latent_scale = std::numeric_limits<double>::quiet_NaN();
  nlohmann::json digests = nlohmann::json::object();  // module -> {before, after}
  nlohmann::json to_json() const;
};

// Supervised bundles under `dir` as tensors. Throws IoError when the
// directory has no usable bundle and InputError on geometry mismatch.
std::vector<pipeline::ClipTensors> load_training_data(const std::filesystem::path& dir,
                                                      const TrainConfig& cfg);

// Runs `cfg.stage` starting from `in` (for stage 1 this may be a fresh,
// stage-0 model) and returns the updated checkpoint. Throws InputError when
// `in` has not completed the previous stage.
model::Checkpoint train_stage(const TrainConfig& cfg, const std::vector<pipeline::ClipTensors>& data,
                              model::Checkpoint in, TrainLog* log = nullptr);

// Joint stage-2 objective for one batch; exposed for tests.
struct JointLoss {
  torch::Tensor total;
  torch::Tensor denoise;
  torch::Tensor mask;
};
JointLoss joint_loss(model::Model& m, const pipeline::ClipTensors& batch, const torch::Tensor& corrupted_latent,
                     const torch::Tensor& clean_latent, const torch::Tensor& t, const torch::Tensor& eps,
                     double lambda1, double lambda2);

}  // namespace mgdm::train
