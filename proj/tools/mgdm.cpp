// SPDX-License-Identifier: Apache-2.0
// Command-line front end: generate-data, train, recover, predict-mask, evaluate.

#include <CLI11.hpp>
#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include "mgdm/bundle.h"
#include "mgdm/dataset.h"
#include "mgdm/error.h"
#include "mgdm/eval.h"
#include "mgdm/log.h"
#include "mgdm/model.h"
#include "mgdm/pipeline.h"
#include "mgdm/tensor_util.h"
#include "mgdm/train.h"

namespace fs = std::filesystem;
using namespace mgdm;

namespace {

struct Globals {
  uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  std::string log_level = "info";
};

Volume<std::uint8_t> scaled_mask(const BinaryMask& m) {
  Volume<std::uint8_t> out(m.shape());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = m.data()[i] ? 255 : 0;
  return out;
}

Volume<std::uint8_t> scaled_probs(const ProbMap& p) {
  Volume<std::uint8_t> out(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.data()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(p.data()[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::shared_ptr<model::Model> load_model(const fs::path& ckpt) {
  auto c = model::load_checkpoint(ckpt);
  c.model->train(false);
  return c.model;
}

eval::Recovered run_clip(model::Model& m, const fs::path& clip_dir, uint64_t seed) {
  const auto bundle = read_bundle(clip_dir);
  const auto opts = pipeline::InferenceOptions::from_model(m, seed);
  return eval::to_frames(pipeline::infer(m, pipeline::ClipTensors::from_bundle(bundle), opts));
}

int cmd_generate(const Globals& g, const std::string& config, const fs::path& out, int clips) {
  const auto cfg = config.empty() ? KeyValueConfig{} : KeyValueConfig::load(config);
  if (clips <= 0) throw InputError("--clips must be positive");
  const auto gen = data::GenerateConfig::from_config(cfg);
  data::generate_dataset(gen, out, g.seed, clips);
  return 0;
}

int cmd_train(const Globals& g, int stage, const std::string& config, const fs::path& data_dir,
              const std::string& ckpt_in, const fs::path& ckpt_out) {
  auto cfg = KeyValueConfig::load(config);
  if (g.seed_given) cfg.set("seed", std::to_string(g.seed));
  const auto tc = train::TrainConfig::from_config(cfg, stage);
  model::Checkpoint in;
  if (ckpt_in.empty()) {
    if (stage != 1) throw InputError("--ckpt-in is required for stage " + std::to_string(stage));
    in.model = std::make_shared<model::Model>(KeyValueConfig::load(config), tc.seed);
  } else {
    in = model::load_checkpoint(ckpt_in);
  }
  const auto data = train::load_training_data(data_dir, tc);
  train::TrainLog log;
  const auto out = train::train_stage(tc, data, std::move(in), &log);
  if (ckpt_out.has_parent_path()) fs::create_directories(ckpt_out.parent_path());
  model::save_checkpoint(out, ckpt_out);
  const nlohmann::json record = {{"config", tc.to_json()}, {"log", log.to_json()}};
  write_text(ckpt_out.string() + ".log.json", record.dump(2) + "\n");
  MGDM_LOG_INFO("wrote %s", ckpt_out.string().c_str());
  return 0;
}

int cmd_recover(const Globals& g, const fs::path& ckpt, const fs::path& clip, const fs::path& out) {
  auto m = load_model(ckpt);
  const auto r = run_clip(*m, clip, g.seed);
  write_frames(r.refined, out / "recovered");
  write_frames(r.intermediate, out / "intermediate");
  write_frames(r.composed, out / "composed");
  return 0;
}

int cmd_predict_mask(const Globals& g, const fs::path& ckpt, const fs::path& clip, const fs::path& out) {
  auto m = load_model(ckpt);
  const auto r = run_clip(*m, clip, g.seed);
  write_frames(scaled_probs(r.probs), out / "mask_pred");
  write_frames(scaled_mask(r.mask), out / "mask_bin");
  return 0;
}

int cmd_evaluate(const Globals& g, const fs::path& ckpt, const fs::path& data_dir, const fs::path& report_path,
                 const std::string& save_dir) {
  const auto start = std::chrono::steady_clock::now();
  auto m = load_model(ckpt);
  eval::ClipCallback save;
  if (!save_dir.empty()) {
    save = [&](const ClipBundle& b, const eval::Recovered& r) {
      const auto dir = fs::path(save_dir) / b.clip_id;
      write_frames(r.refined, dir / "recovered");
      write_frames(r.intermediate, dir / "intermediate");
      write_frames(r.composed, dir / "composed");
      write_frames(scaled_probs(r.probs), dir / "mask_pred");
      write_frames(scaled_mask(r.mask), dir / "mask_bin");
    };
  }
  auto report = eval::evaluate(*m, data_dir, g.seed, save);
  report.checkpoint_sha256 = nn::file_sha256(ckpt.string());
  eval::write_report(report, report_path);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const nlohmann::json timing = {{"wall_seconds", seconds}, {"clips", report.clips.size()}};
  write_text(report_path.string() + ".timing.json", timing.dump(2) + "\n");
  if (const auto agg = report.aggregate()) {
    std::cout << "clips " << report.clips.size() << "  PSNR corrupted " << agg->psnr_corrupted
              << " dB  recovered " << agg->psnr_recovered << " dB  SSIM " << agg->ssim_recovered
              << "  mask IoU " << agg->mask_iou << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Metadata-guided diffusion for corrupted video recovery"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "CPU threads for tensor ops")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "debug, info, warn, error or off")->capture_default_str();

  std::string config, ckpt_in, save_dir;
  fs::path out, data_dir, ckpt, ckpt_out, clip, report;
  int clips = 2, stage = 1;

  auto* gen = app.add_subcommand("generate-data", "Synthesize corrupted clip bundles");
  gen->add_option("--config", config, "Dataset config file");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--clips", clips, "Number of clips")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Run one training stage");
  tr->add_option("--stage", stage, "1, 2 or 3")->required()->check(CLI::Range(1, 3));
  tr->add_option("--config", config, "Model and training config")->required()->check(CLI::ExistingFile);
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--ckpt-in", ckpt_in, "Checkpoint from the previous stage");
  tr->add_option("--ckpt-out", ckpt_out, "Checkpoint to write")->required();

  auto* rec = app.add_subcommand("recover", "Recover one clip");
  rec->add_option("--checkpoint", ckpt, "Trained checkpoint")->required();
  rec->add_option("--clip", clip, "Clip bundle directory")->required();
  rec->add_option("--out", out, "Output directory")->required();

  auto* pm = app.add_subcommand("predict-mask", "Predict the corruption mask of one clip");
  pm->add_option("--checkpoint", ckpt, "Trained checkpoint")->required();
  pm->add_option("--clip", clip, "Clip bundle directory")->required();
  pm->add_option("--out", out, "Output directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Recover and score every clip of a dataset");
  ev->add_option("--checkpoint", ckpt, "Trained checkpoint")->required();
  ev->add_option("--data", data_dir, "Dataset directory")->required();
  ev->add_option("--report", report, "Report path (JSON lines; a .csv mirror is written alongside)")->required();
  ev->add_option("--save", save_dir, "Also write per-clip outputs under this directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kInput);
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    log::set_level(log::parse_level(g.log_level));
    torch::set_num_threads(g.threads);
    if (*gen) return cmd_generate(g, config, out, clips);
    if (*tr) return cmd_train(g, stage, config, data_dir, ckpt_in, ckpt_out);
    if (*rec) return cmd_recover(g, ckpt, clip, out);
    if (*pm) return cmd_predict_mask(g, ckpt, clip, out);
    if (*ev) return cmd_evaluate(g, ckpt, data_dir, report, save_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kFailure);
  }
  return static_cast<int>(ExitCode::kFailure);
}
