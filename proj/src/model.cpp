// SPDX-License-Identifier: Apache-2.0
#include "mgdm/model.h"

#include <cstring>
#include <sstream>

#include "mgdm/error.h"

namespace mgdm::model {
namespace {

torch::Tensor bytes_to_tensor(const std::string& bytes) {
  auto t = torch::empty({static_cast<int64_t>(bytes.size())}, torch::kUInt8);
  std::memcpy(t.data_ptr(), bytes.data(), bytes.size());
  return t;
}

std::string tensor_to_bytes(const torch::Tensor& t) {
  const auto c = t.contiguous().to(torch::kUInt8);
  return std::string(static_cast<const char*>(c.data_ptr()), static_cast<std::size_t>(c.numel()));
}

int64_t read_int(torch::serialize::InputArchive& ar, const std::string& key) {
  torch::Tensor t;
  ar.read(key, t);
  return t.item<int64_t>();
}

}  // namespace

ModelConfig ModelConfig::from_config(const KeyValueConfig& cfg) {
  ModelConfig c;
  c.ae = diffusion::AutoencoderOptions::from_config(cfg);
  c.dme = meta::MetadataEncoderOptions::from_config(cfg);
  c.unet = diffusion::UNetOptions::from_config(cfg);
  c.pmp = mask::MaskPredictorOptions::from_config(cfg);
  c.prm = refine::RefinerOptions::from_config(cfg);
  c.disc = refine::DiscriminatorOptions::from_config(cfg);
  c.diffusion_steps = static_cast<int>(cfg.get_int("diffusion.T", c.diffusion_steps));
  c.sample_steps = static_cast<int>(cfg.get_int("diffusion.sample_steps", c.sample_steps));
  c.clip_x0 = cfg.get_double("diffusion.clip_x0", c.clip_x0);
  c.spacing = diffusion::parse_spacing(cfg.get_string("diffusion.spacing", "trailing"));

  if (c.dme.downsample() != c.ae.factor) {
    throw ConfigError("metadata encoder downsampling " + std::to_string(c.dme.downsample()) +
                      " differs from latent factor " + std::to_string(c.ae.factor));
  }
  if (c.sample_steps <= 0 || c.sample_steps > c.diffusion_steps) {
    throw ConfigError("diffusion.sample_steps must be in [1, diffusion.T]");
  }
  c.unet.latent_channels = c.ae.latent_channels;
  c.unet.ctx_dim = c.dme.ctx_dim;
  c.pmp.latent_channels = c.ae.latent_channels;
  c.pmp.prior_dim = c.dme.prior_dim;
  c.pmp.factor = c.ae.factor;
  c.pmp.attention_channels = 0;
  for (auto w : c.unet.widths) c.pmp.attention_channels += w;
  return c;
}

Model::Model(const KeyValueConfig& cfg, uint64_t seed)
    : source_(cfg), config_(ModelConfig::from_config(cfg)) {
  schedule_ = diffusion::NoiseSchedule::cosine(config_.diffusion_steps);
  torch::manual_seed(seed);
  ae = diffusion::FrameAutoencoder(config_.ae);
  dme = meta::MetadataEncoder(config_.dme);
  unet = diffusion::VideoUNet(config_.unet);
  pmp = mask::MaskPredictor(config_.pmp);
  prm = refine::Refiner(config_.prm);
  disc = refine::PatchDiscriminator(config_.disc);
}

std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> Model::modules() const {
  return {{"ae", ae.ptr()},   {"dme", dme.ptr()}, {"unet", unet.ptr()},
          {"pmp", pmp.ptr()}, {"prm", prm.ptr()}, {"disc", disc.ptr()}};
}

std::shared_ptr<torch::nn::Module> Model::module(const std::string& name) const {
  for (auto& [n, m] : modules()) {
    if (n == name) return m;
  }
  throw InputError("unknown module '" + name + "'");
}

void Model::train(bool on) {
  for (auto& [_, m] : modules()) m->train(on);
}

// Adam state is keyed by parameter position so the bytes do not depend on
// tensor addresses.
std::string optimizer_bytes(const torch::optim::Adam& opt) {
  torch::serialize::OutputArchive ar;
  int64_t index = 0;
  for (const auto& group : opt.param_groups()) {
    for (const auto& p : group.params()) {
      const auto key = std::to_string(index++);
      const auto it = opt.state().find(p.unsafeGetTensorImpl());
      if (it == opt.state().end()) continue;
      const auto& st = static_cast<const torch::optim::AdamParamState&>(*it->second);
      ar.write(key + ".step", torch::tensor(st.step()));
      ar.write(key + ".exp_avg", st.exp_avg());
      ar.write(key + ".exp_avg_sq", st.exp_avg_sq());
      if (st.max_exp_avg_sq().defined()) ar.write(key + ".max_exp_avg_sq", st.max_exp_avg_sq());
    }
  }
  ar.write("count", torch::tensor(index));
  std::ostringstream os;
  ar.save_to(os);
  return os.str();
}

void restore_optimizer(torch::optim::Adam& opt, const std::string& bytes) {
  torch::serialize::InputArchive ar;
  int64_t stored = -1;
  try {
    ar.load_from(bytes.data(), bytes.size());
    stored = read_int(ar, "count");
  } catch (const c10::Error&) {
    throw FormatError("optimizer state is unreadable");
  }
  int64_t count = 0;
  for (const auto& group : opt.param_groups()) count += static_cast<int64_t>(group.params().size());
  if (stored != count) throw FormatError("optimizer state does not match the parameter list");
  int64_t index = 0;
  for (auto& group : opt.param_groups()) {
    for (auto& p : group.params()) {
      const auto key = std::to_string(index++);
      torch::Tensor step;
      if (!ar.try_read(key + ".step", step)) continue;
      auto st = std::make_unique<torch::optim::AdamParamState>();
      torch::Tensor t;
      st->step(step.item<int64_t>());
      ar.read(key + ".exp_avg", t);
      st->exp_avg(t.clone());
      ar.read(key + ".exp_avg_sq", t);
      st->exp_avg_sq(t.clone());
      if (ar.try_read(key + ".max_exp_avg_sq", t)) st->max_exp_avg_sq(t.clone());
      opt.state()[p.unsafeGetTensorImpl()] = std::move(st);
    }
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (!ckpt.model) throw InputError("save_checkpoint: no model");
  torch::serialize::OutputArchive ar;
  ar.write("format_version", torch::tensor(kCheckpointVersion));
  ar.write("config", bytes_to_tensor(ckpt.model->source().source_text().empty()
                                         ? ckpt.model->source().render()
                                         : ckpt.model->source().source_text()));
  ar.write("stage", torch::tensor(static_cast<int64_t>(ckpt.stage)));
  ar.write("step", torch::tensor(ckpt.step));
  ar.write("latent_scale", torch::tensor(ckpt.model->ae->latent_scale()));
  for (const auto& [name, module] : ckpt.model->modules()) {
    torch::serialize::OutputArchive sub;
    module->save(sub);
    ar.write("module." + name, sub);
  }
  for (const auto& [name, bytes] : ckpt.optimizer_state) {
    ar.write("optim." + name, bytes_to_tensor(bytes));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  try {
    ar.save_to(path.string());
  } catch (const c10::Error&) {
    throw IoError("cannot write checkpoint " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  torch::serialize::InputArchive ar;
  try {
    ar.load_from(path.string());
  } catch (const c10::Error&) {
    throw FormatError(path.string() + ": not a checkpoint file");
  }
  Checkpoint ckpt;
  try {
    const auto version = read_int(ar, "format_version");
    if (version != kCheckpointVersion) {
      throw FormatError(path.string() + ": checkpoint version " + std::to_string(version) +
                        " is incompatible with version " + std::to_string(kCheckpointVersion));
    }
    torch::Tensor cfg_bytes;
    ar.read("config", cfg_bytes);
    ckpt.model = std::make_shared<Model>(KeyValueConfig::parse(tensor_to_bytes(cfg_bytes)));
    ckpt.stage = static_cast<int>(read_int(ar, "stage"));
    ckpt.step = read_int(ar, "step");
    for (const auto& [name, module] : ckpt.model->modules()) {
      torch::serialize::InputArchive sub;
      ar.read("module." + name, sub);
      module->load(sub);
    }
    for (const auto& key : ar.keys()) {
      if (key.rfind("optim.", 0) == 0) {
        torch::Tensor t;
        ar.read(key, t);
        ckpt.optimizer_state[key.substr(6)] = tensor_to_bytes(t);
      }
    }
  } catch (const c10::Error&) {
    throw FormatError(path.string() + ": malformed checkpoint");
  }
  return ckpt;
}

}  // namespace mgdm::model
