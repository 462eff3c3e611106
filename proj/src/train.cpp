// SPDX-License-Identifier: Apache-2.0
#include "mgdm/train.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "mgdm/bundle.h"
#include "mgdm/dataset.h"
#include "mgdm/diffusion.h"
#include "mgdm/error.h"
#include "mgdm/log.h"
#include "mgdm/tensor_util.h"

namespace mgdm::train {
namespace {

using pipeline::ClipTensors;

std::string key_for(const KeyValueConfig& cfg, int stage, const std::string& key) {
  const auto scoped = "s" + std::to_string(stage) + "." + key;
  return cfg.contains(scoped) ? scoped : key;
}

ClipTensors concat(const std::vector<ClipTensors>& items) {
  auto cat = [&](auto member) {
    std::vector<torch::Tensor> parts;
    for (const auto& c : items) parts.push_back(c.*member);
    if (!parts.front().defined()) return torch::Tensor();
    return torch::cat(parts, 0);
  };
  ClipTensors out;
  out.id = "batch";
  out.clean = cat(&ClipTensors::clean);
  out.corrupted = cat(&ClipTensors::corrupted);
  out.motion = cat(&ClipTensors::motion);
  out.types = cat(&ClipTensors::types);
  out.mask = cat(&ClipTensors::mask);
  return out;
}

// Draws clip indices in shuffled epochs and temporal windows of fixed length.
class BatchSampler {
 public:
  BatchSampler(std::size_t clips, uint64_t seed) : clips_(clips), rng_(seed) {}

  std::vector<std::size_t> next(int count) {
    std::vector<std::size_t> out;
    while (static_cast<int>(out.size()) < count) {
      if (pos_ == order_.size()) {
        order_.resize(clips_);
        for (std::size_t i = 0; i < clips_; ++i) order_[i] = i;
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

  int64_t start(int64_t frames, int64_t window) {
    if (frames <= window) return 0;
    std::uniform_int_distribution<int64_t> d(0, frames - window);
    return d(rng_);
  }

 private:
  std::size_t clips_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

struct Latents {
  torch::Tensor clean;
  torch::Tensor corrupted;
};

std::vector<Latents> encode_all(model::Model& m, const std::vector<ClipTensors>& data) {
  torch::NoGradGuard guard;
  std::vector<Latents> out;
  for (const auto& c : data) out.push_back({m.ae->encode(c.clean), m.ae->encode(c.corrupted)});
  return out;
}

std::string digest(const model::Model& m, const std::string& name) {
  return nn::parameter_digest(*m.module(name));
}

torch::optim::Adam make_adam(const std::vector<torch::Tensor>& params, double lr) {
  return torch::optim::Adam(params, torch::optim::AdamOptions(lr).betas({0.9, 0.999}));
}

void log_step(const char* what, int step, int total, double loss, int every) {
  if (every > 0 && (step % every == 0 || step + 1 == total)) {
    MGDM_LOG_INFO("%s step %d/%d loss %.6f", what, step + 1, total, loss);
  }
}

torch::Tensor uniform_timesteps(int64_t batch, int steps, torch::Generator& gen) {
  return torch::randint(1, steps + 1, {batch}, gen, torch::kInt64);
}

struct ProbeBatch {
  ClipTensors clip;
  torch::Tensor clean_latent;
  torch::Tensor corrupted_latent;
  torch::Tensor t;
  torch::Tensor eps;
};

// Every clip at eight fixed noise levels with fixed noise.
ProbeBatch make_probe(const std::vector<ClipTensors>& data, const std::vector<Latents>& lat,
                      int frames, int steps, uint64_t seed) {
  std::vector<ClipTensors> clips;
  std::vector<torch::Tensor> cl, co, ts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int k = 0; k < 8; ++k) {
      clips.push_back(data[i].window(0, frames));
      cl.push_back(lat[i].clean.narrow(2, 0, frames));
      co.push_back(lat[i].corrupted.narrow(2, 0, frames));
      ts.push_back(torch::tensor({static_cast<int64_t>(1 + k * steps / 8)}, torch::kInt64));
    }
  }
  ProbeBatch p;
  p.clip = concat(clips);
  p.clean_latent = torch::cat(cl, 0);
  p.corrupted_latent = torch::cat(co, 0);
  p.t = torch::cat(ts, 0);
  auto gen = nn::make_generator(seed);
  p.eps = torch::randn(p.clean_latent.sizes(), gen, p.clean_latent.options());
  return p;
}

double stage1_probe(model::Model& m, const ProbeBatch& p) {
  torch::NoGradGuard guard;
  const auto x_t = diffusion::add_noise(m.schedule(), p.clean_latent, p.t, p.eps);
  const auto& lc = p.corrupted_latent;
  const auto ctx = meta::zero_tokens(lc.size(0), lc.size(2), lc.size(3), lc.size(4),
                                     m.config().dme.ctx_dim, lc.options());
  const auto out = m.unet->forward(x_t, p.t, lc, ctx);
  return diffusion::loss_denoise(p.eps, out.eps).item<double>();
}

void pretrain_autoencoder(model::Model& m, const TrainConfig& cfg, const std::vector<ClipTensors>& data,
                          torch::Generator& gen, TrainLog& log) {
  auto opt = make_adam(m.ae->parameters(), cfg.lr_ae);
  const int64_t n = data.front().corrupted.size(2);
  const int64_t k = std::min<int64_t>(cfg.ae_frames, n);
  for (int step = 0; step < cfg.ae_steps; ++step) {
    const auto pick = torch::randint(0, static_cast<int64_t>(2 * data.size()), {1}, gen).item<int64_t>();
    const auto& clip = data[pick / 2];
    const auto& src = pick % 2 == 0 ? clip.clean : clip.corrupted;
    const auto idx = torch::randperm(n, gen).narrow(0, 0, k);
    const auto frames = src.index_select(2, idx);
    const auto rec = m.ae->decode(m.ae->encode(frames));
    const auto loss = torch::mse_loss(rec, frames) + torch::l1_loss(rec, frames);
    opt.zero_grad();
    loss.backward();
    opt.step();
    log.ae_loss.push_back(loss.item<double>());
    log_step("autoencoder", step, cfg.ae_steps, log.ae_loss.back(), cfg.log_every);
  }
  torch::NoGradGuard guard;
  double mse = 0.0;
  std::vector<torch::Tensor> latents;
  m.ae->set_latent_scale(1.0);
  for (const auto& c : data) {
    const auto z = m.ae->encode(c.clean);
    latents.push_back(z.flatten());
    mse += torch::mse_loss(m.ae->decode(z).clamp(0.0, 1.0), c.clean).item<double>();
  }
  mse /= static_cast<double>(data.size());
  log.ae_psnr = mse > 0 ? 10.0 * std::log10(1.0 / mse) : 100.0;
  const double scale = torch::cat(latents).std().item<double>();
  m.ae->set_latent_scale(scale > 0 ? scale : 1.0);
  log.latent_scale = m.ae->latent_scale();
  MGDM_LOG_INFO("autoencoder PSNR %.2f dB, latent scale %.4f", log.ae_psnr, log.latent_scale);
}

void run_stage1(model::Model& m, const TrainConfig& cfg, const std::vector<ClipTensors>& data,
                model::Checkpoint& ckpt, bool resume, TrainLog& log) {
  auto gen = nn::make_generator(data::derive_seed(cfg.seed, 7, 1));
  if (cfg.ae_steps > 0) pretrain_autoencoder(m, cfg, data, gen, log);
  for (auto& p : m.ae->parameters()) p.requires_grad_(false);
  const auto lat = encode_all(m, data);
  const auto probe = make_probe(data, lat, cfg.frames, m.schedule().steps, cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  log.probe_start = stage1_probe(m, probe);

  auto opt = make_adam(m.unet->parameters(), cfg.lr_unet);
  if (resume && ckpt.optimizer_state.count("unet")) model::restore_optimizer(opt, ckpt.optimizer_state["unet"]);
  BatchSampler sampler(data.size(), cfg.seed);
  for (int step = 0; step < cfg.steps; ++step) {
    opt.zero_grad();
    double total = 0.0;
    for (int micro = 0; micro < cfg.accum; ++micro) {
      std::vector<torch::Tensor> cl, co;
      for (auto i : sampler.next(cfg.batch)) {
        const auto s = sampler.start(data[i].corrupted.size(2), cfg.frames);
        cl.push_back(lat[i].clean.narrow(2, s, cfg.frames));
        co.push_back(lat[i].corrupted.narrow(2, s, cfg.frames));
      }
      const auto x0 = torch::cat(cl, 0), lc = torch::cat(co, 0);
      const auto t = uniform_timesteps(x0.size(0), m.schedule().steps, gen);
      const auto eps = torch::randn(x0.sizes(), gen, x0.options());
      const auto x_t = diffusion::add_noise(m.schedule(), x0, t, eps);
      const auto ctx = meta::zero_tokens(lc.size(0), lc.size(2), lc.size(3), lc.size(4),
                                         m.config().dme.ctx_dim, lc.options());
      const auto loss = diffusion::loss_denoise(eps, m.unet->forward(x_t, t, lc, ctx).eps) / cfg.accum;
      loss.backward();
      total += loss.item<double>();
    }
    opt.step();
    log.loss.push_back(total);
    log_step("stage 1", step, cfg.steps, total, cfg.log_every);
  }
  log.probe_end = stage1_probe(m, probe);
  MGDM_LOG_INFO("stage 1 probe loss %.6f -> %.6f", log.probe_start, log.probe_end);
  for (auto& p : m.ae->parameters()) p.requires_grad_(true);
  ckpt.optimizer_state = {{"unet", model::optimizer_bytes(opt)}};
  ckpt.step = cfg.steps;
}

void run_stage2(model::Model& m, const TrainConfig& cfg, const std::vector<ClipTensors>& data,
                model::Checkpoint& ckpt, bool resume, TrainLog& log) {
  auto gen = nn::make_generator(data::derive_seed(cfg.seed, 7, 2));
  const auto lat = encode_all(m, data);
  auto opt_unet = make_adam(m.unet->parameters(), cfg.lr_unet);
  auto opt_dme = make_adam(m.dme->parameters(), cfg.lr_dme);
  auto opt_pmp = make_adam(m.pmp->parameters(), cfg.lr_pmp);
  if (resume) {
    if (ckpt.optimizer_state.count("unet")) model::restore_optimizer(opt_unet, ckpt.optimizer_state["unet"]);
    if (ckpt.optimizer_state.count("dme")) model::restore_optimizer(opt_dme, ckpt.optimizer_state["dme"]);
    if (ckpt.optimizer_state.count("pmp")) model::restore_optimizer(opt_pmp, ckpt.optimizer_state["pmp"]);
  }
  BatchSampler sampler(data.size(), cfg.seed + 2);
  for (int step = 0; step < cfg.steps; ++step) {
    opt_unet.zero_grad();
    opt_dme.zero_grad();
    opt_pmp.zero_grad();
    double total = 0.0, denoise = 0.0, mask = 0.0;
    for (int micro = 0; micro < cfg.accum; ++micro) {
      std::vector<ClipTensors> items;
      std::vector<torch::Tensor> cl, co;
      for (auto i : sampler.next(cfg.batch)) {
        const auto s = sampler.start(data[i].corrupted.size(2), cfg.frames);
        items.push_back(data[i].window(s, cfg.frames));
        cl.push_back(lat[i].clean.narrow(2, s, cfg.frames));
        co.push_back(lat[i].corrupted.narrow(2, s, cfg.frames));
      }
      const auto batch = concat(items);
      const auto x0 = torch::cat(cl, 0), lc = torch::cat(co, 0);
      const auto t = uniform_timesteps(x0.size(0), m.schedule().steps, gen);
      const auto eps = torch::randn(x0.sizes(), gen, x0.options());
      const auto l = joint_loss(m, batch, lc, x0, t, eps, cfg.lambda1, cfg.lambda2);
      (l.total / cfg.accum).backward();
      total += l.total.item<double>() / cfg.accum;
      denoise += l.denoise.item<double>() / cfg.accum;
      mask += l.mask.item<double>() / cfg.accum;
    }
    opt_unet.step();
    opt_dme.step();
    opt_pmp.step();
    log.loss.push_back(total);
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      MGDM_LOG_INFO("stage 2 step %d/%d loss %.6f (denoise %.6f, mask %.6f)", step + 1, cfg.steps, total, denoise,
                    mask);
    }
  }
  ckpt.optimizer_state = {{"unet", model::optimizer_bytes(opt_unet)},
                          {"dme", model::optimizer_bytes(opt_dme)},
                          {"pmp", model::optimizer_bytes(opt_pmp)}};
  ckpt.step = cfg.steps;
}

void run_stage3(model::Model& m, const TrainConfig& cfg, const std::vector<ClipTensors>& data,
                model::Checkpoint& ckpt, bool resume, TrainLog& log) {
  // Intermediate frames and masks come from the frozen stages; compute them once.
  auto opts = pipeline::InferenceOptions::from_model(m, cfg.seed);
  opts.refine = false;
  std::vector<pipeline::Inference> cache;
  for (const auto& c : data) {
    cache.push_back(pipeline::infer(m, c, opts));
    MGDM_LOG_INFO("stage 3 cached clip %s", c.id.c_str());
  }
  const auto mask_of = [&](const pipeline::Inference& r) {
    return m.config().prm.soft ? r.probs : r.binary;
  };

  std::vector<torch::Tensor> frozen;
  for (const auto& name : {"ae", "dme", "unet", "pmp"}) {
    for (auto& p : m.module(name)->parameters()) {
      if (p.requires_grad()) {
        p.requires_grad_(false);
        frozen.push_back(p);
      }
    }
  }
  auto opt_g = make_adam(m.prm->parameters(), cfg.lr_prm);
  auto opt_d = make_adam(m.disc->parameters(), cfg.lr_disc);
  if (resume) {
    if (ckpt.optimizer_state.count("prm")) model::restore_optimizer(opt_g, ckpt.optimizer_state["prm"]);
    if (ckpt.optimizer_state.count("disc")) model::restore_optimizer(opt_d, ckpt.optimizer_state["disc"]);
  }
  BatchSampler sampler(data.size(), cfg.seed + 3);
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<torch::Tensor> xt, mk, ys;
    for (auto i : sampler.next(cfg.batch)) {
      const auto s = sampler.start(data[i].corrupted.size(2), cfg.window);
      const auto w = std::min<int64_t>(cfg.window, data[i].corrupted.size(2));
      xt.push_back(cache[i].x_tilde.narrow(2, s, w));
      mk.push_back(mask_of(cache[i]).narrow(2, s, w));
      ys.push_back(data[i].clean.narrow(2, s, w));
    }
    const auto x_tilde = torch::cat(xt, 0), mask = torch::cat(mk, 0), y = torch::cat(ys, 0);
    const auto y_hat = m.prm->forward(x_tilde, mask);

    const auto d_loss = refine::discriminator_loss(m.disc, y, y_hat);
    opt_d.zero_grad();
    d_loss.backward();
    opt_d.step();

    const auto g_loss = refine::generator_loss(m.disc, y_hat);
    const auto loss = refine::loss_stage3(y_hat, y, g_loss, cfg.w_adv);
    opt_g.zero_grad();
    loss.backward();
    opt_g.step();
    log.loss.push_back(loss.item<double>());
    if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      MGDM_LOG_INFO("stage 3 step %d/%d loss %.6f (d %.4f)", step + 1, cfg.steps, log.loss.back(),
                    d_loss.item<double>());
    }
  }
  for (auto& p : frozen) p.requires_grad_(true);
  ckpt.optimizer_state = {{"prm", model::optimizer_bytes(opt_g)}, {"disc", model::optimizer_bytes(opt_d)}};
  ckpt.step = cfg.steps;
}

}  // namespace

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg, int stage) {
  if (stage < 1 || stage > 3) throw InputError("stage must be 1, 2 or 3");
  TrainConfig c;
  c.stage = stage;
  c.steps = stage == 1 ? 500 : (stage == 2 ? 2000 : 1000);
  c.lr_unet = stage == 1 ? 1e-5 : 1e-6;
  auto i = [&](const char* key, int fallback) {
    return static_cast<int>(cfg.get_int(key_for(cfg, stage, key), fallback));
  };
  auto d = [&](const char* key, double fallback) { return cfg.get_double(key_for(cfg, stage, key), fallback); };
  c.steps = i("steps", c.steps);
  c.ae_steps = i("steps.ae", c.ae_steps);
  c.ae_frames = i("ae.frames", c.ae_frames);
  c.lr_ae = d("lr.ae", c.lr_ae);
  c.lr_unet = d("lr.unet", c.lr_unet);
  c.lr_dme = d("lr.dme", c.lr_dme);
  c.lr_pmp = d("lr.pmp", c.lr_pmp);
  c.lr_prm = d("lr.prm", c.lr_prm);
  c.lr_disc = d("lr.disc", c.lr_disc);
  c.lambda1 = d("lambda1", c.lambda1);
  c.lambda2 = d("lambda2", c.lambda2);
  c.w_adv = d("w_adv", c.w_adv);
  c.batch = i("batch", c.batch);
  c.accum = i("accum", c.accum);
  c.frames = i("frames", c.frames);
  c.size = i("size", c.size);
  c.window = i("stage3.window", c.window);
  c.seed = static_cast<uint64_t>(cfg.get_int(key_for(cfg, stage, "seed"), 0));
  c.log_every = i("log_every", c.log_every);
  if (c.steps < 0 || c.ae_steps < 0) throw ConfigError("step counts must be non-negative");
  if (c.batch <= 0 || c.accum <= 0 || c.frames <= 0 || c.size <= 0 || c.window <= 0) {
    throw ConfigError("batch, accum, frames, size and stage3.window must be positive");
  }
  for (double lr : {c.lr_ae, c.lr_unet, c.lr_dme, c.lr_pmp, c.lr_prm, c.lr_disc}) {
    if (lr < 0) throw ConfigError("learning rates must be non-negative");
  }
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"stage", stage},     {"steps", steps},     {"steps.ae", ae_steps}, {"ae.frames", ae_frames},
          {"lr.ae", lr_ae},     {"lr.unet", lr_unet}, {"lr.dme", lr_dme},     {"lr.pmp", lr_pmp},
          {"lr.prm", lr_prm},   {"lr.disc", lr_disc}, {"lambda1", lambda1},   {"lambda2", lambda2},
          {"w_adv", w_adv},     {"batch", batch}, {"accum", accum},     {"frames", frames},     {"size", size},
          {"stage3.window", window}, {"seed", seed}};
}

nlohmann::json TrainLog::to_json() const {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"stage", stage},
          {"loss", loss},
          {"ae_loss", ae_loss},
          {"probe_start", num(probe_start)},
          {"probe_end", num(probe_end)},
          {"ae_psnr", num(ae_psnr)},
          {"latent_scale", num(latent_scale)},
          {"digests", digests}};
}

std::vector<ClipTensors> load_training_data(const std::filesystem::path& dir, const TrainConfig& cfg) {
  if (!std::filesystem::is_directory(dir)) throw IoError("training data directory not found: " + dir.string());
  std::vector<ClipTensors> out;
  for (const auto& path : list_bundles(dir)) {
    const auto b = read_bundle(path);
    if (b.unsupervised() || !b.gt_mask) {
      MGDM_LOG_WARN("skipping %s: no clean reference", b.clip_id.c_str());
      continue;
    }
    if (b.height() != cfg.size || b.width() != cfg.size || b.frames() < cfg.frames) {
      throw InputError(path.string() + ": clip geometry " + std::to_string(b.frames()) + "x" +
                       std::to_string(b.height()) + "x" + std::to_string(b.width()) +
                       " does not fit frames=" + std::to_string(cfg.frames) +
                       " size=" + std::to_string(cfg.size));
    }
    out.push_back(ClipTensors::from_bundle(b));
  }
  if (out.empty()) throw IoError("no supervised clip bundles under " + dir.string());
  return out;
}

JointLoss joint_loss(model::Model& m, const ClipTensors& batch, const torch::Tensor& corrupted_latent,
                     const torch::Tensor& clean_latent, const torch::Tensor& t, const torch::Tensor& eps,
                     double lambda1, double lambda2) {
  const auto rep = m.dme->forward(batch.motion, batch.types);
  const auto x_t = diffusion::add_noise(m.schedule(), clean_latent, t, eps);
  const auto r = diffusion::denoise_step(m.unet, x_t, t, {corrupted_latent, rep});
  const auto probs = m.pmp->forward(corrupted_latent, rep.prior, r.prior).probs;
  JointLoss l;
  l.denoise = diffusion::loss_denoise(eps, r.eps);
  l.mask = mask::loss_mask(probs, batch.mask);
  l.total = lambda1 * l.denoise + lambda2 * l.mask;
  return l;
}

model::Checkpoint train_stage(const TrainConfig& cfg, const std::vector<ClipTensors>& data,
                              model::Checkpoint ckpt, TrainLog* log_out) {
  if (!ckpt.model) throw InputError("train: no model");
  if (data.empty()) throw IoError("train: no training data");
  if (ckpt.stage < cfg.stage - 1) {
    throw InputError("stage " + std::to_string(cfg.stage) + " needs a checkpoint that completed stage " +
                     std::to_string(cfg.stage - 1) + " (got stage " + std::to_string(ckpt.stage) + ")");
  }
  const bool resume = ckpt.stage == cfg.stage;
  auto& m = *ckpt.model;
  m.train(true);
  TrainLog log;
  log.stage = cfg.stage;
  std::map<std::string, std::string> before;
  for (const auto& [name, _] : m.modules()) before[name] = digest(m, name);

  MGDM_LOG_INFO("training stage %d for %d steps on %zu clips", cfg.stage, cfg.steps, data.size());
  switch (cfg.stage) {
    case 1: run_stage1(m, cfg, data, ckpt, resume, log); break;
    case 2: run_stage2(m, cfg, data, ckpt, resume, log); break;
    case 3: run_stage3(m, cfg, data, ckpt, resume, log); break;
    default: throw InputError("stage must be 1, 2 or 3");
  }

  for (const auto& [name, _] : m.modules()) {
    log.digests[name] = {{"before", before[name]}, {"after", digest(m, name)}};
  }
  auto changed = [&](const std::string& name) { return before[name] != digest(m, name); };
  if (cfg.stage == 2 && cfg.steps > 0) {
    const std::vector<std::pair<std::string, double>> trained = {
        {"unet", cfg.lr_unet * cfg.lambda1}, {"dme", cfg.lr_dme}, {"pmp", cfg.lr_pmp * cfg.lambda2}};
    for (const auto& [name, rate] : trained) {
      if (rate > 0 && !changed(name)) throw Error("stage 2: module " + name + " received no update");
    }
  }
  if (cfg.stage == 3) {
    for (const auto& name : {"ae", "dme", "unet", "pmp"}) {
      if (changed(name)) throw Error(std::string("stage 3: frozen module ") + name + " changed");
    }
  }
  ckpt.stage = cfg.stage;
  m.train(false);
  if (log_out) *log_out = std::move(log);
  return ckpt;
}

}  // namespace mgdm::train
