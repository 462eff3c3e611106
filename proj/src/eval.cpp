// SPDX-License-Identifier: Apache-2.0
#include "mgdm/eval.h"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "mgdm/error.h"
#include "mgdm/log.h"
#include "mgdm/metrics.h"
#include "mgdm/tensor_util.h"

namespace mgdm::eval {
namespace {

// Field table shared by JSON, CSV and averaging.
struct Field {
  const char* name;
  double ClipMetrics::*member;
};
constexpr Field kFields[] = {
    {"psnr_corrupted", &ClipMetrics::psnr_corrupted},
    {"psnr_intermediate", &ClipMetrics::psnr_intermediate},
    {"psnr_composed", &ClipMetrics::psnr_composed},
    {"psnr_recovered", &ClipMetrics::psnr_recovered},
    {"ssim_corrupted", &ClipMetrics::ssim_corrupted},
    {"ssim_intermediate", &ClipMetrics::ssim_intermediate},
    {"ssim_composed", &ClipMetrics::ssim_composed},
    {"ssim_recovered", &ClipMetrics::ssim_recovered},
    {"mask_iou", &ClipMetrics::mask_iou},
    {"mask_f1", &ClipMetrics::mask_f1},
    {"intact_fraction", &ClipMetrics::intact_fraction},
    {"intact_psnr_intermediate", &ClipMetrics::intact_psnr_intermediate},
    {"intact_psnr_composed", &ClipMetrics::intact_psnr_composed},
    {"intact_psnr_recovered", &ClipMetrics::intact_psnr_recovered},
};

bool region_equal(const Frames& a, const Frames& b, const BinaryMask& region) {
  for (std::size_t p = 0; p < region.size(); ++p) {
    if (!region.data()[p]) continue;
    for (int c = 0; c < a.channels(); ++c) {
      if (a.data()[p * a.channels() + c] != b.data()[p * a.channels() + c]) return false;
    }
  }
  return true;
}

}  // namespace

Recovered to_frames(const pipeline::Inference& r) {
  Recovered out;
  out.intermediate = nn::tensor_to_frames(r.y_tilde);
  out.composed = nn::tensor_to_frames(r.x_tilde);
  out.refined = r.y_hat.defined() ? nn::tensor_to_frames(r.y_hat) : out.composed;
  out.mask = nn::tensor_to_mask(r.binary);
  out.probs = nn::tensor_to_probs(r.probs);
  return out;
}

ClipMetrics score_clip(const ClipBundle& b, const Recovered& out) {
  if (b.unsupervised() || !b.gt_mask) throw InputError(b.clip_id + ": no clean reference to score against");
  const auto& clean = *b.clean;
  ClipMetrics m;
  m.id = b.clip_id;
  m.psnr_corrupted = metrics::psnr(b.corrupted, clean);
  m.psnr_intermediate = metrics::psnr(out.intermediate, clean);
  m.psnr_composed = metrics::psnr(out.composed, clean);
  m.psnr_recovered = metrics::psnr(out.refined, clean);
  m.ssim_corrupted = metrics::ssim(b.corrupted, clean);
  m.ssim_intermediate = metrics::ssim(out.intermediate, clean);
  m.ssim_composed = metrics::ssim(out.composed, clean);
  m.ssim_recovered = metrics::ssim(out.refined, clean);
  const auto scores = metrics::mask_scores(out.mask, *b.gt_mask);
  m.mask_iou = scores.iou;
  m.mask_f1 = scores.f1;

  BinaryMask intact(b.gt_mask->shape());
  std::size_t count = 0;
  for (std::size_t i = 0; i < intact.size(); ++i) {
    intact.data()[i] = !b.gt_mask->data()[i] && !out.mask.data()[i];
    count += intact.data()[i];
  }
  m.intact_fraction = static_cast<double>(count) / static_cast<double>(intact.size());
  m.intact_psnr_intermediate = metrics::psnr_region(out.intermediate, b.corrupted, intact);
  m.intact_psnr_composed = metrics::psnr_region(out.composed, b.corrupted, intact);
  m.intact_psnr_recovered = metrics::psnr_region(out.refined, b.corrupted, intact);
  m.intact_exact_composed = region_equal(out.composed, b.corrupted, intact);
  m.intact_exact_recovered = region_equal(out.refined, b.corrupted, intact);
  return m;
}

nlohmann::json to_json(const ClipMetrics& m) {
  nlohmann::json j;
  j["record"] = "clip";
  j["id"] = m.id;
  j["supervised"] = m.supervised;
  if (!m.supervised) {
    j["skipped"] = true;
    return j;
  }
  for (const auto& f : kFields) j[f.name] = m.*f.member;
  j["intact_exact_composed"] = m.intact_exact_composed;
  j["intact_exact_recovered"] = m.intact_exact_recovered;
  return j;
}

ClipMetrics clip_from_json(const nlohmann::json& j) {
  try {
    ClipMetrics m;
    m.id = j.at("id").get<std::string>();
    m.supervised = j.at("supervised").get<bool>();
    if (!m.supervised) return m;
    for (const auto& f : kFields) m.*f.member = j.at(f.name).get<double>();
    m.intact_exact_composed = j.at("intact_exact_composed").get<bool>();
    m.intact_exact_recovered = j.at("intact_exact_recovered").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report record: ") + e.what());
  }
}

std::optional<ClipMetrics> Report::aggregate() const {
  ClipMetrics mean;
  mean.id = "aggregate";
  mean.intact_exact_composed = true;
  mean.intact_exact_recovered = true;
  int n = 0;
  for (const auto& c : clips) {
    if (!c.supervised) continue;
    ++n;
    for (const auto& f : kFields) mean.*f.member += c.*f.member;
    mean.intact_exact_composed = mean.intact_exact_composed && c.intact_exact_composed;
    mean.intact_exact_recovered = mean.intact_exact_recovered && c.intact_exact_recovered;
  }
  if (n == 0) return std::nullopt;
  for (const auto& f : kFields) mean.*f.member /= n;
  return mean;
}

std::string Report::to_jsonl() const {
  std::string out;
  int supervised = 0;
  for (const auto& c : clips) {
    out += to_json(c).dump() + "\n";
    supervised += c.supervised;
  }
  // Keys are emitted in sorted order by nlohmann::json, which keeps the bytes stable.
  nlohmann::json agg;
  agg["record"] = "aggregate";
  agg["clips"] = supervised;
  agg["skipped"] = static_cast<int>(clips.size()) - supervised;
  agg["config_sha256"] = config_sha256;
  agg["checkpoint_sha256"] = checkpoint_sha256;
  agg["seed"] = seed;
  agg["sample_steps"] = sample_steps;
  const auto mean = aggregate();
  for (const auto& f : kFields) agg[f.name] = mean ? nlohmann::json((*mean).*f.member) : nlohmann::json(nullptr);
  agg["intact_exact_composed"] = mean ? nlohmann::json(mean->intact_exact_composed) : nlohmann::json(nullptr);
  agg["intact_exact_recovered"] = mean ? nlohmann::json(mean->intact_exact_recovered) : nlohmann::json(nullptr);
  out += agg.dump() + "\n";
  return out;
}

Report Report::from_jsonl(const std::string& text) {
  Report r;
  std::istringstream in(text);
  std::string line;
  bool have_aggregate = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("report line is not JSON: ") + e.what());
    }
    const auto kind = j.value("record", "");
    if (kind == "clip") {
      r.clips.push_back(clip_from_json(j));
    } else if (kind == "aggregate") {
      try {
        r.config_sha256 = j.at("config_sha256").get<std::string>();
        r.checkpoint_sha256 = j.at("checkpoint_sha256").get<std::string>();
        r.seed = j.at("seed").get<uint64_t>();
        r.sample_steps = j.at("sample_steps").get<int>();
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report aggregate: ") + e.what());
      }
      have_aggregate = true;
    } else {
      throw FormatError("report line has unknown record type '" + kind + "'");
    }
  }
  if (!have_aggregate) throw FormatError("report has no aggregate record");
  return r;
}

std::string Report::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "id,supervised";
  for (const auto& f : kFields) os << ',' << f.name;
  os << ",intact_exact_composed,intact_exact_recovered\n";
  auto row = [&](const ClipMetrics& c) {
    os << c.id << ',' << (c.supervised ? 1 : 0);
    for (const auto& f : kFields) {
      os << ',';
      if (c.supervised) os << c.*f.member;
    }
    os << ',';
    if (c.supervised) os << (c.intact_exact_composed ? 1 : 0);
    os << ',';
    if (c.supervised) os << (c.intact_exact_recovered ? 1 : 0);
    os << '\n';
  };
  for (const auto& c : clips) row(c);
  if (const auto mean = aggregate()) row(*mean);
  return os.str();
}

Report evaluate(model::Model& m, const std::filesystem::path& dataset, uint64_t seed,
                const ClipCallback& on_clip) {
  if (!std::filesystem::is_directory(dataset)) throw IoError("dataset directory not found: " + dataset.string());
  const auto paths = list_bundles(dataset);
  if (paths.empty()) throw IoError("no clip bundles under " + dataset.string());
  Report report;
  report.seed = seed;
  report.sample_steps = m.config().sample_steps;
  const auto& text = m.source().source_text().empty() ? m.source().render() : m.source().source_text();
  report.config_sha256 = nn::sha256_hex(text.data(), text.size());
  m.train(false);
  const auto opts = pipeline::InferenceOptions::from_model(m, seed);
  for (const auto& path : paths) {
    const auto bundle = read_bundle(path);
    const auto out = to_frames(pipeline::infer(m, pipeline::ClipTensors::from_bundle(bundle), opts));
    if (on_clip) on_clip(bundle, out);
    if (bundle.unsupervised() || !bundle.gt_mask) {
      MGDM_LOG_WARN("%s: no clean reference, metrics skipped", bundle.clip_id.c_str());
      ClipMetrics skipped;
      skipped.id = bundle.clip_id;
      skipped.supervised = false;
      report.clips.push_back(skipped);
      continue;
    }
    report.clips.push_back(score_clip(bundle, out));
    const auto& c = report.clips.back();
    MGDM_LOG_INFO("%s: PSNR %.2f -> %.2f dB, mask IoU %.3f", c.id.c_str(), c.psnr_corrupted, c.psnr_recovered,
                  c.mask_iou);
  }
  return report;
}

void write_report(const Report& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto csv = path;
  if (csv.extension() == ".csv") {
    csv += ".csv";
  } else {
    csv.replace_extension(".csv");
  }
  for (const auto& [file, body] : {std::pair{path, report.to_jsonl()}, std::pair{csv, report.to_csv()}}) {
    std::ofstream out(file, std::ios::binary);
    out << body;
    if (!out) throw IoError("cannot write " + file.string());
  }
}

}  // namespace mgdm::eval
