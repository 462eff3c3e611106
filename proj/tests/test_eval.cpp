// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "torch_doctest.h"

#include <cmath>
#include <fstream>
#include <iterator>

#include "mgdm/error.h"
#include "mgdm/eval.h"
#include "mgdm/log.h"
#include "mgdm/mask_predictor.h"
#include "mgdm/metrics.h"
#include "tiny_model.h"

using namespace mgdm;
using mgdm::testing::scratch_dir;
using mgdm::testing::tiny_config;

namespace {

struct Quiet {
  Quiet() {
    torch::set_num_threads(1);
    log::set_level(log::Level::kWarn);
  }
} quiet;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

eval::ClipMetrics sample_metrics(const std::string& id, double base) {
  eval::ClipMetrics m;
  m.id = id;
  m.psnr_corrupted = base;
  m.psnr_intermediate = base + 0.1;
  m.psnr_composed = base + 1.0 / 3.0;
  m.psnr_recovered = base + 2.5;
  m.ssim_corrupted = 0.5;
  m.ssim_intermediate = 0.6;
  m.ssim_composed = 0.7;
  m.ssim_recovered = 0.8 + base * 1e-3;
  m.mask_iou = 0.75;
  m.mask_f1 = 6.0 / 7.0;
  m.intact_fraction = 0.9;
  m.intact_psnr_intermediate = 30;
  m.intact_psnr_composed = 100;
  m.intact_psnr_recovered = 45.123456789012345;
  m.intact_exact_composed = true;
  m.intact_exact_recovered = base > 20;
  return m;
}

}  // namespace

TEST_CASE("mask loss at probability one half is ln 2") {
  const auto p = torch::full({1, 1, 2, 4, 4}, 0.5, torch::kFloat64);
  const auto t = torch::randint(0, 2, {1, 1, 2, 4, 4}, torch::kFloat64);
  CHECK(std::abs(mask::loss_mask(p, t).item<double>() - std::log(2.0)) < 1e-12);
}

TEST_CASE("report aggregates are means over supervised clips") {
  eval::Report r;
  r.clips = {sample_metrics("a", 20), sample_metrics("b", 24)};
  eval::ClipMetrics skipped;
  skipped.id = "c";
  skipped.supervised = false;
  r.clips.push_back(skipped);
  const auto agg = r.aggregate();
  REQUIRE(agg.has_value());
  CHECK(agg->psnr_corrupted == doctest::Approx(22.0));
  CHECK(agg->psnr_recovered == doctest::Approx(24.5));
  CHECK(agg->mask_iou == doctest::Approx(0.75));
  CHECK(agg->intact_exact_composed);
  CHECK_FALSE(agg->intact_exact_recovered);
  eval::Report only_skipped;
  only_skipped.clips = {skipped};
  CHECK_FALSE(only_skipped.aggregate().has_value());
}

TEST_CASE("report serialization round-trips losslessly") {
  eval::Report r;
  r.clips = {sample_metrics("clip_000", 21.123456789), sample_metrics("clip_001", 1.0 / 7.0)};
  eval::ClipMetrics skipped;
  skipped.id = "real_000";
  skipped.supervised = false;
  r.clips.push_back(skipped);
  r.config_sha256 = std::string(64, 'a');
  r.checkpoint_sha256 = std::string(64, 'b');
  r.seed = 123456789012345ULL;
  r.sample_steps = 20;
  const auto text = r.to_jsonl();
  const auto back = eval::Report::from_jsonl(text);
  CHECK(back == r);
  CHECK(back.to_jsonl() == text);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK(text.find("\"skipped\":true") != std::string::npos);
  const auto csv = r.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header, 3 clips, aggregate
  CHECK(csv.find("\naggregate,1,") != std::string::npos);
}

TEST_CASE("malformed reports are format errors") {
  CHECK_THROWS_AS(eval::Report::from_jsonl("not json\n"), FormatError);
  CHECK_THROWS_AS(eval::Report::from_jsonl("{\"record\":\"clip\",\"id\":\"x\",\"supervised\":true}\n"), FormatError);
  CHECK_THROWS_AS(eval::Report::from_jsonl(""), FormatError);
  CHECK_THROWS_AS(eval::Report::from_jsonl("{\"record\":\"other\"}\n"), FormatError);
}

TEST_CASE("write_report writes the JSON lines file and a CSV mirror") {
  const auto dir = scratch_dir("report_write");
  eval::Report r;
  r.clips = {sample_metrics("a", 20)};
  eval::write_report(r, dir / "sub" / "report.jsonl");
  CHECK(slurp(dir / "sub" / "report.jsonl") == r.to_jsonl());
  CHECK(slurp(dir / "sub" / "report.csv") == r.to_csv());
}

TEST_CASE("evaluating an empty dataset fails without writing a report") {
  model::Model m(tiny_config(), 0);
  const auto dir = scratch_dir("eval_empty");
  CHECK_THROWS_AS(eval::evaluate(m, dir, 0), IoError);
  CHECK_THROWS_AS(eval::evaluate(m, dir / "missing", 0), IoError);
}

TEST_CASE("fresh model with an empty mask reproduces the corrupted clip exactly") {
  const auto dir = testing::tiny_dataset(scratch_dir("eval_identity") / "data", 1, 21);
  model::Model m(tiny_config(), 0);
  int calls = 0;
  const auto report = eval::evaluate(m, dir, 0, [&](const ClipBundle& b, const eval::Recovered& out) {
    ++calls;
    CHECK(out.refined == b.corrupted);
    CHECK(out.composed == b.corrupted);
  });
  CHECK(calls == 1);
  REQUIRE(report.clips.size() == 1);
  const auto& c = report.clips[0];
  CHECK(std::abs(c.psnr_recovered - c.psnr_corrupted) <= 1e-6);
  CHECK(c.intact_exact_composed);
  CHECK(c.intact_exact_recovered);
  CHECK(c.intact_psnr_composed == metrics::kPsnrCap);
}

TEST_CASE("unsupervised clips are flagged and skipped") {
  const auto root = scratch_dir("eval_unsup");
  const auto dir = testing::tiny_dataset(root / "data", 1, 22);
  auto b = read_bundle(list_bundles(dir).front());
  b.clip_id = "zz_real";
  b.clean.reset();
  b.gt_mask.reset();
  write_bundle(b, dir / "zz_real");
  model::Model m(tiny_config(), 0);
  const auto report = eval::evaluate(m, dir, 0);
  REQUIRE(report.clips.size() == 2);
  CHECK(report.clips[0].supervised);
  CHECK_FALSE(report.clips[1].supervised);
  CHECK(report.clips[1].id == "zz_real");
  CHECK(report.to_jsonl().find("\"skipped\":1") != std::string::npos);
  eval::Recovered dummy;
  CHECK_THROWS_AS(eval::score_clip(b, dummy), InputError);
}

TEST_CASE("evaluation is deterministic") {
  const auto dir = testing::tiny_dataset(scratch_dir("eval_det") / "data", 2, 23);
  model::Model a(tiny_config(), 5), b(tiny_config(), 5);
  CHECK(eval::evaluate(a, dir, 9).to_jsonl() == eval::evaluate(b, dir, 9).to_jsonl());
}
