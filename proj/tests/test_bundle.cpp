// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mgdm/bundle.h"
#include "mgdm/config.h"
#include "mgdm/dataset.h"
#include "mgdm/error.h"
#include "mgdm/synth.h"

using namespace mgdm;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("mgdm_test_bundle_" + name);
  fs::remove_all(dir);
  return dir;
}

ClipBundle sample_bundle() {
  codec::CodecConfig cfg;
  cfg.gop_length = 4;
  cfg.frame_pattern = "IPBP";
  const auto clip = synth::make_scene({6, 32, 32, 2, 2}, 4);
  return data::make_bundle(clip, cfg, {0.4, 77, codec::DropScope::kAllPackets}, {});
}

std::string error_of(const fs::path& dir) {
  try {
    read_bundle(dir);
  } catch (const FormatError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("bundle round trip is lossless") {
  const auto dir = scratch_dir("roundtrip");
  auto b = sample_bundle();
  b.meta["note"] = "x";
  write_bundle(b, dir);
  CHECK(read_bundle(dir) == b);
  fs::remove_all(dir);
}

TEST_CASE("motion.bin layout is bit-exact") {
  const auto dir = scratch_dir("motion");
  fs::create_directories(dir);
  MotionField m(1, 1, 2, 4);
  for (int i = 0; i < 8; ++i) m.data()[i] = static_cast<float>(i) - 2.5f;
  write_motion(dir / "motion.bin", m);
  std::ifstream in(dir / "motion.bin", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() == 8 + 12 + 32);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "MGDM-MV1");
  CHECK(bytes[8] == 1);   // N
  CHECK(bytes[12] == 1);  // H
  CHECK(bytes[16] == 2);  // W
  // -2.5f = 0xC0200000, little-endian
  CHECK(bytes[20] == 0x00);
  CHECK(bytes[23] == 0xC0);
  CHECK(read_motion(dir / "motion.bin") == m);
  fs::remove_all(dir);
}

TEST_CASE("sidecar-only bundle reads as unsupervised") {
  const auto dir = scratch_dir("sidecar");
  auto b = sample_bundle();
  b.clean.reset();
  b.gt_mask.reset();
  b.meta = {{"provenance", "bscv-sidecar"}, {"bscv_params", "(1/16, 0.4, 4096)"}};
  write_bundle(b, dir);
  const auto r = read_bundle(dir);
  CHECK(r.unsupervised());
  CHECK_FALSE(r.gt_mask.has_value());
  CHECK(r.meta["bscv_params"] == "(1/16, 0.4, 4096)");
  CHECK(r == b);
  fs::remove_all(dir);
}

TEST_CASE("format errors name the offending file") {
  const auto dir = scratch_dir("errors");
  write_bundle(sample_bundle(), dir);

  SUBCASE("bad magic") {
    std::fstream f(dir / "motion.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
    f.close();
    const auto msg = error_of(dir);
    CHECK(msg.find("magic") != std::string::npos);
    CHECK(msg.find("motion.bin") != std::string::npos);
  }
  SUBCASE("truncated motion") {
    fs::resize_file(dir / "motion.bin", fs::file_size(dir / "motion.bin") - 7);
    CHECK(error_of(dir).find("motion.bin") != std::string::npos);
  }
  SUBCASE("missing frame") {
    fs::remove(dir / "frames_corrupt" / "00003.png");
    CHECK(error_of(dir).find("00003.png") != std::string::npos);
  }
  SUBCASE("missing frame types") {
    fs::remove(dir / "frame_types.txt");
    CHECK(error_of(dir).find("frame_types.txt") != std::string::npos);
  }
  SUBCASE("truncated png") {
    fs::resize_file(dir / "frames_clean" / "00001.png", 20);
    CHECK(error_of(dir).find("00001.png") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("dataset generation writes the documented layout") {
  const auto dir = scratch_dir("dataset");
  auto cfg = KeyValueConfig::parse("frames = 4\nsize = 32\ncodec.gop = 4\ncorrupt.p = 0.5\n");
  const auto gen = data::GenerateConfig::from_config(cfg);
  const auto dirs = data::generate_dataset(gen, dir, 5, 2);
  REQUIRE(dirs.size() == 2);
  CHECK(list_bundles(dir) == dirs);
  for (const char* f : {"frames_clean/00003.png", "frames_corrupt/00000.png", "motion.bin",
                        "frame_types.txt", "mask/00002.png", "meta.json"}) {
    CHECK(fs::exists(dirs[0] / f));
  }
  const auto b = read_bundle(dirs[1]);
  CHECK(b.meta["seed"] == 5);
  CHECK(b.frames() == 4);
  fs::remove_all(dir);
}

TEST_CASE("config parsing") {
  const auto cfg = KeyValueConfig::parse("# c\nlr.unet = 1e-6\nsteps=3\nwidths = 1, 2,3\nflag = true\n");
  CHECK(cfg.get_double("lr.unet", 0) == 1e-6);
  CHECK(cfg.get_int("steps", 0) == 3);
  CHECK(cfg.get_int_list("widths", {}) == std::vector<int>{1, 2, 3});
  CHECK(cfg.get_bool("flag", false));
  CHECK(cfg.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(cfg.get_int("lr.unet", 0), InputError);
  CHECK_THROWS_AS(KeyValueConfig::parse("novalue\n"), FormatError);
}
