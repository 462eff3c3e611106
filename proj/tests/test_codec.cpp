// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <set>

#include "mgdm/codec.h"
#include "mgdm/dataset.h"
#include "mgdm/error.h"
#include "mgdm/synth.h"

using namespace mgdm;
using namespace mgdm::codec;

namespace {

CodecConfig ip_config(int gop, int block = 8, int range = 4, int packet = 16) {
  CodecConfig c;
  c.gop_length = gop;
  c.frame_pattern = "I" + std::string(gop - 1, 'P');
  c.block_size = block;
  c.search_range = range;
  c.packet_blocks = packet;
  return c;
}

// Independent brute-force block matcher used as the oracle for motion search:
// returns the set of in-bounds displacements attaining the minimum SAD.
std::set<std::pair<int, int>> best_displacements(const Frames& cur, int f, const Frames& ref,
                                                 int rf, int bx0, int by0, int bs, int range) {
  long best = -1;
  std::set<std::pair<int, int>> out;
  for (int dy = -range; dy <= range; ++dy)
    for (int dx = -range; dx <= range; ++dx) {
      const int sx = bx0 - dx, sy = by0 - dy;
      if (sx < 0 || sy < 0 || sx + bs > cur.width() || sy + bs > cur.height()) continue;
      long sad = 0;
      for (int y = 0; y < bs; ++y)
        for (int x = 0; x < bs; ++x)
          for (int c = 0; c < 3; ++c)
            sad += std::abs(int(cur.at(f, by0 + y, bx0 + x, c)) - int(ref.at(rf, sy + y, sx + x, c)));
      if (best < 0 || sad < best) {
        best = sad;
        out.clear();
      }
      if (sad == best) out.insert({dx, dy});
    }
  return out;
}

int count_packets_of(const EncodedClip& e, FrameType t) {
  int n = 0;
  for (const auto& p : e.packets) n += e.frame_types[p.frame_index] == t;
  return n;
}

long mask_sum(const BinaryMask& m, int frame) {
  long s = 0;
  for (auto v : m.frame(frame)) s += v;
  return s;
}

}  // namespace

TEST_CASE("static gray scene yields zero motion and zero residuals") {
  const auto clip = synth::make_static_gray(4, 32, 32, 100);
  const auto enc = encode(clip, ip_config(4));
  CHECK(frame_types_to_string(enc.frame_types) == "IPPP");
  for (const auto& p : enc.packets) {
    if (p.kind != PayloadKind::kInter) continue;
    for (const auto& bm : p.motion) {
      CHECK(bm.fwd == MotionVector{0, 0});
      CHECK_FALSE(bm.has_bwd);
    }
    for (auto b : p.residual) CHECK(b == 0);
  }
}

TEST_CASE("single-frame clip is one intra frame") {
  const auto clip = synth::make_global_shift(1, 32, 32, 0, 0, 3);
  const auto enc = encode(clip, ip_config(4));
  REQUIRE(enc.frame_types.size() == 1);
  CHECK(enc.frame_types[0] == FrameType::kI);
  for (const auto& p : enc.packets) {
    CHECK(p.frame_index == 0);
    CHECK(p.kind == PayloadKind::kIntra);
  }
}

TEST_CASE("global shift recovered by exhaustive block matching") {
  const int bs = 8, range = 4;
  const auto clip = synth::make_global_shift(4, 64, 64, 2, 0, 11);
  const auto enc = encode(clip, ip_config(4, bs, range));
  const auto mvs = block_motion(enc);
  for (int f = 1; f < 4; ++f) {
    for (int b = 0; b < enc.blocks_per_frame(); ++b) {
      const int bx0 = (b % enc.blocks_x()) * bs, by0 = (b / enc.blocks_x()) * bs;
      const auto oracle = best_displacements(clip.frames, f, clip.frames, f - 1, bx0, by0, bs, range);
      const auto mv = mvs[f][b].fwd;
      CHECK(oracle.count({mv.dx, mv.dy}) == 1);
      const bool interior = bx0 >= range && by0 >= range && bx0 + bs + range <= 64 &&
                            by0 + bs + range <= 64;
      if (interior) {
        CHECK(oracle == std::set<std::pair<int, int>>{{2, 0}});
        CHECK(mv == MotionVector{2, 0});
      }
    }
  }
}

TEST_CASE("encode rejects bad geometry and empty clips") {
  const auto clip = synth::make_static_gray(2, 30, 32, 10);
  CHECK_THROWS_AS(encode(clip, ip_config(2)), ConfigError);
  CleanClip empty;
  CHECK_THROWS_AS(encode(empty, ip_config(2)), InputError);
  auto bad = ip_config(4);
  bad.frame_pattern = "PPPP";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.frame_pattern = "IPP";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("every block in exactly one packet; intra blocks carry zero motion") {
  CodecConfig cfg;
  cfg.gop_length = 4;
  cfg.frame_pattern = "IBPB";
  cfg.packet_blocks = 5;
  const auto clip = synth::make_scene({9, 32, 48, 2, 2}, 5);
  const auto enc = encode(clip, cfg);
  std::vector<int> seen(static_cast<std::size_t>(enc.frames) * enc.blocks_per_frame(), 0);
  for (const auto& p : enc.packets) {
    for (int k = 0; k < p.block_count; ++k) ++seen[p.frame_index * enc.blocks_per_frame() + p.first_block + k];
    if (p.kind == PayloadKind::kIntra)
      for (const auto& bm : p.motion) CHECK(bm == BlockMotion{});
  }
  for (int v : seen) CHECK(v == 1);
}

TEST_CASE("zero-drop round trip is bit-exact, including B-frames") {
  for (const std::string pattern : {"IPPP", "IBPB", "IBBP"}) {
    CodecConfig cfg;
    cfg.gop_length = 4;
    cfg.frame_pattern = pattern;
    const auto clip = synth::make_scene({10, 32, 32, 2, 2}, 17);
    Frames recon;
    const auto enc = encode(clip, cfg, &recon);
    const auto dec = decode(corrupt(enc, {0.0, 1, DropScope::kAllPackets}));
    CHECK(dec == recon);
    CHECK(dec == clip.frames);
  }
}

TEST_CASE("B-frames use a backward reference inside the GOP only") {
  const auto types = parse_frame_types("IBPBIBPB");
  const auto refs = frame_references(types, 4);
  CHECK(refs[1].fwd == 0);
  CHECK(refs[1].bwd == 2);
  CHECK(refs[3].fwd == 2);
  CHECK(refs[3].bwd == -1);  // closed GOP: frame 4 starts the next GOP
  const auto order = coding_order(types, 4);
  CHECK(order == std::vector<int>{0, 2, 1, 3, 4, 6, 5, 7});
}

TEST_CASE("corrupt: p = 0 is the identity, p = 1 with p_only removes exactly the P packets") {
  const auto clip = synth::make_scene({8, 32, 32, 2, 1}, 2);
  const auto enc = encode(clip, ip_config(4));
  CHECK(corrupt(enc, {0.0, 9, DropScope::kAllPackets}) == enc);
  const auto dropped = corrupt(enc, {1.0, 9, DropScope::kPOnly});
  CHECK(count_packets_of(dropped, FrameType::kP) == 0);
  CHECK(count_packets_of(dropped, FrameType::kI) == count_packets_of(enc, FrameType::kI));
  for (const auto& p : dropped.packets) CHECK(p.kind == PayloadKind::kIntra);
  CHECK_THROWS_AS(corrupt(enc, {1.5, 0, DropScope::kAllPackets}), InputError);
}

TEST_CASE("corrupt: reproducible and binomially distributed") {
  // 25 frames x 4 packets = 100 packets.
  const auto clip = synth::make_static_gray(25, 64, 64, 50);
  const auto enc = encode(clip, ip_config(25));
  REQUIRE(enc.packets.size() == 100);
  CHECK(corrupt(enc, {0.4, 42, DropScope::kAllPackets}) == corrupt(enc, {0.4, 42, DropScope::kAllPackets}));

  // Binomial(100, 0.4) central 99% interval from the exact pmf.
  std::vector<double> pmf(101);
  for (int k = 0; k <= 100; ++k) {
    pmf[k] = std::exp(std::lgamma(101.0) - std::lgamma(k + 1.0) - std::lgamma(101.0 - k) +
                      k * std::log(0.4) + (100 - k) * std::log(0.6));
  }
  int lo = 0, hi = 100;
  for (double acc = 0; (acc += pmf[lo]) < 0.005;) ++lo;
  for (double acc = 0; (acc += pmf[hi]) < 0.005;) --hi;
  int inside = 0;
  double mean = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const int dropped = 100 - static_cast<int>(corrupt(enc, {0.4, seed, DropScope::kAllPackets}).packets.size());
    inside += dropped >= lo && dropped <= hi;
    mean += dropped / 1000.0;
  }
  // Expected ~990 inside; 975 is > 4 sigma below that.
  CHECK(inside >= 975);
  CHECK(mean == doctest::Approx(40.0).epsilon(0.02));
}

TEST_CASE("decode: concealment in a static scene is exact") {
  const auto clip = synth::make_static_gray(4, 32, 32, 77);
  auto enc = encode(clip, ip_config(4, 8, 4, 4));
  // Drop the first P packet.
  for (auto it = enc.packets.begin(); it != enc.packets.end(); ++it) {
    if (it->kind == PayloadKind::kInter) {
      enc.packets.erase(it);
      break;
    }
  }
  CHECK(decode(enc) == clip.frames);
}

TEST_CASE("decode: lost GOP-initial I-frame corrupts every frame until the next I-frame") {
  const auto clip = synth::make_global_shift(12, 32, 32, 1, 1, 4);
  auto enc = encode(clip, ip_config(4));
  std::erase_if(enc.packets, [](const Packet& p) { return p.frame_index == 4; });
  const auto dec = decode(enc);
  const auto mask = ground_truth_mask(dec, clip.frames, 8.0 / 255.0, 1);
  for (int f = 0; f < 12; ++f) {
    if (f >= 4 && f < 8) {
      CHECK(mask_sum(mask, f) > 0);
    } else {
      CHECK(mask_sum(mask, f) == 0);
    }
  }
}

TEST_CASE("decoder is total on arbitrary packet subsets") {
  CodecConfig cfg;
  cfg.gop_length = 5;
  cfg.frame_pattern = "IBBPB";
  const auto clip = synth::make_scene({11, 32, 32, 2, 2}, 8);
  const auto enc = encode(clip, cfg);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto dec = decode(corrupt(enc, {0.5, seed, DropScope::kAllPackets}));
    CHECK(dec.shape() == clip.frames.shape());
  }
}

TEST_CASE("extract_metadata: replication, channel order, frame types") {
  SUBCASE("static clip gives an all-zero field") {
    const auto enc = encode(synth::make_static_gray(4, 32, 32, 1), ip_config(4));
    const auto meta = extract_metadata(enc);
    CHECK(meta.motion.shape() == Shape4{4, 32, 32, 4});
    for (float v : meta.motion.data()) CHECK(v == 0.0f);
  }
  SUBCASE("one block with (2, 0) fills exactly its footprint") {
    EncodedClip e;
    e.frames = 2;
    e.height = e.width = 16;
    e.block_size = 8;
    e.gop_length = 2;
    e.frame_types = {FrameType::kI, FrameType::kP};
    Packet p;
    p.frame_index = 1;
    p.block_count = 4;
    p.kind = PayloadKind::kInter;
    p.motion.resize(4);
    for (auto& bm : p.motion) bm.has_fwd = true;
    p.motion[3].fwd = {2, 0};
    p.residual.assign(4 * 8 * 8 * 3 * 2, 0);
    e.packets.push_back(p);
    const auto meta = extract_metadata(e);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const bool inside = x >= 8 && y >= 8;
        CHECK(meta.motion.at(1, y, x, 0) == (inside ? 2.0f : 0.0f));
        CHECK(meta.motion.at(1, y, x, 1) == 0.0f);
        CHECK(meta.motion.at(1, y, x, 2) == 0.0f);
        CHECK(meta.motion.at(1, y, x, 3) == 0.0f);
      }
  }
  SUBCASE("IPPP pattern over 8 frames") {
    const auto enc = encode(synth::make_static_gray(8, 16, 16, 1), ip_config(4));
    CHECK(frame_types_to_string(extract_metadata(enc).frame_types) == "IPPPIPPP");
  }
  SUBCASE("dropped packets read as zero motion; field is piecewise constant on blocks") {
    const auto clip = synth::make_global_shift(6, 32, 32, 2, 1, 21);
    const auto enc = encode(clip, ip_config(6, 8, 4, 2));
    const auto damaged = corrupt(enc, {0.5, 3, DropScope::kPOnly});
    const auto meta = extract_metadata(damaged);
    std::set<std::pair<int, int>> present;
    for (const auto& p : damaged.packets)
      for (int k = 0; k < p.block_count; ++k) present.insert({p.frame_index, p.first_block + k});
    for (int f = 0; f < 6; ++f)
      for (int b = 0; b < 16; ++b) {
        const int bx0 = (b % 4) * 8, by0 = (b / 4) * 8;
        for (int c = 0; c < 4; ++c) {
          const float v0 = meta.motion.at(f, by0, bx0, c);
          for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) CHECK(meta.motion.at(f, by0 + y, bx0 + x, c) == v0);
          if (!present.count({f, b})) CHECK(v0 == 0.0f);
        }
      }
  }
  SUBCASE("B-frames fill the backward channels") {
    CodecConfig cfg;
    cfg.gop_length = 4;
    cfg.frame_pattern = "IBPP";
    const auto clip = synth::make_global_shift(4, 32, 32, 1, 0, 5);
    const auto meta = extract_metadata(encode(clip, cfg));
    CHECK(meta.motion.at(1, 12, 12, 0) == 1.0f);
    CHECK(meta.motion.at(1, 12, 12, 2) == -1.0f);
  }
}

TEST_CASE("ground_truth_mask rules") {
  Frames clean(1, 8, 8, 3, 100);
  SUBCASE("identical frames") {
    const auto m = ground_truth_mask(clean, clean, 8.0 / 255.0, 1);
    CHECK(mask_sum(m, 0) == 0);
  }
  SUBCASE("single pixel residual 20/255 dilates to 3x3") {
    Frames bad = clean;
    for (int c = 0; c < 3; ++c) bad.at(0, 4, 4, c) = 120;
    const auto m = ground_truth_mask(bad, clean, 8.0 / 255.0, 1);
    CHECK(mask_sum(m, 0) == 9);
    for (int y = 3; y <= 5; ++y)
      for (int x = 3; x <= 5; ++x) CHECK(m.at(0, y, x) == 1);
  }
  SUBCASE("uniform residual below threshold") {
    Frames bad(1, 8, 8, 3, 104);
    CHECK(mask_sum(ground_truth_mask(bad, clean, 8.0 / 255.0, 1), 0) == 0);
  }
  SUBCASE("shape mismatch") {
    Frames other(1, 8, 4, 3, 0);
    CHECK_THROWS_AS(ground_truth_mask(other, clean, 0.1, 1), InputError);
  }
}

TEST_CASE("zero-drop identity on random clips") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto clip = synth::make_scene({8, 32, 32, 2, 2}, 100 + seed);
    const auto b = data::make_bundle(clip, ip_config(4), {0.0, seed, DropScope::kAllPackets}, {});
    CHECK(b.corrupted == clip.frames);
    for (auto v : b.gt_mask->data()) CHECK(v == 0);
  }
}

TEST_CASE("GOP containment of a single dropped packet") {
  const auto clip = synth::make_scene({16, 32, 32, 2, 2}, 31);
  const auto cfg = ip_config(4, 8, 4, 4);
  const auto enc = encode(clip, cfg);
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto damaged = enc;
    const int drop = std::uniform_int_distribution<int>(0, int(enc.packets.size()) - 1)(rng);
    const int gop = enc.packets[drop].frame_index / 4;
    damaged.packets.erase(damaged.packets.begin() + drop);
    const auto mask = ground_truth_mask(decode(damaged), clip.frames, 8.0 / 255.0, 1);
    for (int f = 0; f < 16; ++f)
      if (f / 4 != gop) CHECK(mask_sum(mask, f) == 0);
  }
}

namespace {

// A block is "chain-intact" when its packet survives and every reference
// block its prediction touches is chain-intact too.
std::vector<std::vector<bool>> intact_chains(const EncodedClip& e) {
  const int per = e.blocks_per_frame(), bs = e.block_size;
  std::vector<std::vector<bool>> ok(e.frames, std::vector<bool>(per, false));
  std::vector<std::vector<const BlockMotion*>> mv(e.frames, std::vector<const BlockMotion*>(per, nullptr));
  for (const auto& p : e.packets)
    for (int k = 0; k < p.block_count; ++k) mv[p.frame_index][p.first_block + k] = &p.motion[k];
  const auto refs = frame_references(e.frame_types, e.gop_length);
  auto covered_ok = [&](int rf, int bx0, int by0, MotionVector v) {
    const int sx = bx0 - v.dx, sy = by0 - v.dy;
    for (int y = sy / bs; y <= (sy + bs - 1) / bs; ++y)
      for (int x = sx / bs; x <= (sx + bs - 1) / bs; ++x)
        if (!ok[rf][y * e.blocks_x() + x]) return false;
    return true;
  };
  for (int f : coding_order(e.frame_types, e.gop_length))
    for (int b = 0; b < per; ++b) {
      if (!mv[f][b]) continue;
      if (e.frame_types[f] == FrameType::kI) {
        ok[f][b] = true;
        continue;
      }
      const int bx0 = (b % e.blocks_x()) * bs, by0 = (b / e.blocks_x()) * bs;
      bool good = covered_ok(refs[f].fwd, bx0, by0, mv[f][b]->fwd);
      if (mv[f][b]->has_bwd) good = good && covered_ok(refs[f].bwd, bx0, by0, mv[f][b]->bwd);
      ok[f][b] = good;
    }
  return ok;
}

}  // namespace

TEST_CASE("nested drop sets agree on blocks whose dependency chain survives in both") {
  const auto clip = synth::make_scene({12, 32, 32, 2, 2}, 55);
  const auto enc = encode(clip, ip_config(6, 8, 4, 2));
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto b_set = corrupt(enc, {0.3, seed, DropScope::kAllPackets});
    // A keeps a superset of B's packets.
    auto a_set = b_set;
    a_set.packets = enc.packets;
    std::mt19937 rng(seed);
    std::erase_if(a_set.packets, [&](const Packet& p) {
      const bool in_b = std::find(b_set.packets.begin(), b_set.packets.end(), p) != b_set.packets.end();
      return !in_b && (rng() % 2 == 0);
    });
    const auto dec_a = decode(a_set), dec_b = decode(b_set);
    const auto ok_a = intact_chains(a_set), ok_b = intact_chains(b_set);
    for (int f = 0; f < 12; ++f)
      for (int b = 0; b < enc.blocks_per_frame(); ++b) {
        if (!(ok_a[f][b] && ok_b[f][b])) continue;
        const int bx0 = (b % 4) * 8, by0 = (b / 4) * 8;
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c)
              REQUIRE(dec_a.at(f, by0 + y, bx0 + x, c) == dec_b.at(f, by0 + y, bx0 + x, c));
      }
  }
}

TEST_CASE("generation is a pure function of (clip, config, seed)") {
  const auto clip = synth::make_scene({8, 32, 32, 2, 2}, 9);
  const CorruptionParams p{0.4, 1234, DropScope::kAllPackets};
  CHECK(data::make_bundle(clip, ip_config(4), p, {}) == data::make_bundle(clip, ip_config(4), p, {}));
  CHECK(synth::make_scene({8, 32, 32, 2, 2}, 9).frames == clip.frames);
}
