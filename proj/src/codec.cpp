// SPDX-License-Identifier: Apache-2.0
#include "mgdm/codec.h"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <random>

#include "mgdm/error.h"

namespace mgdm::codec {

char to_char(FrameType t) {
  switch (t) {
    case FrameType::kI: return 'I';
    case FrameType::kP: return 'P';
    case FrameType::kB: return 'B';
  }
  return '?';
}

FrameType frame_type_from_char(char c) {
  switch (c) {
    case 'I': return FrameType::kI;
    case 'P': return FrameType::kP;
    case 'B': return FrameType::kB;
    default: break;
  }
  throw InputError(std::string("unknown frame type symbol '") + c + "'");
}

std::vector<FrameType> parse_frame_types(std::string_view symbols) {
  std::vector<FrameType> out;
  out.reserve(symbols.size());
  for (char c : symbols) out.push_back(frame_type_from_char(c));
  return out;
}

std::string frame_types_to_string(const std::vector<FrameType>& types) {
  std::string s;
  for (auto t : types) s.push_back(to_char(t));
  return s;
}

void CodecConfig::validate() const {
  if (gop_length <= 0) throw ConfigError("codec: gop_length must be positive");
  if (static_cast<int>(frame_pattern.size()) != gop_length) {
    throw ConfigError("codec: frame_pattern length " + std::to_string(frame_pattern.size()) +
                      " != gop_length " + std::to_string(gop_length));
  }
  if (frame_pattern.empty() || frame_pattern.front() != 'I') {
    throw ConfigError("codec: frame_pattern must begin with I");
  }
  for (char c : frame_pattern) {
    if (c != 'I' && c != 'P' && c != 'B') {
      throw ConfigError(std::string("codec: bad frame_pattern symbol '") + c + "'");
    }
  }
  if (block_size <= 0) throw ConfigError("codec: block_size must be positive");
  if (search_range < 0) throw ConfigError("codec: search_range must be non-negative");
  if (packet_blocks <= 0) throw ConfigError("codec: packet_blocks must be positive");
}

CodecConfig CodecConfig::from_config(const KeyValueConfig& cfg) {
  CodecConfig c;
  c.gop_length = static_cast<int>(cfg.get_int("codec.gop", c.gop_length));
  c.frame_pattern = cfg.get_string("codec.pattern", "");
  if (c.frame_pattern.empty()) {
    c.frame_pattern = "I" + std::string(std::max(0, c.gop_length - 1), 'P');
  }
  c.block_size = static_cast<int>(cfg.get_int("codec.block", c.block_size));
  c.search_range = static_cast<int>(cfg.get_int("codec.search", c.search_range));
  c.packet_blocks = static_cast<int>(cfg.get_int("codec.packet_blocks", c.packet_blocks));
  c.validate();
  return c;
}

std::vector<FrameRefs> frame_references(const std::vector<FrameType>& types, int gop_length) {
  const int n = static_cast<int>(types.size());
  std::vector<FrameRefs> refs(n);
  int last_anchor = -1;
  for (int i = 0; i < n; ++i) {
    if (types[i] == FrameType::kI) {
      last_anchor = i;
      continue;
    }
    refs[i].fwd = last_anchor;
    if (types[i] == FrameType::kB) {
      const int gop_end = gop_length > 0 ? std::min(n, (i / gop_length + 1) * gop_length) : n;
      for (int j = i + 1; j < gop_end; ++j) {
        if (types[j] != FrameType::kB) {
          refs[i].bwd = j;
          break;
        }
      }
    } else {
      last_anchor = i;
    }
  }
  return refs;
}

std::vector<int> coding_order(const std::vector<FrameType>& types, int gop_length) {
  const int n = static_cast<int>(types.size());
  const auto refs = frame_references(types, gop_length);
  std::vector<int> order;
  order.reserve(n);
  const int gop = gop_length > 0 ? gop_length : n;
  for (int start = 0; start < n; start += gop) {
    const int end = std::min(n, start + gop);
    for (int i = start; i < end; ++i) {
      if (types[i] == FrameType::kB) continue;
      order.push_back(i);
      for (int j = start; j < i; ++j) {
        if (types[j] == FrameType::kB && refs[j].bwd == i) order.push_back(j);
      }
    }
    for (int j = start; j < end; ++j) {
      if (types[j] == FrameType::kB && refs[j].bwd < 0) order.push_back(j);
    }
  }
  return order;
}

namespace {

struct Geometry {
  int h, w, bs, bx, by;
  int blocks() const { return bx * by; }
};

// Block predicted from `ref` displaced by mv; caller guarantees bounds.
void fetch_block(const Frames& ref, int ref_frame, const Geometry& g, int bx0, int by0,
                 MotionVector mv, std::vector<int>& out) {
  out.resize(static_cast<std::size_t>(g.bs) * g.bs * 3);
  std::size_t k = 0;
  for (int y = 0; y < g.bs; ++y) {
    const int sy = by0 + y - mv.dy;
    for (int x = 0; x < g.bs; ++x) {
      const int sx = bx0 + x - mv.dx;
      for (int c = 0; c < 3; ++c) out[k++] = ref.at(ref_frame, sy, sx, c);
    }
  }
}

bool in_bounds(const Geometry& g, int bx0, int by0, MotionVector mv) {
  const int sx = bx0 - mv.dx;
  const int sy = by0 - mv.dy;
  return sx >= 0 && sy >= 0 && sx + g.bs <= g.w && sy + g.bs <= g.h;
}

// Exhaustive SAD search; ties prefer smaller |dx|+|dy|, then scan order.
MotionVector search(const Frames& cur, int cur_frame, const Frames& ref, int ref_frame,
                    const Geometry& g, int bx0, int by0, int range) {
  MotionVector best{};
  long best_sad = std::numeric_limits<long>::max();
  int best_len = std::numeric_limits<int>::max();
  for (int dy = -range; dy <= range; ++dy) {
    for (int dx = -range; dx <= range; ++dx) {
      const MotionVector mv{dx, dy};
      if (!in_bounds(g, bx0, by0, mv)) continue;
      long sad = 0;
      for (int y = 0; y < g.bs && sad <= best_sad; ++y) {
        for (int x = 0; x < g.bs; ++x) {
          for (int c = 0; c < 3; ++c) {
            sad += std::abs(static_cast<int>(cur.at(cur_frame, by0 + y, bx0 + x, c)) -
                            static_cast<int>(ref.at(ref_frame, by0 + y - dy, bx0 + x - dx, c)));
          }
        }
      }
      const int len = std::abs(dx) + std::abs(dy);
      if (sad < best_sad || (sad == best_sad && len < best_len)) {
        best_sad = sad;
        best_len = len;
        best = mv;
      }
    }
  }
  return best;
}

void predict_inter(const Frames& recon, const FrameRefs& refs, const BlockMotion& bm,
                   const Geometry& g, int bx0, int by0, std::vector<int>& pred,
                   std::vector<int>& scratch) {
  fetch_block(recon, refs.fwd, g, bx0, by0, bm.fwd, pred);
  if (bm.has_bwd) {
    fetch_block(recon, refs.bwd, g, bx0, by0, bm.bwd, scratch);
    for (std::size_t k = 0; k < pred.size(); ++k) pred[k] = (pred[k] + scratch[k] + 1) >> 1;
  }
}

void put_i16(std::vector<std::uint8_t>& out, int v) {
  const auto u = static_cast<std::uint16_t>(static_cast<std::int16_t>(v));
  out.push_back(static_cast<std::uint8_t>(u & 0xff));
  out.push_back(static_cast<std::uint8_t>(u >> 8));
}

int get_i16(const std::vector<std::uint8_t>& in, std::size_t pos) {
  const auto u = static_cast<std::uint16_t>(in[pos] | (in[pos + 1] << 8));
  return static_cast<std::int16_t>(u);
}

Geometry geometry_of(const EncodedClip& e) {
  return {e.height, e.width, e.block_size, e.blocks_x(), e.blocks_y()};
}

}  // namespace

EncodedClip encode(const CleanClip& clip, const CodecConfig& config, Frames* reconstruction) {
  config.validate();
  const Frames& src = clip.frames;
  if (src.frames() < 1 || src.empty()) throw InputError("encode: empty clip");
  if (src.channels() != 3) throw InputError("encode: expected 3-channel frames");
  if (src.height() % config.block_size != 0 || src.width() % config.block_size != 0) {
    throw ConfigError("encode: frame size " + std::to_string(src.height()) + "x" +
                      std::to_string(src.width()) + " not divisible by block size " +
                      std::to_string(config.block_size));
  }

  EncodedClip enc;
  enc.frames = src.frames();
  enc.height = src.height();
  enc.width = src.width();
  enc.block_size = config.block_size;
  enc.gop_length = config.gop_length;
  for (int i = 0; i < enc.frames; ++i) {
    enc.frame_types.push_back(frame_type_from_char(config.frame_pattern[i % config.gop_length]));
  }
  const auto refs = frame_references(enc.frame_types, enc.gop_length);
  const Geometry g = geometry_of(enc);

  Frames recon(src.shape());
  std::vector<int> pred, scratch;
  for (int f : coding_order(enc.frame_types, enc.gop_length)) {
    const bool intra = enc.frame_types[f] == FrameType::kI;
    for (int b0 = 0; b0 < g.blocks(); b0 += config.packet_blocks) {
      Packet pkt;
      pkt.frame_index = f;
      pkt.first_block = b0;
      pkt.block_count = std::min(config.packet_blocks, g.blocks() - b0);
      pkt.kind = intra ? PayloadKind::kIntra : PayloadKind::kInter;
      for (int b = b0; b < b0 + pkt.block_count; ++b) {
        const int bx0 = (b % g.bx) * g.bs;
        const int by0 = (b / g.bx) * g.bs;
        BlockMotion bm;
        if (intra) {
          for (int y = 0; y < g.bs; ++y)
            for (int x = 0; x < g.bs; ++x)
              for (int c = 0; c < 3; ++c) {
                const auto v = src.at(f, by0 + y, bx0 + x, c);
                pkt.residual.push_back(v);
                recon.at(f, by0 + y, bx0 + x, c) = v;
              }
          pkt.motion.push_back(bm);
          continue;
        }
        bm.has_fwd = true;
        bm.fwd = search(src, f, recon, refs[f].fwd, g, bx0, by0, config.search_range);
        if (refs[f].bwd >= 0) {
          bm.has_bwd = true;
          bm.bwd = search(src, f, recon, refs[f].bwd, g, bx0, by0, config.search_range);
        }
        predict_inter(recon, refs[f], bm, g, bx0, by0, pred, scratch);
        std::size_t k = 0;
        for (int y = 0; y < g.bs; ++y)
          for (int x = 0; x < g.bs; ++x)
            for (int c = 0; c < 3; ++c, ++k) {
              const int v = src.at(f, by0 + y, bx0 + x, c);
              put_i16(pkt.residual, v - pred[k]);
              recon.at(f, by0 + y, bx0 + x, c) = static_cast<std::uint8_t>(v);
            }
        pkt.motion.push_back(bm);
      }
      enc.packets.push_back(std::move(pkt));
    }
  }
  if (reconstruction) *reconstruction = std::move(recon);
  return enc;
}

DropScope parse_drop_scope(std::string_view name) {
  if (name == "all_packets" || name == "all") return DropScope::kAllPackets;
  if (name == "i_only") return DropScope::kIOnly;
  if (name == "p_only") return DropScope::kPOnly;
  if (name == "b_only") return DropScope::kBOnly;
  throw InputError("unknown drop scope '" + std::string(name) + "'");
}

std::string_view to_string(DropScope scope) {
  switch (scope) {
    case DropScope::kAllPackets: return "all_packets";
    case DropScope::kIOnly: return "i_only";
    case DropScope::kPOnly: return "p_only";
    case DropScope::kBOnly: return "b_only";
  }
  return "?";
}

EncodedClip corrupt(const EncodedClip& encoded, const CorruptionParams& params) {
  if (!(params.drop_probability >= 0.0 && params.drop_probability <= 1.0)) {
    throw InputError("corrupt: drop_probability must lie in [0, 1]");
  }
  EncodedClip out = encoded;
  out.packets.clear();
  std::mt19937_64 rng(params.seed);
  for (const auto& pkt : encoded.packets) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const FrameType t = encoded.frame_types.at(pkt.frame_index);
    bool in_scope = false;
    switch (params.scope) {
      case DropScope::kAllPackets: in_scope = true; break;
      case DropScope::kIOnly: in_scope = t == FrameType::kI; break;
      case DropScope::kPOnly: in_scope = t == FrameType::kP; break;
      case DropScope::kBOnly: in_scope = t == FrameType::kB; break;
    }
    if (in_scope && u < params.drop_probability) continue;
    out.packets.push_back(pkt);
  }
  return out;
}

namespace {

// For each (frame, block): index into packets and offset within it, or -1.
struct BlockIndex {
  std::vector<int> packet;
  std::vector<int> slot;
};

BlockIndex index_blocks(const EncodedClip& e) {
  const int per_frame = e.blocks_per_frame();
  BlockIndex idx;
  idx.packet.assign(static_cast<std::size_t>(e.frames) * per_frame, -1);
  idx.slot.assign(idx.packet.size(), -1);
  for (int p = 0; p < static_cast<int>(e.packets.size()); ++p) {
    const auto& pkt = e.packets[p];
    if (pkt.frame_index < 0 || pkt.frame_index >= e.frames) continue;
    for (int k = 0; k < pkt.block_count; ++k) {
      const int b = pkt.first_block + k;
      if (b < 0 || b >= per_frame) continue;
      const auto at = static_cast<std::size_t>(pkt.frame_index) * per_frame + b;
      idx.packet[at] = p;
      idx.slot[at] = k;
    }
  }
  return idx;
}

}  // namespace

Frames decode(const EncodedClip& encoded) {
  const Geometry g = geometry_of(encoded);
  Frames out(encoded.frames, encoded.height, encoded.width, 3);
  const auto refs = frame_references(encoded.frame_types, encoded.gop_length);
  const auto idx = index_blocks(encoded);
  const std::size_t block_bytes = static_cast<std::size_t>(g.bs) * g.bs * 3;
  std::vector<int> pred, scratch;
  std::vector<bool> decoded(encoded.frames, false);

  for (int f : coding_order(encoded.frame_types, encoded.gop_length)) {
    const bool intra = encoded.frame_types[f] == FrameType::kI;
    // Display-previous frame, skipping B-frames that are coded after f.
    int prev = f - 1;
    while (prev >= 0 && !decoded[prev]) --prev;
    for (int b = 0; b < g.blocks(); ++b) {
      const int bx0 = (b % g.bx) * g.bs;
      const int by0 = (b / g.bx) * g.bs;
      const auto at = static_cast<std::size_t>(f) * g.blocks() + b;
      const int p = idx.packet[at];
      if (p < 0) {
        // Concealment by co-located copy.
        const int src = intra ? prev : refs[f].fwd;
        for (int y = 0; y < g.bs; ++y)
          for (int x = 0; x < g.bs; ++x)
            for (int c = 0; c < 3; ++c)
              out.at(f, by0 + y, bx0 + x, c) =
                  src < 0 ? std::uint8_t{128} : out.at(src, by0 + y, bx0 + x, c);
        continue;
      }
      const auto& pkt = encoded.packets[p];
      const std::size_t slot = idx.slot[at];
      if (pkt.kind == PayloadKind::kIntra) {
        std::size_t k = slot * block_bytes;
        for (int y = 0; y < g.bs; ++y)
          for (int x = 0; x < g.bs; ++x)
            for (int c = 0; c < 3; ++c) out.at(f, by0 + y, bx0 + x, c) = pkt.residual[k++];
        continue;
      }
      BlockMotion bm = pkt.motion[slot];
      FrameRefs fr = refs[f];
      if (fr.fwd < 0) {
        // Inter payload without a usable reference: treat as gray prediction.
        pred.assign(block_bytes, 128);
      } else {
        bm.has_bwd = bm.has_bwd && fr.bwd >= 0;
        if (!in_bounds(g, bx0, by0, bm.fwd)) bm.fwd = {};
        if (bm.has_bwd && !in_bounds(g, bx0, by0, bm.bwd)) bm.bwd = {};
        predict_inter(out, fr, bm, g, bx0, by0, pred, scratch);
      }
      std::size_t k = 0;
      std::size_t pos = slot * block_bytes * 2;
      for (int y = 0; y < g.bs; ++y)
        for (int x = 0; x < g.bs; ++x)
          for (int c = 0; c < 3; ++c, ++k, pos += 2) {
            const int v = pred[k] + get_i16(pkt.residual, pos);
            out.at(f, by0 + y, bx0 + x, c) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
          }
    }
    decoded[f] = true;
  }
  return out;
}

std::vector<std::vector<BlockMotion>> block_motion(const EncodedClip& encoded) {
  const int per_frame = encoded.blocks_per_frame();
  std::vector<std::vector<BlockMotion>> out(encoded.frames,
                                            std::vector<BlockMotion>(per_frame));
  for (const auto& pkt : encoded.packets) {
    if (pkt.kind != PayloadKind::kInter) continue;
    for (int k = 0; k < pkt.block_count; ++k) {
      out.at(pkt.frame_index).at(pkt.first_block + k) = pkt.motion.at(k);
    }
  }
  return out;
}

Metadata extract_metadata(const EncodedClip& encoded) {
  Metadata meta;
  meta.frame_types = encoded.frame_types;
  meta.motion = MotionField(encoded.frames, encoded.height, encoded.width, 4, 0.0f);
  const auto mvs = block_motion(encoded);
  const int bs = encoded.block_size;
  for (int f = 0; f < encoded.frames; ++f) {
    for (int b = 0; b < encoded.blocks_per_frame(); ++b) {
      const auto& bm = mvs[f][b];
      const float ch[4] = {
          bm.has_fwd ? static_cast<float>(bm.fwd.dx) : 0.0f,
          bm.has_fwd ? static_cast<float>(bm.fwd.dy) : 0.0f,
          bm.has_bwd ? static_cast<float>(bm.bwd.dx) : 0.0f,
          bm.has_bwd ? static_cast<float>(bm.bwd.dy) : 0.0f,
      };
      const int bx0 = (b % encoded.blocks_x()) * bs;
      const int by0 = (b / encoded.blocks_x()) * bs;
      for (int y = 0; y < bs; ++y)
        for (int x = 0; x < bs; ++x)
          for (int c = 0; c < 4; ++c) meta.motion.at(f, by0 + y, bx0 + x, c) = ch[c];
    }
  }
  return meta;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius <= 0) return mask;
  const auto s = mask.shape();
  // Separable max filter: rows then columns.
  BinaryMask tmp(s), out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        std::uint8_t v = 0;
        for (int dx = std::max(0, x - radius); dx <= std::min(s.w - 1, x + radius) && !v; ++dx)
          v = mask.at(n, y, dx);
        tmp.at(n, y, x) = v;
      }
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        std::uint8_t v = 0;
        for (int dy = std::max(0, y - radius); dy <= std::min(s.h - 1, y + radius) && !v; ++dy)
          v = tmp.at(n, dy, x);
        out.at(n, y, x) = v;
      }
  }
  return out;
}

BinaryMask ground_truth_mask(const Frames& corrupted, const Frames& clean, double threshold,
                             int dilation_radius) {
  require_same_shape(corrupted.shape(), clean.shape(), "ground_truth_mask");
  const auto s = clean.shape();
  BinaryMask raw(s.n, s.h, s.w, 1);
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        int sum = 0;
        for (int c = 0; c < s.c; ++c) {
          sum += std::abs(static_cast<int>(corrupted.at(n, y, x, c)) -
                          static_cast<int>(clean.at(n, y, x, c)));
        }
        const double mean = static_cast<double>(sum) / s.c / 255.0;
        raw.at(n, y, x) = mean > threshold ? 1 : 0;
      }
  return dilate(raw, dilation_radius);
}

}  // namespace mgdm::codec
