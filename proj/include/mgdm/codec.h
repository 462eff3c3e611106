// SPDX-License-Identifier: Apache-2.0
#pragma once

// Toy block-motion codec and packet-loss corruptor.
//
// The codec is lossless: I-blocks carry raw pixels, P-blocks carry a motion
// vector found by exhaustive block matching plus the exact residual, and
// B-blocks average a forward and a backward match. Dropping packets and
// decoding with co-located concealment produces the usual corruption
// taxonomy (blocky gray holes, duplicated or misaligned content, trailing
// errors) that propagates through inter prediction until the next I-frame.
//
// Motion vector convention: a block at (x, y) with vector (dx, dy) is
// predicted from the reference at (x - dx, y - dy), i.e. the vector is the
// displacement content underwent from reference to current frame.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgdm/config.h"
#include "mgdm/volume.h"

namespace mgdm::codec {

enum class FrameType : std::uint8_t { kI = 0, kP = 1, kB = 2 };

char to_char(FrameType t);
FrameType frame_type_from_char(char c);  // throws InputError on unknown symbol
std::vector<FrameType> parse_frame_types(std::string_view symbols);
std::string frame_types_to_string(const std::vector<FrameType>& types);

struct CleanClip {
  Frames frames;  // [N, H, W, 3]
  std::string clip_id;
};

struct CodecConfig {
  int gop_length = 8;
  std::string frame_pattern = "IPPPPPPP";
  int block_size = 8;
  int search_range = 4;
  int packet_blocks = 16;

  // Throws ConfigError when the pattern or sizes are inconsistent.
  void validate() const;
  // Reads `codec.gop`, `codec.pattern`, `codec.block`, `codec.search`,
  // `codec.packet_blocks`.
  static CodecConfig from_config(const KeyValueConfig& cfg);
};

struct MotionVector {
  int dx = 0;
  int dy = 0;
  bool operator==(const MotionVector&) const = default;
};

struct BlockMotion {
  MotionVector fwd;
  MotionVector bwd;
  bool has_fwd = false;
  bool has_bwd = false;
  bool operator==(const BlockMotion&) const = default;
};

enum class PayloadKind : std::uint8_t { kIntra = 0, kInter = 1 };

struct Packet {
  int frame_index = 0;
  int first_block = 0;  // raster index of the first block within the frame
  int block_count = 0;
  PayloadKind kind = PayloadKind::kIntra;
  std::vector<BlockMotion> motion;     // one entry per block
  std::vector<std::uint8_t> residual;  // intra: raw pixels; inter: int16 LE residuals
  bool operator==(const Packet&) const = default;
};

struct EncodedClip {
  int frames = 0;
  int height = 0;
  int width = 0;
  int block_size = 0;
  int gop_length = 0;
  std::vector<FrameType> frame_types;
  std::vector<Packet> packets;  // bitstream (coding) order

  int blocks_x() const { return width / block_size; }
  int blocks_y() const { return height / block_size; }
  int blocks_per_frame() const { return blocks_x() * blocks_y(); }
  bool operator==(const EncodedClip&) const = default;
};

// Reference frames used by inter prediction. -1 marks an absent reference.
struct FrameRefs {
  int fwd = -1;
  int bwd = -1;
};

// Forward reference: previous I/P frame. Backward reference (B only): next
// I/P frame inside the same GOP (closed GOP), otherwise absent.
std::vector<FrameRefs> frame_references(const std::vector<FrameType>& types, int gop_length);
// Display indices in the order the encoder emits and the decoder consumes them.
std::vector<int> coding_order(const std::vector<FrameType>& types, int gop_length);

// Per-frame, per-block motion as carried by the surviving packets. Blocks whose
// packet is missing, and intra blocks, report zero motion with no references.
std::vector<std::vector<BlockMotion>> block_motion(const EncodedClip& encoded);

// When `reconstruction` is non-null it receives the encoder-side reconstruction.
EncodedClip encode(const CleanClip& clip, const CodecConfig& config, Frames* reconstruction = nullptr);

enum class DropScope : std::uint8_t { kAllPackets, kIOnly, kPOnly, kBOnly };
DropScope parse_drop_scope(std::string_view name);
std::string_view to_string(DropScope scope);

struct CorruptionParams {
  double drop_probability = 0.0;
  std::uint64_t seed = 0;
  DropScope scope = DropScope::kAllPackets;
};

// Independent Bernoulli(drop_probability) removal of in-scope packets. One
// uniform draw is consumed per packet (in scope or not), so the drop set is a
// function of (packet count, params) alone.
EncodedClip corrupt(const EncodedClip& encoded, const CorruptionParams& params);

// Total decoder with co-located concealment:
//  - missing intra block: copy from display-previous reconstructed frame (128 for frame 0)
//  - missing inter block: copy from the forward reference, motion ignored
Frames decode(const EncodedClip& encoded);

struct Metadata {
  MotionField motion;  // [N, H, W, 4]
  std::vector<FrameType> frame_types;
};

Metadata extract_metadata(const EncodedClip& encoded);

struct MaskParams {
  double threshold = 8.0 / 255.0;  // mean absolute channel residual, normalized units
  int dilation_radius = 1;
};

// 1 where mean_c |corrupted - clean| / 255 > threshold, then square dilation.
BinaryMask ground_truth_mask(const Frames& corrupted, const Frames& clean, double threshold,
                             int dilation_radius);
BinaryMask dilate(const BinaryMask& mask, int radius);

}  // namespace mgdm::codec
