// SPDX-License-Identifier: Apache-2.0
#include "mgdm/bundle.h"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mgdm/error.h"
#include "mgdm/png_io.h"

namespace mgdm {
namespace fs = std::filesystem;

namespace {

std::string frame_name(int n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d.png", n);
  return buf;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

Frames read_frames(const fs::path& dir, int count, int channels) {
  Frames out;
  for (int n = 0; n < count; ++n) {
    const auto img = png::read(dir / frame_name(n), channels);
    if (n == 0) out = Frames(count, img.height, img.width, channels);
    if (img.width != out.width() || img.height != out.height()) {
      throw FormatError("frame size mismatch in " + (dir / frame_name(n)).string());
    }
    std::copy(img.pixels.begin(), img.pixels.end(), out.frame(n).begin());
  }
  return out;
}

}  // namespace

void write_frames(const Frames& frames, const fs::path& dir) {
  fs::create_directories(dir);
  for (int n = 0; n < frames.frames(); ++n) {
    png::write(dir / frame_name(n), frames.width(), frames.height(), frames.channels(),
               frames.frame(n));
  }
}

void write_motion(const fs::path& file, const MotionField& motion) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out.write(kMotionMagic, sizeof(kMotionMagic));
  put_u32(out, static_cast<std::uint32_t>(motion.frames()));
  put_u32(out, static_cast<std::uint32_t>(motion.height()));
  put_u32(out, static_cast<std::uint32_t>(motion.width()));
  for (float v : motion.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("short write to " + file.string());
}

MotionField read_motion(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("missing file " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 20) throw FormatError("truncated header in " + file.string());
  if (std::memcmp(bytes.data(), kMotionMagic, sizeof(kMotionMagic)) != 0) {
    throw FormatError("bad magic in " + file.string());
  }
  const auto n = get_u32(bytes.data() + 8);
  const auto h = get_u32(bytes.data() + 12);
  const auto w = get_u32(bytes.data() + 16);
  const std::size_t count = static_cast<std::size_t>(n) * h * w * 4;
  if (bytes.size() != 20 + count * 4) {
    throw FormatError("truncated payload in " + file.string() + " (expected " +
                      std::to_string(20 + count * 4) + " bytes, got " +
                      std::to_string(bytes.size()) + ")");
  }
  MotionField out(static_cast<int>(n), static_cast<int>(h), static_cast<int>(w), 4);
  for (std::size_t i = 0; i < count; ++i) {
    out.data()[i] = std::bit_cast<float>(get_u32(bytes.data() + 20 + 4 * i));
  }
  return out;
}

void write_bundle(const ClipBundle& b, const fs::path& dir) {
  fs::create_directories(dir);
  if (b.clean) write_frames(*b.clean, dir / "frames_clean");
  write_frames(b.corrupted, dir / "frames_corrupt");
  write_motion(dir / "motion.bin", b.motion);
  {
    std::ofstream out(dir / "frame_types.txt");
    for (auto t : b.frame_types) out << codec::to_char(t) << '\n';
    if (!out) throw IoError("cannot write " + (dir / "frame_types.txt").string());
  }
  if (b.gt_mask) {
    const auto& m = *b.gt_mask;
    fs::create_directories(dir / "mask");
    std::vector<std::uint8_t> px(m.frame_size());
    for (int n = 0; n < m.frames(); ++n) {
      auto src = m.frame(n);
      std::transform(src.begin(), src.end(), px.begin(),
                     [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
      png::write(dir / "mask" / frame_name(n), m.width(), m.height(), 1, px);
    }
  }
  nlohmann::json meta = b.meta;
  meta["clip_id"] = b.clip_id;
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
}

ClipBundle read_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("bundle directory not found: " + dir.string());
  ClipBundle b;

  const fs::path types_file = dir / "frame_types.txt";
  std::ifstream types_in(types_file);
  if (!types_in) throw FormatError("missing file " + types_file.string());
  std::string line;
  while (std::getline(types_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.size() != 1) throw FormatError("bad frame type line in " + types_file.string());
    try {
      b.frame_types.push_back(codec::frame_type_from_char(line[0]));
    } catch (const InputError&) {
      throw FormatError("unknown frame type '" + line + "' in " + types_file.string());
    }
  }
  const int n = static_cast<int>(b.frame_types.size());
  if (n == 0) throw FormatError("no frames listed in " + types_file.string());

  b.motion = read_motion(dir / "motion.bin");
  b.corrupted = read_frames(dir / "frames_corrupt", n, 3);
  if (b.motion.frames() != n || b.motion.height() != b.corrupted.height() ||
      b.motion.width() != b.corrupted.width()) {
    throw FormatError("motion field geometry disagrees with frames in " +
                      (dir / "motion.bin").string());
  }
  if (fs::is_directory(dir / "frames_clean")) b.clean = read_frames(dir / "frames_clean", n, 3);
  if (fs::is_directory(dir / "mask")) {
    const Frames raw = read_frames(dir / "mask", n, 1);
    BinaryMask m(raw.shape());
    std::transform(raw.data().begin(), raw.data().end(), m.data().begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v >= 128 ? 1 : 0); });
    b.gt_mask = std::move(m);
  }

  const fs::path meta_file = dir / "meta.json";
  if (fs::exists(meta_file)) {
    std::ifstream in(meta_file);
    try {
      b.meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("malformed " + meta_file.string() + ": " + e.what());
    }
    if (b.meta.contains("clip_id")) {
      b.clip_id = b.meta["clip_id"].get<std::string>();
      b.meta.erase("clip_id");
    }
  }
  if (b.clip_id.empty()) b.clip_id = dir.filename().string();
  return b;
}

std::vector<fs::path> list_bundles(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::is_directory(root)) return out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "frame_types.txt")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mgdm
