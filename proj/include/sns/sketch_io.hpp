#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sns/binary_io.hpp"
#include "sns/count_sketch.hpp"

namespace sns {

// SNSK layout, little-endian, no padding:
//   "SNSK" | u16 version=1 | u32 rows | u32 cols | u64 seed |
//   u64 total_updates | rows*cols x i64 counters (row-major)
inline constexpr char kSketchMagic[5] = "SNSK";
inline constexpr std::uint16_t kSketchVersion = 1;
inline constexpr std::size_t kSketchHeaderBytes = 4 + 2 + 4 + 4 + 8 + 8;

inline std::uint64_t sketch_file_size(const SketchConfig& c) {
  return kSketchHeaderBytes + static_cast<std::uint64_t>(c.counter_count()) * sizeof(std::int64_t);
}

inline std::vector<std::uint8_t> serialize(const CountSketch& s) {
  ByteWriter w;
  w.reserve(sketch_file_size(s.config()));
  w.tag(kSketchMagic);
  w.u16(kSketchVersion);
  w.u32(s.rows());
  w.u32(s.cols());
  w.u64(s.config().seed);
  w.u64(s.total_updates());
  for (std::int64_t c : s.counters()) w.i64(c);
  return w.take();
}

/// Parses an SNSK payload. Never returns a partially filled sketch.
inline CountSketch deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "sketch");
  if (!r.tag_matches(kSketchMagic)) throw BadMagicError("not a sketch file (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kSketchVersion) {
    throw VersionMismatchError("unsupported sketch version " + std::to_string(version) + " (expected " +
                               std::to_string(kSketchVersion) + ")");
  }
  SketchConfig cfg;
  cfg.rows = r.u32();
  cfg.cols = r.u32();
  cfg.seed = r.u64();
  const std::uint64_t total = r.u64();
  if (cfg.rows == 0 || cfg.cols == 0) throw FormatError("sketch header declares an empty table");
  const std::size_t n = cfg.counter_count();
  r.need(n * sizeof(std::int64_t));
  std::vector<std::int64_t> counters(n);
  for (auto& c : counters) c = r.i64();
  if (r.remaining() != 0) {
    throw FormatError("sketch payload has " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return CountSketch::from_state(cfg, total, std::move(counters));
}

inline void write_sketch_file(const std::filesystem::path& path, const CountSketch& s) {
  AtomicFile f(path);
  f.write(serialize(s));
  f.commit();
}

inline CountSketch read_sketch_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return deserialize(bytes);
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.what());
  } catch (const BadMagicError& e) {
    throw BadMagicError(path.string() + ": " + e.what());
  } catch (const VersionMismatchError& e) {
    throw VersionMismatchError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace sns
