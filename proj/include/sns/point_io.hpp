#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sns/binary_io.hpp"
#include "sns/errors.hpp"
#include "sns/format.hpp"

namespace sns {

enum class PointFormat { csv, binary };

inline PointFormat parse_point_format(std::string_view s) {
  if (s == "csv") return PointFormat::csv;
  if (s == "binary" || s == "snsd") return PointFormat::binary;
  throw UsageError("unknown point format '" + std::string(s) + "' (expected csv or binary)");
}

inline std::string to_string(PointFormat f) { return f == PointFormat::csv ? "csv" : "binary"; }

/// Picks the format from the extension: ".snsd"/".bin" are binary, anything
/// else is CSV.
inline PointFormat guess_point_format(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return (ext == ".snsd" || ext == ".bin") ? PointFormat::binary : PointFormat::csv;
}

// SNSD layout: "SNSD" | u16 version=1 | u32 dims | u64 count | count*dims f32
inline constexpr char kPointsMagic[5] = "SNSD";
inline constexpr std::uint16_t kPointsVersion = 1;
inline constexpr std::size_t kPointsHeaderBytes = 4 + 2 + 4 + 8;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Splits a CSV line into doubles. Returns false if any field is not a number.
inline bool parse_csv_numbers(std::string_view line, std::vector<double>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) return false;
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return true;
}

}  // namespace detail

struct PointFileInfo {
  std::size_t dims = 0;
  std::uint64_t rows = 0;
};

/// Calls fn(row, coords) for every row in [row_begin, row_end). Row numbers
/// are zero-based and exclude a CSV header. dims == 0 accepts the file's
/// width; otherwise mismatching rows are data errors.
inline void for_each_point(const std::filesystem::path& path, PointFormat format, std::size_t dims,
                           std::uint64_t row_begin, std::uint64_t row_end,
                           const std::function<void(std::uint64_t, std::span<const double>)>& fn) {
  if (row_begin >= row_end) return;
  if (format == PointFormat::binary) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> header(kPointsHeaderBytes);
    in.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(header.size()));
    header.resize(static_cast<std::size_t>(in.gcount()));
    ByteReader r(header, path.string());
    if (!r.tag_matches(kPointsMagic)) throw BadMagicError(path.string() + ": not an SNSD point file");
    const auto version = r.u16();
    if (version != kPointsVersion) {
      throw VersionMismatchError(path.string() + ": unsupported SNSD version " + std::to_string(version));
    }
    const std::size_t file_dims = r.u32();
    const std::uint64_t count = r.u64();
    if (dims != 0 && file_dims != dims) {
      throw DataError(path.string() + ": file has " + std::to_string(file_dims) + " dims, expected " +
                      std::to_string(dims));
    }
    const std::uint64_t end = std::min(row_end, count);
    if (row_begin >= end) return;
    in.seekg(static_cast<std::streamoff>(kPointsHeaderBytes + row_begin * file_dims * 4));
    std::vector<std::uint8_t> buf(file_dims * 4);
    std::vector<double> coords(file_dims);
    for (std::uint64_t row = row_begin; row < end; ++row) {
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
      if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
        throw TruncatedError(path.string() + ": truncated at row " + std::to_string(row));
      }
      ByteReader rr(buf, path.string());
      for (auto& c : coords) c = rr.f32();
      fn(row, coords);
    }
    return;
  }

  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::vector<double> coords;
  std::uint64_t row = 0;
  std::uint64_t line_no = 0;
  bool first = true;
  while (row < row_end && std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const bool numeric = detail::parse_csv_numbers(trimmed, coords);
    if (first) {
      first = false;
      if (!numeric) continue;  // header
    }
    if (!numeric) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " (line " + std::to_string(line_no) +
                      ") is not numeric");
    }
    if (dims == 0) dims = coords.size();
    if (coords.size() != dims) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(coords.size()) +
                      " columns, expected " + std::to_string(dims));
    }
    if (row >= row_begin) fn(row, coords);
    ++row;
  }
}

inline PointFileInfo probe_points(const std::filesystem::path& path, PointFormat format) {
  PointFileInfo info;
  if (format == PointFormat::binary) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> header(kPointsHeaderBytes);
    in.read(reinterpret_cast<char*>(header.data()), static_cast<std::streamsize>(header.size()));
    header.resize(static_cast<std::size_t>(in.gcount()));
    ByteReader r(header, path.string());
    if (!r.tag_matches(kPointsMagic)) throw BadMagicError(path.string() + ": not an SNSD point file");
    if (r.u16() != kPointsVersion) throw VersionMismatchError(path.string() + ": unsupported SNSD version");
    info.dims = r.u32();
    info.rows = r.u64();
    const auto expected = kPointsHeaderBytes + info.rows * info.dims * 4;
    if (std::filesystem::file_size(path) < expected) throw TruncatedError(path.string() + ": payload truncated");
    return info;
  }
  for_each_point(path, format, 0, 0, UINT64_MAX, [&](std::uint64_t, std::span<const double> p) {
    info.dims = p.size();
    ++info.rows;
  });
  return info;
}

inline std::vector<std::vector<double>> read_points(const std::filesystem::path& path, PointFormat format,
                                                    std::size_t dims = 0) {
  std::vector<std::vector<double>> out;
  for_each_point(path, format, dims, 0, UINT64_MAX,
                 [&](std::uint64_t, std::span<const double> p) { out.emplace_back(p.begin(), p.end()); });
  return out;
}

inline void write_points_binary(const std::filesystem::path& path, std::size_t dims,
                                const std::vector<std::vector<double>>& points) {
  ByteWriter w;
  w.tag(kPointsMagic);
  w.u16(kPointsVersion);
  w.u32(static_cast<std::uint32_t>(dims));
  w.u64(points.size());
  for (const auto& p : points) {
    if (p.size() != dims) throw UsageError("point dimension mismatch while writing " + path.string());
    for (double x : p) w.f32(static_cast<float>(x));
  }
  AtomicFile f(path);
  f.write(w.buffer());
  f.commit();
}

inline void write_points_csv(const std::filesystem::path& path, std::size_t dims,
                             const std::vector<std::vector<double>>& points, bool header = true) {
  AtomicFile f(path);
  auto& out = f.stream();
  if (header) {
    for (std::size_t d = 0; d < dims; ++d) out << (d ? ",x" : "x") << d;
    out << '\n';
  }
  for (const auto& p : points) {
    if (p.size() != dims) throw UsageError("point dimension mismatch while writing " + path.string());
    for (std::size_t d = 0; d < dims; ++d) out << (d ? "," : "") << format_double(p[d]);
    out << '\n';
  }
  f.commit();
}

}  // namespace sns
