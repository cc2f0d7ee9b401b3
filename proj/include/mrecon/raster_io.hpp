#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "mrecon/error.hpp"
#include "mrecon/raster.hpp"

namespace mrecon {

// Raster file layout, all integers little-endian:
//
//   offset  size  field
//   0       4     magic "R3RB"
//   4       4     u32 height
//   8       4     u32 width
//   12      4     u32 channels
//   16      4     u32 dtype tag (1 = f32, 2 = f64, 3 = u8)
//   20      ...   payload, row-major, channel fastest, little-endian

enum class DType : std::uint32_t { F32 = 1, F64 = 2, U8 = 3 };

inline constexpr std::array<char, 4> kRasterMagic = {'R', '3', 'R', 'B'};
inline constexpr std::size_t kRasterHeaderSize = 20;

inline std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
  }
  return 0;
}

struct RasterHeader {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  DType dtype = DType::F32;
};

namespace detail {

inline void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}
inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

inline std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

template <typename T>
std::vector<char> encode(const Raster<T>& raster, DType dtype) {
  std::vector<char> out;
  out.reserve(kRasterHeaderSize + raster.size() * dtype_size(dtype));
  out.insert(out.end(), kRasterMagic.begin(), kRasterMagic.end());
  put_u32(out, static_cast<std::uint32_t>(raster.height()));
  put_u32(out, static_cast<std::uint32_t>(raster.width()));
  put_u32(out, static_cast<std::uint32_t>(raster.channels()));
  put_u32(out, static_cast<std::uint32_t>(dtype));
  for (const T& v : raster.data()) {
    switch (dtype) {
      case DType::F32: put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); break;
      case DType::F64: put_u64(out, std::bit_cast<std::uint64_t>(static_cast<double>(v))); break;
      case DType::U8: out.push_back(static_cast<char>(static_cast<std::uint8_t>(v))); break;
    }
  }
  return out;
}

}  // namespace detail

inline RasterHeader parse_raster_header(const std::vector<char>& bytes, const std::string& path) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kRasterMagic.data(), 4) != 0) {
    if (bytes.size() < 4) throw TruncatedFile(path, bytes.size(), kRasterHeaderSize);
    throw BadMagic(path);
  }
  if (bytes.size() < kRasterHeaderSize) throw TruncatedFile(path, bytes.size(), kRasterHeaderSize);
  RasterHeader h;
  h.height = detail::get_u32(bytes.data() + 4);
  h.width = detail::get_u32(bytes.data() + 8);
  h.channels = detail::get_u32(bytes.data() + 12);
  const std::uint32_t tag = detail::get_u32(bytes.data() + 16);
  if (tag < 1 || tag > 3) throw MalformedHeader("unknown dtype tag " + std::to_string(tag) + " in " + path);
  if (h.channels == 0) throw MalformedHeader("zero channels in " + path);
  h.dtype = static_cast<DType>(tag);
  return h;
}

template <typename T>
void save_raster(const std::string& path, const Raster<T>& raster, DType dtype) {
  detail::write_file(path, detail::encode(raster, dtype));
}

/// Loads a raster, converting the stored dtype to T.
template <typename T>
Raster<T> load_raster(const std::string& path, RasterHeader* header_out = nullptr) {
  const std::vector<char> bytes = detail::read_file(path);
  const RasterHeader h = parse_raster_header(bytes, path);
  const std::uint64_t count = static_cast<std::uint64_t>(h.height) * h.width * h.channels;
  const std::uint64_t expected = kRasterHeaderSize + count * dtype_size(h.dtype);
  if (bytes.size() < expected) throw TruncatedFile(path, bytes.size(), expected);
  if (bytes.size() > expected) {
    throw MalformedHeader(path + ": " + std::to_string(bytes.size() - expected) + " trailing bytes");
  }
  Raster<T> out(static_cast<int>(h.height), static_cast<int>(h.width), static_cast<int>(h.channels));
  const char* p = bytes.data() + kRasterHeaderSize;
  auto dst = out.data();
  for (std::uint64_t i = 0; i < count; ++i) {
    switch (h.dtype) {
      case DType::F32: dst[i] = static_cast<T>(std::bit_cast<float>(detail::get_u32(p + 4 * i))); break;
      case DType::F64: dst[i] = static_cast<T>(std::bit_cast<double>(detail::get_u64(p + 8 * i))); break;
      case DType::U8: dst[i] = static_cast<T>(static_cast<unsigned char>(p[i])); break;
    }
  }
  if (header_out) *header_out = h;
  return out;
}

}  // namespace mrecon
