#pragma once

#include <zlib.h>

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "hsia/errors.hpp"

namespace hsia {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

/// Little-endian append-only byte buffer.
class ByteWriter {
 public:
  void put_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void put_u8(std::uint8_t v) { bytes_.push_back(v); }
  void put_u16(std::uint16_t v) { put_bytes(&v, sizeof v); }
  void put_u32(std::uint32_t v) { put_bytes(&v, sizeof v); }
  void put_f32s(std::span<const float> v) { put_bytes(v.data(), v.size_bytes()); }
  void put_u16s(std::span<const std::uint16_t> v) { put_bytes(v.data(), v.size_bytes()); }
  void put_checksum() { put_u32(crc32_of(bytes_)); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; every failure reports its offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void get_bytes(void* out, std::size_t n, const char* what) {
    if (remaining() < n) throw FormatError(std::string("truncated file while reading ") + what, pos_);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t get_u8(const char* what) {
    std::uint8_t v;
    get_bytes(&v, sizeof v, what);
    return v;
  }
  std::uint16_t get_u16(const char* what) {
    std::uint16_t v;
    get_bytes(&v, sizeof v, what);
    return v;
  }
  std::uint32_t get_u32(const char* what) {
    std::uint32_t v;
    get_bytes(&v, sizeof v, what);
    return v;
  }
  void get_f32s(std::span<float> out, const char* what) { get_bytes(out.data(), out.size_bytes(), what); }
  void get_u16s(std::span<std::uint16_t> out, const char* what) { get_bytes(out.data(), out.size_bytes(), what); }

  void expect_magic(const char (&magic)[5]) {
    char got[4];
    get_bytes(got, 4, "magic");
    if (std::memcmp(got, magic, 4) != 0) throw FormatError(std::string("bad magic, expected ") + magic, 0);
  }

  /// Reads the trailing CRC-32 and checks it against everything before it.
  void expect_checksum() {
    const std::size_t payload_end = pos_;
    const std::uint32_t stored = get_u32("checksum");
    if (stored != crc32_of(bytes_.first(payload_end))) throw FormatError("checksum mismatch", payload_end);
    if (remaining() != 0) throw FormatError("trailing bytes after checksum", pos_);
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to " + path + " failed");
}

}  // namespace hsia
