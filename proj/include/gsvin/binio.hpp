#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace gsvin {

/// CRC-32 (IEEE, as in zlib/PNG) of a byte range.
std::uint32_t crc32_of(std::string_view bytes);

/// Appends little-endian primitives to a byte buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void raw(std::string_view bytes) { buf_.append(bytes); }
  /// u32 length followed by the bytes.
  void str(std::string_view s);
  /// Appends the CRC-32 of everything written so far.
  void seal() { u32(crc32_of(buf_)); }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked little-endian reader; throws FormatError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string_view raw(std::size_t n);
  std::string str();

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint64_t uint(std::size_t width);
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

/// Verifies and strips a trailing CRC-32 over the preceding bytes. Throws FormatError on mismatch.
std::string_view checked_payload(std::string_view file_bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace gsvin
