#include "gsvin/binio.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <iterator>

#include "gsvin/errors.hpp"

namespace gsvin {

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void ByteWriter::u16(std::uint16_t v) {
  for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s);
}

std::uint64_t ByteReader::uint(std::size_t width) {
  if (remaining() < width) throw FormatError("unexpected end of file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
  }
  pos_ += width;
  return v;
}

std::uint8_t ByteReader::u8() { return static_cast<std::uint8_t>(uint(1)); }
std::uint16_t ByteReader::u16() { return static_cast<std::uint16_t>(uint(2)); }
std::uint32_t ByteReader::u32() { return static_cast<std::uint32_t>(uint(4)); }
std::uint64_t ByteReader::u64() { return uint(8); }
double ByteReader::f64() { return std::bit_cast<double>(uint(8)); }

std::string_view ByteReader::raw(std::size_t n) {
  if (remaining() < n) throw FormatError("unexpected end of file");
  const std::string_view out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  return std::string(raw(n));
}

std::string_view checked_payload(std::string_view file_bytes) {
  if (file_bytes.size() < 4) throw FormatError("file too short for checksum");
  const std::string_view payload = file_bytes.substr(0, file_bytes.size() - 4);
  ByteReader trailer(file_bytes.substr(file_bytes.size() - 4));
  if (trailer.u32() != crc32_of(payload)) throw FormatError("checksum mismatch");
  return payload;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace gsvin
