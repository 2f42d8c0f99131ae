#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "driftgate/error.hpp"

// Little-endian primitives shared by the on-disk formats.
namespace driftgate::binary {

template <typename U>
void put_le(std::ostream& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(bytes, sizeof(U));
}

inline void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
inline void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_f32_array(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float v : values) put_f32(out, v);
  }
}

/// Reads from a stream while tracking the byte offset, so truncation errors
/// can say where the data ran out.
class Reader {
 public:
  Reader(std::istream& in, std::string name, std::uint64_t offset = 0)
      : in_(in), name_(std::move(name)), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    const auto got = static_cast<std::uint64_t>(in_.gcount());
    if (got != n) {
      throw FormatError(FormatError::Kind::Truncated,
                        name_ + ": truncated while reading " + what + " at byte offset " +
                            std::to_string(offset_ + got) + " (needed " + std::to_string(n) +
                            " bytes from offset " + std::to_string(offset_) + ")");
    }
    offset_ += n;
  }

  template <typename U>
  U le(const char* what) {
    unsigned char raw[sizeof(U)];
    bytes(reinterpret_cast<char*>(raw), sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(raw[i]) << (8 * i);
    return v;
  }

  std::uint32_t u32(const char* what) { return le<std::uint32_t>(what); }
  std::uint64_t u64(const char* what) { return le<std::uint64_t>(what); }
  double f64(const char* what) { return std::bit_cast<double>(le<std::uint64_t>(what)); }

  void f32_array(std::span<float> dst, const char* what) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(reinterpret_cast<char*>(dst.data()), dst.size_bytes(), what);
    } else {
      for (float& v : dst) v = std::bit_cast<float>(le<std::uint32_t>(what));
    }
  }

 private:
  std::istream& in_;
  std::string name_;
  std::uint64_t offset_;
};

}  // namespace driftgate::binary
