#pragma once

// Little-endian primitives shared by the FRWT and MMEB file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "fusionrec/errors.hpp"

namespace fusionrec::binary {

template <typename U>
void write_le(std::ostream& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes, sizeof(U));
}

inline void write_f32(std::ostream& out, float value) { write_le(out, std::bit_cast<std::uint32_t>(value)); }

/// Returns false on clean EOF before the first byte; throws on a partial read.
template <typename U>
bool try_read_le(std::istream& in, U& value, const std::string& what) {
  static_assert(std::is_unsigned_v<U>);
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got == 0) return false;
  if (got != sizeof(U)) throw DataError("truncated file while reading " + what);
  value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return true;
}

template <typename U>
U read_le(std::istream& in, const std::string& what) {
  U value{};
  if (!try_read_le(in, value, what)) throw DataError("truncated file while reading " + what);
  return value;
}

inline float read_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

}  // namespace fusionrec::binary
