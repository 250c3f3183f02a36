#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sgc {

// All file formats are little-endian regardless of host byte order.

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
    throw IoError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace detail

inline void write_u32(std::ostream& out, std::uint32_t v) { detail::write_le(out, v); }
inline void write_u64(std::ostream& out, std::uint64_t v) { detail::write_le(out, v); }
inline void write_f32(std::ostream& out, float v) { detail::write_le(out, v); }
inline void write_f64(std::ostream& out, double v) { detail::write_le(out, v); }

inline std::uint32_t read_u32(std::istream& in) { return detail::read_le<std::uint32_t>(in); }
inline std::uint64_t read_u64(std::istream& in) { return detail::read_le<std::uint64_t>(in); }
inline float read_f32(std::istream& in) { return detail::read_le<float>(in); }
inline double read_f64(std::istream& in) { return detail::read_le<double>(in); }

// Length-prefixed UTF-8 string (u32 byte count).
inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n)) throw IoError("unexpected end of file");
  return s;
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* what) {
  char buf[4];
  in.read(buf, 4);
  if (in.gcount() != 4 || std::memcmp(buf, magic, 4) != 0)
    throw IoError(std::string("bad magic: not a ") + what + " file");
}

}  // namespace sgc
