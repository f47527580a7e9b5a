#pragma once

// Little-endian primitive readers/writers for the binary file formats
// (feature sequences, checkpoints). The build targets little-endian hosts;
// the static_assert below is the honest guard.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "talksplat/common.hpp"

namespace talksplat::bytesio {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  check(static_cast<bool>(is), "bytesio: unexpected end of stream");
  return v;
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_raw(os, v); }
inline void write_u64(std::ostream& os, std::uint64_t v) { write_raw(os, v); }
inline void write_i64(std::ostream& os, std::int64_t v) { write_raw(os, v); }
inline void write_f64(std::ostream& os, double v) { write_raw(os, v); }
inline std::uint32_t read_u32(std::istream& is) { return read_raw<std::uint32_t>(is); }
inline std::uint64_t read_u64(std::istream& is) { return read_raw<std::uint64_t>(is); }
inline std::int64_t read_i64(std::istream& is) { return read_raw<std::int64_t>(is); }
inline double read_f64(std::istream& is) { return read_raw<double>(is); }

inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  const auto n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  check(static_cast<bool>(is), "bytesio: unexpected end of stream in string");
  return s;
}

inline void write_f64_vec(std::ostream& os, const std::vector<double>& v) {
  write_u64(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_f64_vec(std::istream& is) {
  const auto n = read_u64(is);
  std::vector<double> v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  check(static_cast<bool>(is), "bytesio: unexpected end of stream in array");
  return v;
}

inline void write_i32_vec(std::ostream& os, const std::vector<int>& v) {
  write_u64(os, v.size());
  for (int x : v) write_raw(os, static_cast<std::int32_t>(x));
}

inline std::vector<int> read_i32_vec(std::istream& is) {
  const auto n = read_u64(is);
  std::vector<int> v(n);
  for (auto& x : v) x = read_raw<std::int32_t>(is);
  return v;
}

}  // namespace talksplat::bytesio
