#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace talksplat {

[[noreturn]] inline void fail(const std::string& msg) {
  throw std::runtime_error(msg);
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) fail(msg);
}

// Variadic ostream-based formatter for error messages and logs.
template <typename... Args>
std::string strcat_(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

// FNV-1a over raw bytes; used for mesh identity in checkpoints and the
// frozen-attribute assertions in alternating training.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace talksplat
