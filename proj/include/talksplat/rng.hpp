#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "talksplat/common.hpp"

namespace talksplat {

// Deterministic RNG. mt19937_64 supplies bits (its sequence is pinned by the
// standard); the draws on top are hand-rolled because libstdc++'s
// distribution objects are not portable bit-for-bit. normal() regenerates a
// fresh Box-Muller pair every call and discards the spare, so the only state
// is the engine itself and serialization is trivial.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift map; bias is < 2^-64 per draw,
  // irrelevant next to the determinism requirement.
  std::uint64_t uniform_int(std::uint64_t n) {
    check(n > 0, "Rng::uniform_int: n must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<__uint128_t>(gen_()) * n) >> 64);
  }

  double normal() {
    // Box-Muller; 1-u keeps the log argument in (0, 1].
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::vector<double> normals(std::size_t n, double mean = 0.0,
                              double stddev = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = normal(mean, stddev);
    return v;
  }

  // Fisher-Yates over indices 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(p[i], p[j]);
    }
    return p;
  }

  // Engine state as text (mt19937_64 defines stable stream operators).
  std::string serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    check(!is.fail(), "Rng::deserialize: malformed state string");
  }

 private:
  std::mt19937_64 gen_;
};

// Stable per-purpose sub-seeding: mixes a root seed with a label so modules
// can derive independent streams without coordinating draw order.
inline std::uint64_t derive_seed(std::uint64_t root, const std::string& label) {
  return fnv1a(label.data(), label.size(), root ^ 0x9e3779b97f4a7c15ull);
}

}  // namespace talksplat
