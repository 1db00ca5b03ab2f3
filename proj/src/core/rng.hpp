#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace facebb {

// Seeded standard-normal stream used for toy embedder weights. The scheme is
// fixed so that external implementations can reproduce it bit for bit (see
// docs/toy_embedder.md):
//
//   state_{k+1} = state_k * 6364136223846793005 + 1442695040888963407  (mod 2^64)
//   u           = ((state_{k+1} >> 11) + 0.5) / 2^53                  in (0, 1)
//   z0, z1      = sqrt(-2 ln u1) * (cos(2 pi u2), sin(2 pi u2))
//
// The initial state is the seed itself. Normals are emitted in pairs, z0 first.
class LcgNormalStream {
 public:
  explicit LcgNormalStream(std::uint64_t seed) noexcept : state_(seed) {}

  double next_uniform() noexcept {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return (static_cast<double>(state_ >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  return splitmix64(seed ^ splitmix64(salt));
}

// FNV-1a; stable across platforms, used to fold names into seeds.
inline std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace facebb
