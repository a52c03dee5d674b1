#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace dcftp {

/// SplitMix64 finalizer. Used both as a seed expander for xoshiro and as the
/// hash that derives independent per-slot streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream key for (seed, index, slot):
///   key = splitmix64(splitmix64(splitmix64(seed) + index) + slot)
/// where index is reinterpreted as uint64 (two's complement).
constexpr std::uint64_t stream_key(std::uint64_t seed, std::int64_t index,
                                   std::uint64_t slot) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) + static_cast<std::uint64_t>(index)) + slot);
}

/// Replica seeds are derived, never sequential.
constexpr std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) noexcept {
  return splitmix64(splitmix64(master ^ 0x5851f42d4c957f2dULL) + replica);
}

/// xoshiro256++ (Blackman & Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t x = seed;
    for (auto& s : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      s = z ^ (z >> 31);
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0,1) with 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  const std::array<std::uint64_t, 4>& state() const noexcept { return state_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
};

/// A generator bound to one (seed, index, slot) key.
inline Xoshiro256pp slot_stream(std::uint64_t seed, std::int64_t index, std::uint64_t slot) {
  return Xoshiro256pp(stream_key(seed, index, slot));
}

}  // namespace dcftp
