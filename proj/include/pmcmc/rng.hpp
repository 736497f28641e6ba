#pragma once

// Counter-based, hierarchically addressed random streams.
//
// Every draw made by a filter pass or a sampler iteration is addressed by a
// StreamAddress. The generator is Philox4x32-10 keyed by the 64-bit master
// seed; an address selects a disjoint region of the 128-bit counter space:
//
//   counter word 0 : block index within the stream (incremented per block)
//   counter word 1 : (purpose << 24) | channel      (channel < 2^24)
//   counter word 2 : time index                      (< 2^32)
//   counter word 3 : particle index                  (< 2^32)
//
// Because the address is part of the counter, two distinct addresses can
// never produce overlapping blocks, and the draws an address yields do not
// depend on which other addresses were queried or in what order. Adding
// particles or time steps therefore never shifts existing draws.
//
// Uniforms take the top 53 bits of a 64-bit word assembled from two
// consecutive 32-bit outputs (low word first). Normals use Box-Muller on a
// pair of uniforms; both variates of a pair are returned in order.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pmcmc {

enum class StreamPurpose : std::uint8_t {
  dynamics_noise = 0,
  initial_state = 1,
  resampling = 2,
  momentum = 3,
  proposal = 4,
};

struct StreamAddress {
  StreamPurpose purpose = StreamPurpose::dynamics_noise;
  std::uint64_t time = 0;
  std::uint64_t particle = 0;
  std::uint32_t channel = 0;

  friend bool operator==(const StreamAddress&, const StreamAddress&) = default;
};

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

constexpr PhiloxBlock philox_round(const PhiloxBlock& c, const PhiloxKey& k) {
  const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * c[0];
  const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

}  // namespace detail

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
constexpr detail::PhiloxBlock philox4x32_10(detail::PhiloxBlock counter,
                                            detail::PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += detail::kPhiloxW0;
      key[1] += detail::kPhiloxW1;
    }
    counter = detail::philox_round(counter, key);
  }
  return counter;
}

/// Single-consumer stream over one address. Satisfies
/// UniformRandomBitGenerator so it can also feed <random> distributions.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, const StreamAddress& addr)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        counter_{0u,
                 (static_cast<std::uint32_t>(addr.purpose) << 24) |
                     (addr.channel & 0x00FFFFFFu),
                 static_cast<std::uint32_t>(addr.time),
                 static_cast<std::uint32_t>(addr.particle)} {
    if (addr.channel > 0x00FFFFFFu || addr.time > 0xFFFFFFFFu ||
        addr.particle > 0xFFFFFFFFu) {
      throw std::out_of_range("stream address component exceeds counter field");
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return block_[pos_++];
  }

  result_type operator()() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double standard_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  void refill() {
    block_ = philox4x32_10(counter_, key_);
    ++counter_[0];
    pos_ = 0;
  }

  detail::PhiloxKey key_;
  detail::PhiloxBlock counter_;
  detail::PhiloxBlock block_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Immutable after construction; safe to share between threads.
class CrnLayout {
 public:
  constexpr explicit CrnLayout(std::uint64_t master_seed) : seed_(master_seed) {}

  constexpr std::uint64_t master_seed() const { return seed_; }

  RandomStream derive(const StreamAddress& addr) const {
    return RandomStream(seed_, addr);
  }

 private:
  std::uint64_t seed_;
};

inline RandomStream derive_stream(const CrnLayout& layout,
                                  const StreamAddress& addr) {
  return layout.derive(addr);
}

inline double standard_normal(RandomStream& stream) {
  return stream.standard_normal();
}

inline double uniform01(RandomStream& stream) { return stream.uniform01(); }

/// SplitMix64 finalizer. Used to derive child seeds (e.g. a chain's filter
/// seed and sampler seed) from one user-facing seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace pmcmc
