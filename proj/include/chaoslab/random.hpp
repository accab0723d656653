#ifndef CHAOSLAB_RANDOM_HPP
#define CHAOSLAB_RANDOM_HPP

// Counter-based Gaussian sampling. Every coordinate is a pure function of
// (seed, stream, coordinate index), so any partition of the work across
// threads reproduces the same numbers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "chaoslab/filtered_space.hpp"

namespace chaoslab {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter encrypt(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

namespace detail {

// Open interval (0,1) from 53 random bits.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace detail

/// Pair of standard normals for block `block` of stream `stream`.
inline std::array<double, 2> normal_pair(std::uint64_t seed, std::uint64_t stream,
                                         std::uint64_t block) noexcept {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block),
                                static_cast<std::uint32_t>(block >> 32),
                                static_cast<std::uint32_t>(stream),
                                static_cast<std::uint32_t>(stream >> 32)};
  const auto r = Philox4x32::encrypt(ctr, key);
  const double u1 = detail::to_unit(r[0], r[1]);
  const double u2 = detail::to_unit(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

/// Streams for Monte-Carlo sample `index` of experiment `tag`.
constexpr std::uint64_t derive_stream(std::uint64_t tag, std::uint64_t index) noexcept {
  return (tag << 40) ^ index;
}

/// One realization of the isonormal process in coordinates: z_i = X(e_i).
struct GaussianSample {
  std::vector<double> z;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  std::size_t dim() const noexcept { return z.size(); }
  double operator[](std::size_t i) const { return z[i]; }
};

inline GaussianSample sample(std::size_t dim, std::uint64_t seed, std::uint64_t stream) {
  GaussianSample s{std::vector<double>(dim), seed, stream};
  for (std::size_t block = 0; 2 * block < dim; ++block) {
    const auto pair = normal_pair(seed, stream, block);
    s.z[2 * block] = pair[0];
    if (2 * block + 1 < dim) s.z[2 * block + 1] = pair[1];
  }
  return s;
}

inline GaussianSample sample(const FilteredBasis& basis, std::uint64_t seed,
                             std::uint64_t stream) {
  return sample(basis.dim(), seed, stream);
}

/// Sequential draws from one (seed, stream) pair, for building random test
/// instances. Each Philox block yields four 32-bit words.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint32_t next_u32() {
    if (used_ == 4) {
      const Philox4x32::Key key{static_cast<std::uint32_t>(seed_),
                                static_cast<std::uint32_t>(seed_ >> 32)};
      buf_ = Philox4x32::encrypt({static_cast<std::uint32_t>(block_),
                                  static_cast<std::uint32_t>(block_ >> 32),
                                  static_cast<std::uint32_t>(stream_),
                                  static_cast<std::uint32_t>(stream_ >> 32) ^ 0x80000000u},
                                 key);
      ++block_;
      used_ = 0;
    }
    return buf_[used_++];
  }

  /// Uniform on (0,1).
  double uniform() {
    const std::uint32_t hi = next_u32();
    return detail::to_unit(hi, next_u32());
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
  }

  double normal() {
    const double rad = std::sqrt(-2.0 * std::log(uniform()));
    return rad * std::cos(2.0 * std::numbers::pi * uniform());
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  Philox4x32::Counter buf_{};
  int used_ = 4;
};

}  // namespace chaoslab

#endif  // CHAOSLAB_RANDOM_HPP
