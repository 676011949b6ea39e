#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace uqmc {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Philox4x32-10 block function (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

}  // namespace detail

/// Generator for the draws belonging to one logical sample.
///
/// The stream of numbers is a pure function of (seed, stream_id, counter);
/// successive calls walk an inner block index, so a sample may consume any
/// number of uniforms without touching its neighbours.
class SampleRng {
 public:
  SampleRng(std::uint64_t key, std::uint64_t counter) : counter_(counter) {
    key_ = {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
  }

  std::uint64_t next_u64() {
    if (buffered_ == 0) refill();
    --buffered_;
    return buffer_[buffered_];
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  /// Index in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  void refill() {
    const auto out = detail::philox4x32(
        {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
         static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32)},
        key_);
    ++block_;
    buffer_[0] = (std::uint64_t{out[0]} << 32) | out[1];
    buffer_[1] = (std::uint64_t{out[2]} << 32) | out[3];
    buffered_ = 2;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint64_t counter_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Counter-based, splittable random stream.
///
/// Logical sample i of a stream draws from `at(i)`, which depends only on
/// (seed, stream_id, counter + i). Results are therefore independent of the
/// order and thread on which samples are produced.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t counter = 0;

  SampleRng at(std::uint64_t i) const {
    const std::uint64_t key = detail::splitmix64(seed ^ detail::splitmix64(stream_id));
    return SampleRng(key, counter + i);
  }

  /// Stream with the same seed and a derived, statistically unrelated id.
  RngStream substream(std::uint64_t tag) const {
    return {seed, detail::splitmix64(stream_id ^ detail::splitmix64(tag + 0x632BE59BD9B4E019ULL)),
            0};
  }

  /// Stream whose id is offset by `offset` (levels, chains, ...).
  RngStream with_offset(std::uint64_t offset) const { return {seed, stream_id + offset, counter}; }

  RngStream advanced(std::uint64_t n) const { return {seed, stream_id, counter + n}; }

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

/// Tags for streams derived inside estimators.
namespace stream_tag {
inline constexpr std::uint64_t pilot = 0x70696c6f74ULL;
inline constexpr std::uint64_t main = 0x6d61696eULL;
inline constexpr std::uint64_t mcmc = 0x6d636d63ULL;
inline constexpr std::uint64_t evidence = 0x65766964ULL;
inline constexpr std::uint64_t ensemble = 0x656e73ULL;
inline constexpr std::uint64_t proposal = 0x70726f70ULL;
}  // namespace stream_tag

}  // namespace uqmc
