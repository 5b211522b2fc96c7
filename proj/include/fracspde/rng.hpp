#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fracspde {

//! Identifies one independent random stream: (master seed, replicate, step)
//! plus a purpose tag so that e.g. noise and bootstrap draws never overlap.
struct SeedPath
{
  std::uint64_t master_seed = 0;
  std::uint64_t replicate_id = 0;
  std::uint64_t step_id = 0;
  std::uint32_t purpose = 0;

  bool operator==(const SeedPath&) const = default;
};

namespace stream_purpose {
inline constexpr std::uint32_t noise = 0;
inline constexpr std::uint32_t bootstrap = 1;
inline constexpr std::uint32_t initial_condition = 2;
inline constexpr std::uint32_t test = 7;
} // namespace stream_purpose

//! Counter-based generator (Philox4x32-10, Salmon et al. 2011).
//!
//! Stream derivation: key = splitmix64(master_seed ^ splitmix64(purpose)),
//! counter words c2 = low 32 bits of step_id, c3 = low 32 bits of
//! replicate_id, (c0, c1) = 64-bit block index within the stream. The higher
//! 32 bits of step/replicate ids are folded into the key. Every block yields
//! four 32-bit outputs. The output is a pure function of the SeedPath and the
//! draw position, so replicates can be generated in any order or on any
//! thread with bit-identical results.
class CounterRng
{
public:
  using result_type = std::uint64_t;

  explicit CounterRng(const SeedPath& path)
  {
    std::uint64_t k = splitmix64(path.master_seed ^ splitmix64(0x9e3779b97f4a7c15ULL + path.purpose));
    k ^= splitmix64((path.step_id >> 32) * 0xd1b54a32d192ed03ULL + (path.replicate_id >> 32));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    c2_ = static_cast<std::uint32_t>(path.step_id);
    c3_ = static_cast<std::uint32_t>(path.replicate_id);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()()
  {
    if (pos_ >= 4) {
      refill();
      pos_ = 0;
    }
    const std::uint64_t hi = buffer_[pos_];
    const std::uint64_t lo = buffer_[pos_ + 1];
    pos_ += 2;
    return (hi << 32) | lo;
  }

  //! Uniform on (0, 1], 53-bit resolution.
  double uniform_open0()
  {
    return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
  }

  //! Uniform on [0, 1).
  double uniform()
  {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  //! Standard normal via Box-Muller; the second deviate of each pair is cached.
  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open0();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  //! One Philox4x32 block with 10 rounds.
  static std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                    std::array<std::uint32_t, 2> key)
  {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9;
        key[1] += 0xBB67AE85;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

  static std::uint64_t splitmix64(std::uint64_t x)
  {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

private:
  void refill()
  {
    buffer_ = philox4x32_10({static_cast<std::uint32_t>(block_),
                             static_cast<std::uint32_t>(block_ >> 32), c2_, c3_},
                            key_);
    ++block_;
  }

  std::array<std::uint32_t, 2> key_{};
  std::uint32_t c2_ = 0;
  std::uint32_t c3_ = 0;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

} // namespace fracspde
