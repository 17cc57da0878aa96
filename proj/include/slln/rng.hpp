#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "slln/common.hpp"

namespace slln {

// Deterministic random streams.
//
// All randomness in the library flows from one 64-bit master seed through
// named streams.  A stream is derived as
//
//   state0 = master_seed XOR fnv1a64(stream_name)
//   s[k]   = splitmix64(state0), k = 0..3   (four successive outputs)
//
// and the four words seed a xoshiro256++ engine.  Replicate r of an
// experiment named "exp" draws from stream "exp/replicate-<r>"; row j of a
// noise plane draws from "<field stream>/noise-<j>".  Streams are therefore
// independent of thread scheduling, and every output is reproducible from
// (master seed, stream name) alone.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  Rng(std::uint64_t master_seed, std::string_view stream_name) {
    std::uint64_t state = master_seed ^ fnv1a64(stream_name);
    for (auto& w : s_) w = splitmix64_next(state);
    bool all_zero = true;
    for (auto w : s_) all_zero &= (w == 0);
    if (all_zero) s_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1); safe under log().
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller.  Two engine outputs per draw, no state
  // carried between calls.
  double normal() {
    double u1 = uniform_open();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double exponential() { return -std::log(uniform_open()); }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

inline std::string replicate_stream(std::string_view prefix, std::int64_t r) {
  std::string name(prefix);
  name += "/replicate-";
  name += fmt_int(r);
  return name;
}

}  // namespace slln
