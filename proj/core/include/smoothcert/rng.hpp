#pragma once

#include <cstdint>
#include <string_view>

namespace smoothcert {

// Counter-free deterministic random stream (splitmix64). Streams are cheap
// value types; every consumer owns its stream, so nothing is shared between
// threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64();

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit();

  // Uniform integer in [0, bound) without modulo bias. bound must be >= 1.
  std::uint64_t next_below(std::uint64_t bound);

  // UniformRandomBitGenerator interface.
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ull; }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t state_;
};

// Hierarchical stream key: streams are derived from (seed, purpose label,
// index...), so a sample's randomness depends only on its address in the
// experiment, never on scheduling order. Replaying with the same seed gives
// bit-identical draws under any parallelism.
class RngSeq {
 public:
  explicit RngSeq(std::uint64_t seed);

  RngSeq child(std::string_view label) const;
  RngSeq child(std::uint64_t index) const;

  RngStream stream() const { return RngStream(key_); }
  std::uint64_t key() const { return key_; }

 private:
  explicit RngSeq(std::uint64_t key, int) : key_(key) {}
  std::uint64_t key_;
};

// Stable 64-bit FNV-1a hash of a byte string (used for key derivation and
// for deriving streams from token content).
std::uint64_t fnv1a64(std::string_view bytes);

// splitmix64 finalizer; good avalanche mixing for key derivation.
std::uint64_t mix64(std::uint64_t x);

}  // namespace smoothcert
