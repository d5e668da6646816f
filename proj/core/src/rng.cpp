#include "smoothcert/rng.hpp"

namespace smoothcert {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ull;
}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t RngStream::next_u64() {
  state_ += kGoldenGamma;
  return mix64(state_);
}

double RngStream::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t bound) {
  // Rejection sampling over the largest multiple of bound below 2^64.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

RngSeq::RngSeq(std::uint64_t seed) : key_(mix64(seed + kGoldenGamma)) {}

RngSeq RngSeq::child(std::string_view label) const {
  return RngSeq(mix64(key_ ^ fnv1a64(label)), 0);
}

RngSeq RngSeq::child(std::uint64_t index) const {
  return RngSeq(mix64(key_ ^ mix64(index + kGoldenGamma)), 0);
}

}  // namespace smoothcert
