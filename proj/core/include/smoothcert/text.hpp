#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "smoothcert/rng.hpp"

namespace smoothcert {

// Reserved tokens. kMaskToken only ever enters a sequence through
// apply_mask; dataset ingestion rejects inputs that contain it.
inline constexpr std::string_view kMaskToken = "[MASK]";
inline constexpr std::string_view kUnknownToken = "[UNK]";

// Ordered word-token sequence; the common currency between masking,
// backends, and attacks.
using TokenSeq = std::vector<std::string>;

// Splits on Unicode whitespace (ASCII ws + the usual UTF-8 space code
// points) and lowercases ASCII letters. Empty string -> empty sequence.
TokenSeq tokenize(std::string_view text);

// Joins with single spaces. detokenize(tokenize(s)) normalizes whitespace.
std::string detokenize(const TokenSeq& tokens);

// Number of words kept visible at mask ratio `rho`: round-half-up of
// (1-rho)*h, clamped to [0, h]. Throws ParameterError if rho is outside
// [0, 1].
std::size_t retain_count(std::size_t h, double rho);

// The set of retained (visible) positions out of `total`; everything else
// is replaced by kMaskToken.
struct MaskPattern {
  std::size_t total = 0;
  std::vector<std::size_t> retained;  // sorted ascending, unique

  bool retains(std::size_t pos) const;
};

// Draws a uniform k-subset of {0..h-1} (Floyd's algorithm, so all C(h,k)
// subsets are equally likely). Throws ParameterError if k > h.
MaskPattern sample_mask_pattern(std::size_t h, std::size_t k, RngStream& rng);

// Replaces every non-retained position with kMaskToken. Length and order
// are preserved. Throws ContractError if pattern.total != x.size().
TokenSeq apply_mask(const TokenSeq& x, const MaskPattern& pattern);

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

// C(h, k), or 0 when k > h. Saturates at kBinomialOverflow when the exact
// value does not fit in 64 bits.
inline constexpr std::uint64_t kBinomialOverflow = ~0ull;
std::uint64_t count_mask_patterns(std::size_t h, std::size_t k);

// Streams all C(h,k) retained sets in lexicographic order. The constructor
// throws CapacityError when C(h,k) exceeds `cap`.
class MaskPatternEnumerator {
 public:
  MaskPatternEnumerator(std::size_t h, std::size_t k,
                        std::uint64_t cap = kDefaultEnumerationCap);

  // Fills `out` with the next pattern; returns false once exhausted.
  bool next(MaskPattern& out);

  std::uint64_t total_patterns() const { return total_; }

 private:
  std::size_t h_;
  std::size_t k_;
  std::uint64_t total_;
  std::vector<std::size_t> cursor_;
  bool done_ = false;
};

}  // namespace smoothcert
