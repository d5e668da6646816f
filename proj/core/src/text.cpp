#include "smoothcert/text.hpp"

#include <algorithm>
#include <cmath>

#include "smoothcert/errors.hpp"

namespace smoothcert {

namespace {

bool is_space_codepoint(char32_t cp) {
  switch (cp) {
    case U'\t':
    case U'\n':
    case U'\v':
    case U'\f':
    case U'\r':
    case U' ':
    case 0x0085:  // next line
    case 0x00A0:  // no-break space
    case 0x1680:  // ogham space mark
    case 0x2028:  // line separator
    case 0x2029:  // paragraph separator
    case 0x202F:  // narrow no-break space
    case 0x205F:  // medium mathematical space
    case 0x3000:  // ideographic space
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;  // en quad .. hair space
  }
}

// Decodes one UTF-8 code point at `i`; malformed bytes are passed through
// as single code units so tokenization never fails.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const unsigned char c0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 1;
  char32_t cp = c0;
  if (c0 >= 0xF0)
    len = 4, cp = c0 & 0x07u;
  else if (c0 >= 0xE0)
    len = 3, cp = c0 & 0x0Fu;
  else if (c0 >= 0xC0)
    len = 2, cp = c0 & 0x1Fu;
  if (len > 1) {
    if (i + len > s.size()) {
      ++i;
      return c0;
    }
    for (std::size_t j = 1; j < len; ++j) {
      const unsigned char cj = static_cast<unsigned char>(s[i + j]);
      if ((cj & 0xC0u) != 0x80u) {
        ++i;
        return c0;
      }
      cp = (cp << 6) | (cj & 0x3Fu);
    }
  }
  i += len;
  return cp;
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = decode_utf8(text, i);
    if (is_space_codepoint(cp)) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
      continue;
    }
    for (std::size_t j = start; j < i; ++j) {
      char c = text[j];
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string detokenize(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::size_t retain_count(std::size_t h, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw ParameterError("mask ratio must lie in [0, 1], got " +
                         std::to_string(rho));
  const double k = std::floor((1.0 - rho) * static_cast<double>(h) + 0.5);
  if (k <= 0.0) return 0;
  const auto ki = static_cast<std::size_t>(k);
  return std::min(ki, h);
}

bool MaskPattern::retains(std::size_t pos) const {
  return std::binary_search(retained.begin(), retained.end(), pos);
}

MaskPattern sample_mask_pattern(std::size_t h, std::size_t k, RngStream& rng) {
  if (k > h)
    throw ParameterError("retained count " + std::to_string(k) +
                         " exceeds position count " + std::to_string(h));
  MaskPattern pattern;
  pattern.total = h;
  pattern.retained.reserve(k);
  std::vector<bool> member(h, false);
  // Floyd's uniform k-subset sampling.
  for (std::size_t j = h - k; j < h; ++j) {
    const auto t = static_cast<std::size_t>(rng.next_below(j + 1));
    if (member[t]) {
      member[j] = true;
      pattern.retained.push_back(j);
    } else {
      member[t] = true;
      pattern.retained.push_back(t);
    }
  }
  std::sort(pattern.retained.begin(), pattern.retained.end());
  return pattern;
}

TokenSeq apply_mask(const TokenSeq& x, const MaskPattern& pattern) {
  if (pattern.total != x.size())
    throw ContractError("mask pattern covers " + std::to_string(pattern.total) +
                        " positions but input has " + std::to_string(x.size()));
  TokenSeq out(x.size(), std::string(kMaskToken));
  for (std::size_t pos : pattern.retained) out[pos] = x[pos];
  return out;
}

std::uint64_t count_mask_patterns(std::size_t h, std::size_t k) {
  if (k > h) return 0;
  k = std::min(k, h - k);
  unsigned __int128 acc = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    acc = acc * (h - k + i) / i;  // exact at every step
    if (acc > static_cast<unsigned __int128>(kBinomialOverflow - 1))
      return kBinomialOverflow;
  }
  return static_cast<std::uint64_t>(acc);
}

MaskPatternEnumerator::MaskPatternEnumerator(std::size_t h, std::size_t k,
                                             std::uint64_t cap)
    : h_(h), k_(k), total_(count_mask_patterns(h, k)) {
  if (k > h)
    throw ParameterError("retained count " + std::to_string(k) +
                         " exceeds position count " + std::to_string(h));
  if (total_ == kBinomialOverflow || total_ > cap)
    throw CapacityError("C(" + std::to_string(h) + ", " + std::to_string(k) +
                        ") exceeds the enumeration cap of " +
                        std::to_string(cap));
  cursor_.resize(k);
  for (std::size_t i = 0; i < k; ++i) cursor_[i] = i;
}

bool MaskPatternEnumerator::next(MaskPattern& out) {
  if (done_) return false;
  out.total = h_;
  out.retained = cursor_;
  if (k_ == 0) {
    done_ = true;
    return true;
  }
  // Advance to the next k-subset in lexicographic order.
  std::size_t i = k_;
  while (i > 0) {
    --i;
    if (cursor_[i] < h_ - k_ + i) {
      ++cursor_[i];
      for (std::size_t j = i + 1; j < k_; ++j) cursor_[j] = cursor_[j - 1] + 1;
      return true;
    }
  }
  done_ = true;
  return true;
}

}  // namespace smoothcert
