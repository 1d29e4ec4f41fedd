#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qdyn/errors.hpp"
#include "qdyn/rational.hpp"

namespace qdyn::encoding {

/// Ordered set of single-character symbols. Declaration order is the
/// default digit order; a tape alphabet additionally designates its blank.
class Alphabet {
 public:
  explicit Alphabet(std::string_view symbols, std::optional<char> blank = std::nullopt)
      : symbols_(symbols.begin(), symbols.end()), blank_(blank) {
    if (symbols_.empty()) throw EncodingError("alphabet must contain at least one symbol");
    index_.fill(-1);
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      unsigned char c = static_cast<unsigned char>(symbols_[i]);
      if (index_[c] != -1)
        throw EncodingError(std::string("duplicate symbol '") + symbols_[i] + "' in alphabet");
      index_[c] = static_cast<int>(i);
    }
    if (blank_ && !contains(*blank_))
      throw EncodingError(std::string("blank '") + *blank_ + "' not in alphabet");
  }

  std::size_t size() const { return symbols_.size(); }
  const std::vector<char>& symbols() const { return symbols_; }
  char symbol_at(std::size_t i) const { return symbols_.at(i); }
  std::optional<char> blank() const { return blank_; }

  bool contains(char c) const { return index_[static_cast<unsigned char>(c)] != -1; }

  std::optional<std::size_t> index_of(char c) const {
    int i = index_[static_cast<unsigned char>(c)];
    if (i < 0) return std::nullopt;
    return static_cast<std::size_t>(i);
  }

  friend bool operator==(const Alphabet& a, const Alphabet& b) {
    return a.symbols_ == b.symbols_ && a.blank_ == b.blank_;
  }

 private:
  std::vector<char> symbols_;
  std::optional<char> blank_;
  std::array<int, 256> index_{};
};

/// One-one, onto map symbol -> {0, ..., b-1}. The default assigns digit i
/// to the i-th declared symbol, which keeps runs reproducible; any
/// permutation of the digits can be supplied instead.
class GodelMap {
 public:
  explicit GodelMap(Alphabet alphabet)
      : alphabet_(std::move(alphabet)), digit_of_(alphabet_.size()), symbol_of_(alphabet_.size()) {
    for (std::size_t i = 0; i < alphabet_.size(); ++i) {
      digit_of_[i] = i;
      symbol_of_[i] = alphabet_.symbol_at(i);
    }
  }

  GodelMap(Alphabet alphabet, const std::vector<std::size_t>& digit_of_symbol)
      : alphabet_(std::move(alphabet)),
        digit_of_(digit_of_symbol),
        symbol_of_(alphabet_.size(), '\0') {
    if (digit_of_.size() != alphabet_.size())
      throw EncodingError("digit assignment size does not match alphabet size");
    std::vector<bool> seen(alphabet_.size(), false);
    for (std::size_t i = 0; i < digit_of_.size(); ++i) {
      std::size_t d = digit_of_[i];
      if (d >= alphabet_.size() || seen[d])
        throw EncodingError("digit assignment is not a bijection onto {0..b-1}");
      seen[d] = true;
      symbol_of_[d] = alphabet_.symbol_at(i);
    }
  }

  const Alphabet& alphabet() const { return alphabet_; }
  std::size_t base() const { return alphabet_.size(); }

  std::size_t digit(char symbol) const {
    auto i = alphabet_.index_of(symbol);
    if (!i) throw EncodingError(std::string("symbol '") + symbol + "' not in alphabet");
    return digit_of_[*i];
  }

  char symbol(std::size_t digit) const {
    if (digit >= symbol_of_.size())
      throw EncodingError("digit " + std::to_string(digit) + " out of range for base " +
                          std::to_string(base()));
    return symbol_of_[digit];
  }

 private:
  Alphabet alphabet_;
  std::vector<std::size_t> digit_of_;  // by symbol position
  std::vector<char> symbol_of_;        // by digit
};

/// A rational in [0,1] together with the base and original string length.
/// The length is what makes the inverse mapping well-defined: reduction to
/// lowest terms erases leading zero digits.
struct Encoding {
  Rational value;
  std::size_t length = 0;
  std::size_t base = 2;

  Encoding() = default;
  Encoding(Rational v, std::size_t len, std::size_t b) : value(std::move(v)), length(len), base(b) {
    if (b < 1) throw EncodingError("encoding base must be >= 1");
    if (value < 0 || value > 1) throw EncodingError("encoding value outside [0,1]");
    Rational scaled = value * Rational(ipow(Integer(b), len));
    if (!scaled.is_integer() || scaled.num() < 0 || scaled.num() >= ipow(Integer(b), len))
      throw EncodingError("value * base^length is not an integer in [0, base^length)");
  }

  friend bool operator==(const Encoding& a, const Encoding& b) {
    return a.value == b.value && a.length == b.length && a.base == b.base;
  }
  friend bool operator!=(const Encoding& a, const Encoding& b) { return !(a == b); }
};

/// I_w = sum g(w_k) * b^k where the string reads w_{n-1} ... w_0, i.e. the
/// leftmost character is the most significant digit.
inline Integer godelize(std::string_view w, const GodelMap& g) {
  if (w.empty()) throw EncodingError("cannot godelize the empty string");
  Integer acc = 0;
  Integer b(static_cast<unsigned>(g.base()));
  for (char c : w) acc = acc * b + Integer(static_cast<unsigned>(g.digit(c)));
  return acc;
}

/// x = G(w) / b^n, the string placed in [0,1] as 0.w_{n-1}...w_0.
inline Encoding rationalize(std::string_view w, const GodelMap& g) {
  Integer numerator = godelize(w, g);
  Integer denominator = ipow(Integer(static_cast<unsigned>(g.base())), w.size());
  return Encoding(Rational(numerator, denominator), w.size(), g.base());
}

/// Inverse of rationalize: recovers the unique string of e.length symbols.
inline std::string derationalize(const Encoding& e, const GodelMap& g) {
  if (e.base != g.base())
    throw EncodingError("encoding base " + std::to_string(e.base) +
                        " does not match map base " + std::to_string(g.base()));
  Integer b(static_cast<unsigned>(g.base()));
  Rational scaled = e.value * Rational(ipow(b, e.length));
  if (!scaled.is_integer())
    throw EncodingError("value * base^length is not an integer; not a valid encoding");
  Integer rem = scaled.num();
  if (rem < 0 || rem >= ipow(b, e.length))
    throw EncodingError("godel integer out of range for the declared length");
  std::string out(e.length, '\0');
  for (std::size_t i = 0; i < e.length; ++i) {
    Integer digit = rem % b;
    out[e.length - 1 - i] = g.symbol(static_cast<std::size_t>(digit));
    rem /= b;
  }
  return out;
}

}  // namespace qdyn::encoding
