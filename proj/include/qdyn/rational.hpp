#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

#include "qdyn/errors.hpp"

namespace qdyn {

using Integer = boost::multiprecision::cpp_int;

/// Arbitrary-precision rational, always in lowest terms with a positive
/// denominator. Every encoding and orbit point in the library is one of
/// these; no module except the box-dimension slope ever touches floats.
class Rational {
 public:
  Rational() : v_(0) {}
  Rational(long long n) : v_(n) {}  // NOLINT: implicit by design
  explicit Rational(const Integer& n) : v_(n) {}

  Rational(const Integer& num, const Integer& den) {
    if (den == 0) throw UsageError("rational with zero denominator");
    v_ = Rep(num) / Rep(den);  // cpp_rational canonicalizes sign and gcd
  }

  /// Parses "num/den" or a bare integer. Whitespace is not accepted.
  static Rational parse(std::string_view text) {
    auto slash = text.find('/');
    try {
      if (slash == std::string_view::npos) {
        return Rational(Integer(std::string(text)));
      }
      Integer num{std::string(text.substr(0, slash))};
      Integer den{std::string(text.substr(slash + 1))};
      return Rational(num, den);
    } catch (const std::exception& e) {
      throw UsageError("cannot parse rational '" + std::string(text) + "': " + e.what());
    }
  }

  Integer num() const { return boost::multiprecision::numerator(v_); }
  Integer den() const { return boost::multiprecision::denominator(v_); }

  bool is_integer() const { return den() == 1; }

  /// floor(x) as an Integer (correct for negatives).
  Integer floor() const {
    Integer n = num(), d = den();
    Integer q = n / d;
    if (n < 0 && q * d != n) --q;
    return q;
  }

  /// "num/den", or just "num" when the value is an integer.
  std::string str() const {
    std::string s = num().str();
    if (!is_integer()) s += "/" + den().str();
    return s;
  }

  /// Bits in the larger of |numerator|, denominator; drives the orbit
  /// blow-up guard.
  std::size_t bit_size() const {
    Integer n = boost::multiprecision::abs(num()), d = den();
    auto bits = [](const Integer& x) -> std::size_t {
      return x == 0 ? 0 : boost::multiprecision::msb(x) + 1;
    };
    return std::max(bits(n), bits(d));
  }

  Rational operator-() const { return Rational(Rep(-v_)); }

  Rational& operator+=(const Rational& o) { v_ += o.v_; return *this; }
  Rational& operator-=(const Rational& o) { v_ -= o.v_; return *this; }
  Rational& operator*=(const Rational& o) { v_ *= o.v_; return *this; }
  Rational& operator/=(const Rational& o) {
    if (o.v_ == 0) throw MapError("division by zero");
    v_ /= o.v_;
    return *this;
  }

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

  friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
  friend bool operator!=(const Rational& a, const Rational& b) { return a.v_ != b.v_; }
  friend bool operator<(const Rational& a, const Rational& b) { return a.v_ < b.v_; }
  friend bool operator<=(const Rational& a, const Rational& b) { return a.v_ <= b.v_; }
  friend bool operator>(const Rational& a, const Rational& b) { return a.v_ > b.v_; }
  friend bool operator>=(const Rational& a, const Rational& b) { return a.v_ >= b.v_; }

 private:
  using Rep = boost::multiprecision::cpp_rational;
  explicit Rational(Rep v) : v_(std::move(v)) {}

  Rep v_;
};

inline Rational abs(const Rational& x) { return x < 0 ? -x : x; }

/// a - b < c decided by cross-multiplication, skipping the gcd
/// normalization a materialized difference would pay. Matters when the
/// operands carry very large numerators/denominators.
inline bool diff_less(const Rational& a, const Rational& b, const Rational& c) {
  return (a.num() * b.den() - b.num() * a.den()) * c.den() < c.num() * (a.den() * b.den());
}

/// base^exp as an Integer; exp is a small non-negative count.
inline Integer ipow(const Integer& base, std::size_t exp) {
  Integer r = 1, b = base;
  for (std::size_t e = exp; e > 0; e >>= 1) {
    if (e & 1) r *= b;
    if (e > 1) b *= b;
  }
  return r;
}

/// 1 / 2^depth, the spacing of a dyadic probe grid.
inline Rational dyadic(const Integer& k, std::size_t depth) {
  return Rational(k, ipow(2, depth));
}

}  // namespace qdyn

template <>
struct std::hash<qdyn::Rational> {
  std::size_t operator()(const qdyn::Rational& x) const noexcept {
    // canonical form makes the decimal strings a sound hash key
    return std::hash<std::string>{}(x.str());
  }
};
