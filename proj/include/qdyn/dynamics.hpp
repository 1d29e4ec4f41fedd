#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qdyn/errors.hpp"
#include "qdyn/rational.hpp"

namespace qdyn::dynamics {

/// Deterministic self-map of the rationals.
struct RationalMap {
  std::string name;
  std::function<Rational(const Rational&)> eval;
};

/// Finite prefix x_0 ... x_N of x_{n+1} = f(x_n).
struct Orbit {
  std::string map_name;
  std::vector<Rational> points;

  std::size_t length() const { return points.size(); }
};

struct OrbitOptions {
  /// Exact maps can square denominators every step; the cap turns a
  /// blow-up into a DenominatorOverflow instead of an unbounded burn.
  std::size_t max_value_bits = std::size_t{1} << 20;
};

inline Orbit orbit(const RationalMap& f, const Rational& x0, std::size_t n,
                   const OrbitOptions& opts = {}) {
  Orbit o;
  o.map_name = f.name;
  o.points.reserve(n + 1);
  o.points.push_back(x0);
  for (std::size_t k = 0; k < n; ++k) {
    Rational next;
    try {
      next = f.eval(o.points.back());
    } catch (const Error& e) {
      throw MapError("map '" + f.name + "' failed at index " + std::to_string(k + 1) + ": " +
                     e.what());
    } catch (const std::exception& e) {
      throw MapError("map '" + f.name + "' failed at index " + std::to_string(k + 1) + ": " +
                     e.what());
    }
    if (next.bit_size() > opts.max_value_bits)
      throw DenominatorOverflow("orbit of '" + f.name + "' exceeded " +
                                std::to_string(opts.max_value_bits) + " bits at index " +
                                std::to_string(k + 1));
    o.points.push_back(std::move(next));
  }
  return o;
}

struct PeriodInfo {
  std::size_t preperiod = 0;
  std::size_t period = 0;

  friend bool operator==(const PeriodInfo& a, const PeriodInfo& b) {
    return a.preperiod == b.preperiod && a.period == b.period;
  }
};

/// Exact repeat detection. The first value that recurs fixes (preperiod,
/// period); the periodicity equations are then verified over the whole
/// sample before anything is reported, so a reported period always holds
/// exactly and an absent one means all points are pairwise distinct.
inline std::optional<PeriodInfo> detect_period(const Orbit& o) {
  const auto& xs = o.points;
  std::unordered_map<Rational, std::size_t> first_seen;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    auto [it, inserted] = first_seen.try_emplace(xs[j], j);
    if (inserted) continue;
    std::size_t i = it->second;
    std::size_t period = j - i;
    bool verified = true;
    for (std::size_t k = i; k + period < xs.size() && verified; ++k)
      verified = xs[k + period] == xs[k];
    if (verified) return PeriodInfo{i, period};
  }
  return std::nullopt;
}

struct BoundsReport {
  Rational sample_min;
  Rational sample_max;
  bool all_within = false;
};

inline BoundsReport bounds_check(const Orbit& o, const Rational& lo, const Rational& hi) {
  if (lo > hi) throw UsageError("bounds_check interval has lo > hi");
  if (o.points.empty()) throw UsageError("bounds_check on an empty orbit");
  BoundsReport r{o.points.front(), o.points.front(), true};
  for (const auto& x : o.points) {
    if (x < r.sample_min) r.sample_min = x;
    if (x > r.sample_max) r.sample_max = x;
  }
  r.all_within = r.sample_min >= lo && r.sample_max <= hi;
  return r;
}

/// Smallest N such that every pair of sample points past N is closer than
/// epsilon. At least two indices must lie beyond N; a lone tail point
/// satisfies the condition vacuously and is not evidence, so orbits
/// shorter than three points always report absent.
inline std::optional<std::size_t> cauchy_probe(const Orbit& o, const Rational& epsilon) {
  if (epsilon <= 0) throw UsageError("cauchy_probe needs epsilon > 0");
  const auto& xs = o.points;
  if (xs.size() < 3) return std::nullopt;
  std::vector<Rational> suf_min(xs.size()), suf_max(xs.size());
  suf_min.back() = suf_max.back() = xs.back();
  for (std::size_t i = xs.size() - 1; i-- > 0;) {
    suf_min[i] = xs[i] < suf_min[i + 1] ? xs[i] : suf_min[i + 1];
    suf_max[i] = xs[i] > suf_max[i + 1] ? xs[i] : suf_max[i + 1];
  }
  for (std::size_t n = 0; n + 2 < xs.size(); ++n) {
    if (diff_less(suf_max[n + 1], suf_min[n + 1], epsilon)) return n;
  }
  return std::nullopt;
}

struct CauchyEvidence {
  Rational epsilon;
  std::optional<std::size_t> index;
};

/// Operational chaos label: a sampled orbit that stays inside the
/// interval and never exactly repeats. The label restates that
/// conjunction and nothing more; sensitivity is probed separately and
/// never folded in.
struct OrbitVerdict {
  std::optional<PeriodInfo> period;
  Rational sample_min;
  Rational sample_max;
  Rational interval_lo;
  Rational interval_hi;
  bool within_interval = false;
  std::vector<CauchyEvidence> cauchy;
  bool chaotic_per_criterion = false;
  std::size_t sample_length = 0;
};

inline std::vector<Rational> default_cauchy_epsilons() {
  return {Rational(1, 10), Rational(1, 100), Rational(1, 1000)};
}

inline OrbitVerdict chaos_verdict(const Orbit& o, const Rational& lo, const Rational& hi,
                                  const std::vector<Rational>& epsilons = default_cauchy_epsilons()) {
  OrbitVerdict v;
  v.period = detect_period(o);
  auto b = bounds_check(o, lo, hi);
  v.sample_min = b.sample_min;
  v.sample_max = b.sample_max;
  v.interval_lo = lo;
  v.interval_hi = hi;
  v.within_interval = b.all_within;
  for (const auto& eps : epsilons) v.cauchy.push_back({eps, cauchy_probe(o, eps)});
  v.chaotic_per_criterion = v.within_interval && !v.period.has_value();
  v.sample_length = o.points.size();
  return v;
}

/// |orbit(x0)_k - orbit(x0+delta)_k| for k = 0..n, exact.
inline std::vector<Rational> sensitivity_probe(const RationalMap& f, const Rational& x0,
                                               const Rational& delta, std::size_t n,
                                               const OrbitOptions& opts = {}) {
  if (delta <= 0) throw UsageError("sensitivity_probe needs delta > 0");
  Orbit a = orbit(f, x0, n, opts);
  Orbit b = orbit(f, x0 + delta, n, opts);
  std::vector<Rational> out;
  out.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out.push_back(abs(a.points[k] - b.points[k]));
  return out;
}

// --- small built-in map family -------------------------------------------

inline RationalMap identity_map() {
  return {"identity", [](const Rational& x) { return x; }};
}

inline RationalMap one_minus_map() {
  return {"one-minus", [](const Rational& x) { return Rational(1) - x; }};
}

/// Newton iteration for sqrt(2): x -> (x + 2/x) / 2.
inline RationalMap newton_sqrt2_map() {
  return {"newton-sqrt2", [](const Rational& x) {
            return (x + Rational(2) / x) / Rational(2);
          }};
}

/// x -> 2x mod 1 (the fractional part of 2x).
inline RationalMap doubling_mod1_map() {
  return {"double-mod1", [](const Rational& x) {
            Rational y = x * Rational(2);
            return y - Rational(y.floor());
          }};
}

inline RationalMap affine_map(const Rational& scale, const Rational& offset) {
  return {"affine(" + scale.str() + "," + offset.str() + ")",
          [scale, offset](const Rational& x) { return scale * x + offset; }};
}

/// Resolves "identity", "one-minus", "newton-sqrt2", "double-mod1" or
/// "affine:a:c" with rational a, c.
inline RationalMap named_map(std::string_view spec) {
  if (spec == "identity") return identity_map();
  if (spec == "one-minus") return one_minus_map();
  if (spec == "newton-sqrt2") return newton_sqrt2_map();
  if (spec == "double-mod1") return doubling_mod1_map();
  if (spec.substr(0, 7) == "affine:") {
    auto rest = spec.substr(7);
    auto colon = rest.find(':');
    if (colon == std::string_view::npos)
      throw ConfigError("affine map spec needs two parameters, e.g. affine:1/3:2/3");
    return affine_map(Rational::parse(rest.substr(0, colon)), Rational::parse(rest.substr(colon + 1)));
  }
  throw ConfigError("unknown map '" + std::string(spec) + "'");
}

}  // namespace qdyn::dynamics
