#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <random>
#include <set>
#include <vector>

#include "qdyn/dynamics.hpp"

using namespace qdyn;
using namespace qdyn::dynamics;

namespace {

// Direct fold of the Appendix recurrence, kept apart from orbit().
std::vector<Rational> newton_oracle(std::size_t n) {
  std::vector<Rational> xs{Rational(1)};
  for (std::size_t i = 0; i < n; ++i) {
    const Rational& x = xs.back();
    xs.push_back((x + Rational(2) / x) / Rational(2));
  }
  return xs;
}

// Brute-force Cauchy oracle: checks every pair m,n > N, smallest N with at
// least two indices beyond it.
std::optional<std::size_t> cauchy_oracle(const std::vector<Rational>& xs, const Rational& eps) {
  if (xs.size() < 3) return std::nullopt;
  for (std::size_t N = 0; N + 2 < xs.size(); ++N) {
    bool ok = true;
    for (std::size_t m = N + 1; m < xs.size() && ok; ++m)
      for (std::size_t n = m; n < xs.size() && ok; ++n)
        ok = abs(xs[m] - xs[n]) < eps;
    if (ok) return N;
  }
  return std::nullopt;
}

bool pairwise_distinct(const std::vector<Rational>& xs) {
  std::set<Rational> s(xs.begin(), xs.end());
  return s.size() == xs.size();
}

// x -> x + 1/3 mod 1, an exact period-3 rotation.
RationalMap rotation_third() {
  return {"rotate-1/3", [](const Rational& x) {
            Rational y = x + Rational(1, 3);
            return y - Rational(y.floor());
          }};
}

RationalMap constant_map(const Rational& c) {
  return {"constant", [c](const Rational&) { return c; }};
}

}  // namespace

TEST_CASE("identity orbits sit at their fixed point") {
  auto o = orbit(identity_map(), Rational(2, 7), 5);
  REQUIRE(o.points.size() == 6);
  for (const auto& x : o.points) CHECK(x == Rational(2, 7));
  auto p = detect_period(o);
  REQUIRE(p.has_value());
  CHECK(*p == PeriodInfo{0, 1});
}

TEST_CASE("1-x from 1/3 oscillates with period 2") {
  auto o = orbit(one_minus_map(), Rational(1, 3), 4);
  std::vector<Rational> expect{Rational(1, 3), Rational(2, 3), Rational(1, 3), Rational(2, 3),
                               Rational(1, 3)};
  CHECK(o.points == expect);
  auto p = detect_period(o);
  REQUIRE(p.has_value());
  CHECK(*p == PeriodInfo{0, 2});
}

TEST_CASE("newton orbit reproduces the recurrence exactly") {
  auto o = orbit(newton_sqrt2_map(), Rational(1), 3);
  CHECK(o.points[0] == Rational(1));
  CHECK(o.points[1] == Rational(3, 2));
  CHECK(o.points[2] == Rational(17, 12));
  CHECK(o.points[3] == Rational(577, 408));
  CHECK(o.points == newton_oracle(3));
}

TEST_CASE("newton prefix has no repeats") {
  auto o = orbit(newton_sqrt2_map(), Rational(1), 16);
  CHECK(pairwise_distinct(o.points));  // oracle
  CHECK_FALSE(detect_period(o).has_value());
}

TEST_CASE("preperiodic orbits report preperiod and period") {
  // 5 -> 1/3 -> 2/3 -> 1/3 ...
  RationalMap f{"prep", [](const Rational& x) {
                  if (x == Rational(5)) return Rational(1, 3);
                  return Rational(1) - x;
                }};
  auto o = orbit(f, Rational(5), 7);
  auto p = detect_period(o);
  REQUIRE(p.has_value());
  CHECK(*p == PeriodInfo{1, 2});
}

TEST_CASE("map failures surface as MapError with the index") {
  RationalMap inv{"inverse", [](const Rational& x) { return Rational(1) / x; }};
  try {
    orbit(inv, Rational(0), 3);
    FAIL("expected MapError");
  } catch (const MapError& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}

TEST_CASE("denominator growth guard aborts blow-ups") {
  RationalMap square{"square-shift", [](const Rational& x) { return x * x + Rational(1, 3); }};
  OrbitOptions tight;
  tight.max_value_bits = 64;
  CHECK_THROWS_AS(orbit(square, Rational(1, 3), 64, tight), DenominatorOverflow);
  // default cap is far larger
  CHECK_NOTHROW(orbit(square, Rational(1, 3), 10));
}

TEST_CASE("bounds_check reports exact extrema") {
  auto trace = orbit(one_minus_map(), Rational(1, 3), 6);
  auto b = bounds_check(trace, Rational(0), Rational(1));
  CHECK(b.all_within);
  CHECK(b.sample_min == Rational(1, 3));
  CHECK(b.sample_max == Rational(2, 3));

  auto c = orbit(constant_map(Rational(2, 5)), Rational(2, 5), 4);
  auto cb = bounds_check(c, Rational(2, 5), Rational(2, 5));
  CHECK(cb.all_within);

  RationalMap inc{"inc", [](const Rational& x) { return x + Rational(1); }};
  auto ib = bounds_check(orbit(inc, Rational(0), 10), Rational(0), Rational(1));
  CHECK_FALSE(ib.all_within);
  CHECK(ib.sample_max == Rational(10));
  CHECK_THROWS_AS(bounds_check(c, Rational(1), Rational(0)), UsageError);
}

TEST_CASE("cauchy probe matches the all-pairs oracle on the newton orbit") {
  auto o = orbit(newton_sqrt2_map(), Rational(1), 12);
  Rational eps(1, 1000);
  auto expect = cauchy_oracle(o.points, eps);
  auto got = cauchy_probe(o, eps);
  REQUIRE(expect.has_value());
  CHECK(got == expect);
  CHECK(*got <= 4);
}

TEST_CASE("constant orbits are cauchy from N = 0") {
  auto o = orbit(constant_map(Rational(1, 7)), Rational(1, 7), 6);
  CHECK(cauchy_probe(o, Rational(1, 100)) == 0);
}

TEST_CASE("period-2 orbits are never cauchy below the gap") {
  auto o = orbit(one_minus_map(), Rational(1, 3), 9);
  CHECK_FALSE(cauchy_probe(o, Rational(1, 4)).has_value());
  CHECK(cauchy_probe(o, Rational(1, 2)).has_value());  // gap 1/3 < 1/2
  CHECK_THROWS_AS(cauchy_probe(o, Rational(0)), UsageError);
}

TEST_CASE("cauchy probe is monotone in epsilon") {
  auto o = orbit(newton_sqrt2_map(), Rational(1), 12);
  std::optional<std::size_t> prev;
  for (const auto& eps : {Rational(1, 2), Rational(1, 10), Rational(1, 100), Rational(1, 10000)}) {
    auto n = cauchy_probe(o, eps);
    if (prev && n) CHECK(*n >= *prev);
    if (n) prev = n;
  }
}

TEST_CASE("chaos verdict: periodic orbits are not chaotic per the criterion") {
  auto o = orbit(one_minus_map(), Rational(1, 3), 10);
  auto v = chaos_verdict(o, Rational(0), Rational(1));
  CHECK(v.within_interval);
  CHECK(v.period.has_value());
  CHECK_FALSE(v.chaotic_per_criterion);
  CHECK(v.sample_length == 11);
}

TEST_CASE("chaos verdict: bounded distinct orbits satisfy the criterion") {
  auto o = orbit(newton_sqrt2_map(), Rational(1), 12);
  auto v = chaos_verdict(o, Rational(1), Rational(2));
  CHECK(v.within_interval);
  CHECK_FALSE(v.period.has_value());
  CHECK(v.chaotic_per_criterion);
}

TEST_CASE("chaos verdict is exactly the stated conjunction") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> num(0, 16), den(1, 16), pick(0, 4);
  for (int i = 0; i < 300; ++i) {
    Rational x0(num(rng), 16);
    RationalMap f;
    switch (pick(rng)) {
      case 0: f = identity_map(); break;
      case 1: f = one_minus_map(); break;
      case 2: f = doubling_mod1_map(); break;
      case 3: f = rotation_third(); break;
      default: f = affine_map(Rational(den(rng), 17), Rational(num(rng), 33)); break;
    }
    auto o = orbit(f, x0, 24);
    auto v = chaos_verdict(o, Rational(0), Rational(1));
    bool bounded = bounds_check(o, Rational(0), Rational(1)).all_within;
    bool repeats = detect_period(o).has_value();
    CHECK(v.chaotic_per_criterion == (bounded && !repeats));
  }
}

TEST_CASE("orbit consistency under random maps") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> num(0, 32);
  for (int i = 0; i < 50; ++i) {
    RationalMap f = affine_map(Rational(num(rng), 65), Rational(num(rng), 97));
    Rational x0(num(rng), 33);
    auto o = orbit(f, x0, 12);
    for (std::size_t k = 0; k + 1 < o.points.size(); ++k)
      CHECK(o.points[k + 1] == f.eval(o.points[k]));
  }
}

TEST_CASE("detect_period soundness on random orbits") {
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> num(0, 12), pick(0, 3);
  for (int i = 0; i < 200; ++i) {
    RationalMap f;
    switch (pick(rng)) {
      case 0: f = rotation_third(); break;
      case 1: f = doubling_mod1_map(); break;
      case 2: f = one_minus_map(); break;
      default: f = identity_map(); break;
    }
    auto o = orbit(f, Rational(num(rng), 13), 20);
    auto p = detect_period(o);
    if (p) {
      for (std::size_t k = p->preperiod; k + p->period < o.points.size(); ++k)
        CHECK(o.points[k + p->period] == o.points[k]);
    } else {
      CHECK(pairwise_distinct(o.points));
    }
  }
}

TEST_CASE("sensitivity probe: identity keeps the gap, constants close it") {
  auto sid = sensitivity_probe(identity_map(), Rational(1, 5), Rational(1, 64), 6);
  for (const auto& d : sid) CHECK(d == Rational(1, 64));

  auto sc = sensitivity_probe(constant_map(Rational(1, 2)), Rational(1, 5), Rational(1, 64), 6);
  CHECK(sc[0] == Rational(1, 64));
  for (std::size_t k = 1; k < sc.size(); ++k) CHECK(sc[k] == Rational(0));
}

TEST_CASE("sensitivity probe: the doubling map doubles the gap until wrap") {
  auto s = sensitivity_probe(doubling_mod1_map(), Rational(0), Rational(1, 1024), 8);
  REQUIRE(s.size() == 9);
  for (std::size_t k = 0; k <= 8; ++k) CHECK(s[k] == Rational(ipow(2, k), 1024));
  CHECK_THROWS_AS(sensitivity_probe(doubling_mod1_map(), Rational(0), Rational(0), 3), UsageError);
}

TEST_CASE("named maps resolve and reject unknowns") {
  CHECK(named_map("identity").eval(Rational(1, 3)) == Rational(1, 3));
  CHECK(named_map("affine:1/3:2/3").eval(Rational(1)) == Rational(1));
  CHECK_THROWS_AS(named_map("nope"), ConfigError);
  CHECK_THROWS_AS(named_map("affine:1/2"), ConfigError);
}
