#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <string>
#include <vector>

#include "qdyn/dynamics.hpp"
#include "qdyn/learning.hpp"

using namespace qdyn;
using namespace qdyn::learning;

namespace {

encoding::GodelMap binary_map() { return encoding::GodelMap(encoding::Alphabet("01")); }

Encoding binary_encoding(const std::string& bits) {
  return encoding::rationalize(bits, binary_map());
}

AcceptSetTrace trace_from_bitmaps(const ProbeGrid& grid, std::vector<Bitmap> sets) {
  AcceptSetTrace t;
  t.grid = grid;
  t.memberships = std::move(sets);
  return t;
}

Bitmap interval_bitmap(const ProbeGrid& grid, const Rational& lo, const Rational& hi) {
  Bitmap b(grid.points.size());
  for (std::size_t i = 0; i < grid.points.size(); ++i)
    b[i] = grid.points[i] >= lo && grid.points[i] <= hi;
  return b;
}

TrainingSet separable_training_set() {
  TrainingSet ts;
  for (int k = 1; k <= 4; ++k) ts.push_back({Rational(k, 16), true});
  for (int k = 9; k <= 12; ++k) ts.push_back({Rational(k, 16), false});
  return ts;
}

// Test-side reimplementation of the stump update on (threshold, step)
// pairs, used as the oracle for the functional's model chain.
struct OracleStump {
  Rational t;
  std::size_t exp;
};

Rational oracle_quantize(const Rational& t) {
  Rational c = t < 0 ? Rational(0) : (t > 1 ? Rational(1) : t);
  return Rational((c * Rational(ipow(2, 40))).floor(), ipow(2, 40));
}

OracleStump oracle_stump_step(const OracleStump& m, const TrainingSet& ts) {
  Rational t = oracle_quantize(m.t);
  std::size_t fn = 0, fp = 0;
  for (const auto& [x, y] : ts) {
    bool acc = x <= t;
    if (y && !acc) ++fn;
    if (!y && acc) ++fp;
  }
  if (fn == 0 && fp == 0) return {t, m.exp};
  Rational step(Integer(1), ipow(2, m.exp));
  return {oracle_quantize(fn >= fp ? t + step : t - step), std::min<std::size_t>(m.exp + 1, 40)};
}

}  // namespace

TEST_CASE("constant functional reaches its fixed point at index 1") {
  Encoding target = binary_encoding("10");  // threshold 1/2
  Encoding seed = binary_encoding("0111");  // threshold 7/16
  auto L = make_constant_functional(target);
  auto chain = iterate_learner(L, seed, 6);
  REQUIRE(chain.size() == 7);
  CHECK(chain[0] == seed);
  for (std::size_t k = 1; k < chain.size(); ++k) CHECK(chain[k] == target);
  CHECK(L.apply(target) == target);  // f(x*) = x*

  auto grid = ProbeGrid::dyadic_grid(5);
  Bitmap first = accept_set(L.decode_model(chain[1]), grid);
  for (std::size_t k = 2; k < chain.size(); ++k)
    CHECK(accept_set(L.decode_model(chain[k]), grid) == first);
  CHECK(first != accept_set(L.decode_model(seed), grid));
}

TEST_CASE("oscillator alternates with period 2 and rejects all under a raw seed") {
  auto L = make_oscillator_functional();
  Encoding seed = binary_encoding("0110");
  auto chain = iterate_learner(L, seed, 8);
  for (std::size_t k = 1; k + 2 < chain.size(); ++k) {
    CHECK(chain[k] == chain[k + 2]);
    CHECK(chain[k] != chain[k + 1]);
  }
  auto grid = ProbeGrid::dyadic_grid(4);
  CHECK(popcount(accept_set(L.decode_model(seed), grid)) == 0);
  CHECK(accept_set(L.decode_model(chain[1]), grid) ==
        interval_bitmap(grid, Rational(0), Rational(1, 2)));
  CHECK(accept_set(L.decode_model(chain[2]), grid) ==
        interval_bitmap(grid, Rational(1, 4), Rational(3, 4)));
}

TEST_CASE("stump learner stabilizes on separable data and matches its oracle") {
  auto ts = separable_training_set();
  auto L = make_stump_functional(ts);
  Encoding seed = encode_training_set(ts);
  auto chain = iterate_learner(L, seed, 32);

  // oracle chain from the same lenient start
  OracleStump om{seed.value, 1};
  for (std::size_t k = 1; k < chain.size(); ++k) {
    om = oracle_stump_step(om, ts);
    auto decoded = detail::decode_stump(chain[k]);
    CHECK(decoded.threshold == om.t);
    CHECK(decoded.step_exp == om.exp);
  }

  // stabilization within 32 iterations, recorded by the oracle first
  std::size_t stable_at = 0;
  for (std::size_t k = 1; k < chain.size(); ++k) {
    if (chain[k] == chain[k - 1]) {
      stable_at = k;
      break;
    }
  }
  REQUIRE(stable_at > 0);
  CHECK(stable_at <= 32);
  for (std::size_t k = stable_at; k < chain.size(); ++k) CHECK(chain[k] == chain[stable_at]);

  // the stabilized threshold separates the training set exactly
  Rational t = detail::decode_stump(chain.back()).threshold;
  for (const auto& [x, y] : ts) CHECK((x <= t) == y);
}

TEST_CASE("tm functional iterates encodings inside [0,1]") {
  const char* machine = R"(states: scan carry done qr
input: 0 1
tape: 0 1 _
blank: _
start: scan
accept: done
reject: qr
delta: scan , 0 -> scan , 0 , R
delta: scan , 1 -> scan , 1 , R
delta: scan , _ -> carry , _ , L
delta: carry , 1 -> carry , 0 , L
delta: carry , 0 -> done , 1 , L
delta: carry , _ -> done , _ , R
)";
  FunctionalParams params;
  params.machine_text = machine;
  params.budget = 1000;
  auto L = builtin_functional("tm_functional", params);

  encoding::GodelMap g{encoding::Alphabet("01_", '_')};
  Encoding seed = encoding::rationalize("011", g);
  auto chain = iterate_learner(L, seed, 8);
  for (const auto& e : chain) {
    CHECK(e.value >= 0);
    CHECK(e.value <= 1);
    CHECK(e.base == 3);
  }
  // same-width increment: 011 -> 100 -> 101 -> 110 -> 111 -> 000 (wrapped by fixture semantics)
  CHECK(encoding::derationalize(chain[1], g).substr(0, 3) == "100");

  auto c = L.decode_model(chain[1]);
  auto grid = ProbeGrid::dyadic_grid(3);
  auto bm1 = accept_set(c, grid);
  auto bm2 = accept_set(c, grid);
  CHECK(bm1 == bm2);  // deterministic
}

TEST_CASE("builtin_functional validates its parameters") {
  CHECK_THROWS_AS(builtin_functional("nope"), ConfigError);
  CHECK_THROWS_AS(builtin_functional("constant"), ConfigError);
  CHECK_THROWS_AS(builtin_functional("stump_learner"), ConfigError);
  CHECK_THROWS_AS(builtin_functional("tm_functional"), ConfigError);
  CHECK_NOTHROW(builtin_functional("oscillator"));
}

TEST_CASE("functional failures carry the iteration index") {
  Functional bad{"bad",
                 [](const Encoding& e) -> Encoding {
                   if (e.length >= 3) throw std::runtime_error("boom");
                   return Encoding(e.value / Rational(2), e.length + 1, e.base);
                 },
                 [](const Encoding&) {
                   return Classifier{"x", [](const Rational&) { return true; }};
                 }};
  try {
    iterate_learner(bad, binary_encoding("1"), 5);
    FAIL("expected FunctionalError");
  } catch (const FunctionalError& e) {
    CHECK(std::string(e.what()).find("index 3") != std::string::npos);
  }
}

TEST_CASE("accept_set evaluates thresholds on the dyadic grid") {
  auto grid = ProbeGrid::dyadic_grid(3);  // 0, 1/8, ..., 1
  Classifier half{"x<=1/2", [](const Rational& x) { return x <= Rational(1, 2); }};
  Bitmap bm = accept_set(half, grid);
  REQUIRE(bm.size() == 9);
  for (std::size_t i = 0; i < bm.size(); ++i) CHECK(bm[i] == (i <= 4));

  Classifier none{"reject-all", [](const Rational&) { return false; }};
  CHECK(popcount(accept_set(none, grid)) == 0);
}

TEST_CASE("accept_set agrees with a brute-force cover test for cantor depth 2") {
  // depth-2 middle-thirds cover, endpoints in ninths
  std::vector<std::pair<Rational, Rational>> cover{
      {Rational(0), Rational(1, 9)},
      {Rational(2, 9), Rational(3, 9)},
      {Rational(6, 9), Rational(7, 9)},
      {Rational(8, 9), Rational(1)},
  };
  Classifier member{"cantor-depth2", [cover](const Rational& x) {
                      for (const auto& [lo, hi] : cover)
                        if (x >= lo && x <= hi) return true;
                      return false;
                    }};
  auto grid = ProbeGrid::dyadic_grid(4);
  Bitmap got = accept_set(member, grid);
  for (std::size_t i = 0; i < grid.points.size(); ++i) {
    bool expect = false;
    for (const auto& [lo, hi] : cover)
      expect = expect || (grid.points[i] >= lo && grid.points[i] <= hi);
    CHECK(got[i] == expect);
  }
}

TEST_CASE("classifier failures carry the point index") {
  auto grid = ProbeGrid::dyadic_grid(2);
  Classifier bad{"bad", [](const Rational& x) -> bool {
                   if (x == Rational(1, 2)) throw std::runtime_error("bad point");
                   return true;
                 }};
  try {
    accept_set(bad, grid);
    FAIL("expected ClassifierError");
  } catch (const ClassifierError& e) {
    CHECK(std::string(e.what()).find("index 2") != std::string::npos);
  }
}

TEST_CASE("accept_set is schedule independent") {
  auto grid = ProbeGrid::dyadic_grid(8);
  Classifier c{"x<=2/3", [](const Rational& x) { return x <= Rational(2, 3); }};
  auto serial = accept_set(c, grid, 1);
  for (unsigned par : {2u, 3u, 8u}) CHECK(accept_set(c, grid, par) == serial);
}

TEST_CASE("limit_sets: constant traces converge to their bitmap") {
  auto grid = ProbeGrid::dyadic_grid(3);
  Bitmap b = interval_bitmap(grid, Rational(0), Rational(1, 2));
  auto rep = limit_sets(trace_from_bitmaps(grid, std::vector<Bitmap>(8, b)), 0, 8);
  CHECK(rep.converged);
  CHECK(rep.limsup == b);
  CHECK(rep.liminf == b);
  CHECK(rep.first_stable_index == 0);
  for (auto c : rep.churn) CHECK(c == 0);
}

TEST_CASE("limit_sets: oscillating traces have distinct limits") {
  auto grid = ProbeGrid::dyadic_grid(5);
  Bitmap a = interval_bitmap(grid, Rational(0), Rational(1, 2));
  Bitmap b = interval_bitmap(grid, Rational(1, 4), Rational(3, 4));
  std::vector<Bitmap> sets;
  for (int i = 0; i < 16; ++i) sets.push_back(i % 2 == 0 ? a : b);
  auto rep = limit_sets(trace_from_bitmaps(grid, sets), 0, 16);
  CHECK_FALSE(rep.converged);
  CHECK_FALSE(rep.first_stable_index.has_value());
  // oracle enumeration: union and intersection of the two phases
  CHECK(rep.liminf == interval_bitmap(grid, Rational(1, 4), Rational(1, 2)));
  CHECK(rep.limsup == interval_bitmap(grid, Rational(0), Rational(3, 4)));
  for (auto c : rep.churn) CHECK(c != 0);
}

TEST_CASE("limit_sets: nested shrinking traces settle on the final bitmap") {
  auto grid = ProbeGrid::dyadic_grid(5);
  std::vector<Bitmap> sets;
  for (int n = 0; n < 12; ++n) {
    int k = std::min(n, 5);
    sets.push_back(interval_bitmap(grid, Rational(0), Rational(1, 2) + Rational(1, ipow(2, k + 1))));
  }
  auto rep = limit_sets(trace_from_bitmaps(grid, sets), 0, 12);
  CHECK(rep.converged);
  CHECK(rep.limsup == sets.back());
  CHECK(rep.liminf == sets.back());
  CHECK(rep.first_stable_index == 5);
}

TEST_CASE("limit_sets rejects bad windows") {
  auto grid = ProbeGrid::dyadic_grid(2);
  auto t = trace_from_bitmaps(grid, std::vector<Bitmap>(4, Bitmap(5, true)));
  CHECK_THROWS_AS(limit_sets(t, 2, 2), UsageError);
  CHECK_THROWS_AS(limit_sets(t, 3, 2), UsageError);
  CHECK_THROWS_AS(limit_sets(t, 0, 9), UsageError);
}

TEST_CASE("limit_sets properties on random traces") {
  std::mt19937 rng(2024);
  auto grid = ProbeGrid::dyadic_grid(4);
  const std::size_t npts = grid.points.size();
  std::uniform_int_distribution<int> coin(0, 1), len_pick(4, 24);
  for (int iter = 0; iter < 200; ++iter) {
    std::size_t len = len_pick(rng);
    std::vector<Bitmap> sets;
    for (std::size_t n = 0; n < len; ++n) {
      Bitmap b(npts);
      for (std::size_t i = 0; i < npts; ++i) b[i] = coin(rng) != 0;
      sets.push_back(b);
    }
    auto rep = limit_sets(trace_from_bitmaps(grid, sets), 0, len);
    CHECK(bitmap_subset(rep.liminf, rep.limsup));
    if (rep.converged) {
      REQUIRE_FALSE(rep.churn.empty());
      CHECK(rep.churn.back() == 0);
    }
  }
}

TEST_CASE("monotone traces that settle in the window always converge") {
  std::mt19937 rng(5);
  auto grid = ProbeGrid::dyadic_grid(4);
  const std::size_t npts = grid.points.size();
  std::uniform_int_distribution<int> coin(0, 1);
  for (int iter = 0; iter < 200; ++iter) {
    std::size_t len = 16;
    std::uniform_int_distribution<std::size_t> settle_pick(0, len - 2);
    std::size_t settle = settle_pick(rng);
    Bitmap cur(npts, true);
    std::vector<Bitmap> sets;
    for (std::size_t n = 0; n < len; ++n) {
      if (n <= settle)
        for (std::size_t i = 0; i < npts; ++i) cur[i] = cur[i] && coin(rng) != 0;
      sets.push_back(cur);
    }
    for (std::size_t n = 0; n + 1 < len; ++n) CHECK(bitmap_subset(sets[n + 1], sets[n]));
    auto rep = limit_sets(trace_from_bitmaps(grid, sets), 0, len);
    CHECK(rep.converged);
    CHECK(rep.limsup == sets.back());
  }
}

TEST_CASE("symmetric difference density reports") {
  auto grid = ProbeGrid::dyadic_grid(4);
  Bitmap a = interval_bitmap(grid, Rational(0), Rational(1, 2));
  auto same = symmetric_difference_density(a, a, grid, grid.spacing());
  CHECK(same.sym_diff_count == 0);
  CHECK(same.density_fraction == Rational(0));

  Bitmap b = interval_bitmap(grid, Rational(1, 4), Rational(3, 4));
  auto osc = symmetric_difference_density(a, b, grid, grid.spacing());
  // oracle: delta = [0,1/4) union (1/2,3/4]
  std::size_t expect = 0;
  for (const auto& p : grid.points)
    if ((p >= 0 && p < Rational(1, 4)) || (p > Rational(1, 2) && p <= Rational(3, 4))) ++expect;
  CHECK(osc.sym_diff_count == expect);
  CHECK(osc.sym_diff_count > 0);
  CHECK(osc.intersection_count == popcount(bitmap_and(a, b)));

  Bitmap inv(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) inv[i] = !a[i];
  auto comp = symmetric_difference_density(a, inv, grid, grid.spacing());
  CHECK(comp.sym_diff_count == grid.points.size());
  CHECK(comp.density_fraction == Rational(1));

  CHECK_THROWS_AS(symmetric_difference_density(a, Bitmap(3, false), grid, Rational(1, 4)),
                  UsageError);
  CHECK_THROWS_AS(symmetric_difference_density(a, b, grid, Rational(0)), UsageError);
}

TEST_CASE("the runner path and the direct path agree (composition law)") {
  auto grid = ProbeGrid::dyadic_grid(6);
  Encoding seed = binary_encoding("0111");

  std::vector<Functional> functionals;
  functionals.push_back(make_constant_functional(binary_encoding("10")));
  functionals.push_back(make_oscillator_functional());

  for (const auto& L : functionals) {
    auto trace = evaluate_trace(L, seed, 12, grid);
    auto chain = iterate_learner(L, seed, 12);
    REQUIRE(trace.memberships.size() == chain.size());
    for (std::size_t n = 0; n < chain.size(); ++n)
      CHECK(trace.memberships[n] == accept_set(L.decode_model(chain[n]), grid));
  }
}

TEST_CASE("evaluate_trace is parallelism independent") {
  auto grid = ProbeGrid::dyadic_grid(7);
  auto L = make_oscillator_functional();
  Encoding seed = binary_encoding("010");
  auto t1 = evaluate_trace(L, seed, 16, grid, 1);
  auto t4 = evaluate_trace(L, seed, 16, grid, 4);
  CHECK(t1.memberships == t4.memberships);
}

TEST_CASE("encoding orbits of builtins feed the chaos verdict") {
  const char* eraser = R"(states: q0 qa qr
input: 0 1
tape: 0 1 _
blank: _
start: q0
accept: qa
reject: qr
delta: q0 , 0 -> q0 , _ , R
delta: q0 , 1 -> q0 , _ , R
delta: q0 , _ -> qr , _ , R
)";
  auto ts = separable_training_set();
  std::vector<std::pair<Functional, Encoding>> cases;
  cases.push_back({make_constant_functional(binary_encoding("10")), binary_encoding("0111")});
  cases.push_back({make_oscillator_functional(), binary_encoding("0111")});
  cases.push_back({make_stump_functional(ts), encode_training_set(ts)});
  encoding::GodelMap tape_map{encoding::Alphabet("01_", '_')};
  cases.push_back({make_tm_functional(tm::parse_machine(eraser), 1000),
                   encoding::rationalize("0110", tape_map)});
  for (const auto& [L, seed] : cases) {
    auto chain = iterate_learner(L, seed, 16);
    auto o = encoding_orbit(chain, L.name);
    auto v = dynamics::chaos_verdict(o, Rational(0), Rational(1));
    CHECK(v.within_interval);  // Thm setting: encodings stay in [0,1]
    CHECK(v.sample_length == 17);
  }
}

TEST_CASE("probe grids validate their points") {
  CHECK_THROWS_AS(ProbeGrid({Rational(1, 2), Rational(1, 2)}), UsageError);
  CHECK_THROWS_AS(ProbeGrid({Rational(2, 3), Rational(1, 3)}), UsageError);
  CHECK_THROWS_AS(ProbeGrid({Rational(3, 2)}), UsageError);
  CHECK_THROWS_AS(ProbeGrid(std::vector<Rational>{}), UsageError);
  auto g = ProbeGrid::dyadic_grid(10);
  CHECK(g.points.size() == 1025);
  CHECK(g.spacing() == Rational(1, 1024));
}

TEST_CASE("training sets serialize deterministically and encode to a seed") {
  auto ts = separable_training_set();
  CHECK(serialize_training_set(ts) == serialize_training_set(ts));
  Encoding e = encode_training_set(ts);
  CHECK(e.value >= 0);
  CHECK(e.value <= 1);
  CHECK(e.base == 14);
  CHECK_THROWS_AS(encode_training_set({}), UsageError);
}
