#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qdyn/dynamics.hpp"
#include "qdyn/encoding.hpp"
#include "qdyn/errors.hpp"
#include "qdyn/rational.hpp"
#include "qdyn/tm.hpp"

namespace qdyn::learning {

using encoding::Encoding;

using Bitmap = std::vector<bool>;

inline std::size_t popcount(const Bitmap& b) {
  return static_cast<std::size_t>(std::count(b.begin(), b.end(), true));
}

inline Bitmap bitmap_and(const Bitmap& a, const Bitmap& b) {
  if (a.size() != b.size()) throw UsageError("bitmap length mismatch");
  Bitmap r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] && b[i];
  return r;
}

inline Bitmap bitmap_or(const Bitmap& a, const Bitmap& b) {
  if (a.size() != b.size()) throw UsageError("bitmap length mismatch");
  Bitmap r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] || b[i];
  return r;
}

inline Bitmap bitmap_xor(const Bitmap& a, const Bitmap& b) {
  if (a.size() != b.size()) throw UsageError("bitmap length mismatch");
  Bitmap r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] != b[i];
  return r;
}

/// true iff every set bit of a is also set in b.
inline bool bitmap_subset(const Bitmap& a, const Bitmap& b) {
  if (a.size() != b.size()) throw UsageError("bitmap length mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

/// Finite stand-in for the probe space X: sorted distinct rationals in [0,1].
struct ProbeGrid {
  std::vector<Rational> points;
  std::size_t depth = 0;  // meaningful for dyadic grids

  ProbeGrid() = default;

  explicit ProbeGrid(std::vector<Rational> pts, std::size_t d = 0)
      : points(std::move(pts)), depth(d) {
    if (points.empty()) throw UsageError("probe grid must not be empty");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i] < 0 || points[i] > 1)
        throw UsageError("probe grid point " + points[i].str() + " outside [0,1]");
      if (i > 0 && !(points[i - 1] < points[i]))
        throw UsageError("probe grid points must be strictly ascending");
    }
  }

  /// k / 2^depth for k = 0..2^depth, i.e. 2^depth + 1 points.
  static ProbeGrid dyadic_grid(std::size_t depth) {
    Integer den = ipow(2, depth);
    std::vector<Rational> pts;
    pts.reserve(static_cast<std::size_t>(den) + 1);
    for (Integer k = 0; k <= den; ++k) pts.emplace_back(k, den);
    return ProbeGrid(std::move(pts), depth);
  }

  /// Smallest gap between adjacent points.
  Rational spacing() const {
    Rational s = points.size() > 1 ? points[1] - points[0] : Rational(1);
    for (std::size_t i = 2; i < points.size(); ++i)
      s = std::min(s, points[i] - points[i - 1]);
    return s;
  }
};

/// A {0,1}-valued decision rule on rationals.
struct Classifier {
  std::string name;
  std::function<bool(const Rational&)> classify;
};

/// A computable map on encodings whose outputs always decode to a
/// classifier. decode_model is total on valid encodings, including seeds
/// that are not well-formed models (each built-in documents its lenient
/// decoding).
struct Functional {
  std::string name;
  std::function<Encoding(const Encoding&)> apply;
  std::function<Classifier(const Encoding&)> decode_model;
};

/// c_0 = seed, c_{n+1} = L(c_n); n+1 entries. The values form an orbit
/// consumable by the dynamics module.
inline std::vector<Encoding> iterate_learner(const Functional& L, const Encoding& seed,
                                             std::size_t n) {
  std::vector<Encoding> chain;
  chain.reserve(n + 1);
  chain.push_back(seed);
  for (std::size_t k = 0; k < n; ++k) {
    try {
      chain.push_back(L.apply(chain.back()));
    } catch (const std::exception& e) {
      throw FunctionalError("functional '" + L.name + "' failed at index " +
                            std::to_string(k + 1) + ": " + e.what());
    }
  }
  return chain;
}

inline dynamics::Orbit encoding_orbit(const std::vector<Encoding>& chain,
                                      const std::string& name) {
  dynamics::Orbit o;
  o.map_name = name;
  o.points.reserve(chain.size());
  for (const auto& e : chain) o.points.push_back(e.value);
  return o;
}

namespace detail {

/// Runs fn(i) for i in [0, n), split across `parallelism` threads over
/// disjoint index ranges. Results land in caller-owned slots, so the
/// outcome is identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned parallelism, Fn&& fn) {
  if (parallelism <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned workers = std::min<unsigned>(parallelism, static_cast<unsigned>(n));
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

}  // namespace detail

/// bit i = c(grid.points[i]). Evaluation order is unobservable: any
/// parallelism yields the same bitmap, and on failure the lowest failing
/// point index is reported.
inline Bitmap accept_set(const Classifier& c, const ProbeGrid& grid, unsigned parallelism = 1) {
  const std::size_t n = grid.points.size();
  std::vector<unsigned char> buf(n, 0);
  std::vector<std::string> errors(n);
  detail::parallel_for(n, parallelism, [&](std::size_t i) {
    try {
      buf[i] = c.classify(grid.points[i]) ? 1 : 0;
    } catch (const std::exception& e) {
      errors[i] = e.what();
      if (errors[i].empty()) errors[i] = "classifier failure";
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty())
      throw ClassifierError("classifier '" + c.name + "' failed at point index " +
                            std::to_string(i) + ": " + errors[i]);
  Bitmap bm(n);
  for (std::size_t i = 0; i < n; ++i) bm[i] = buf[i] != 0;
  return bm;
}

/// Per-iteration accept sets S_0 .. S_n over one grid.
struct AcceptSetTrace {
  ProbeGrid grid;
  std::vector<Bitmap> memberships;

  std::size_t iterations() const { return memberships.size(); }
};

/// The experiment pipeline: iterate the functional, decode every model,
/// evaluate its accept set. Must agree exactly with evaluating any single
/// iterate by hand (the two paths are property-tested against each other).
inline AcceptSetTrace evaluate_trace(const Functional& L, const Encoding& seed, std::size_t n,
                                     const ProbeGrid& grid, unsigned parallelism = 1) {
  AcceptSetTrace trace;
  trace.grid = grid;
  auto chain = iterate_learner(L, seed, n);
  trace.memberships.reserve(chain.size());
  for (const auto& e : chain) trace.memberships.push_back(accept_set(L.decode_model(e), grid, parallelism));
  return trace;
}

/// Finite-window verdict on the set sequence S_start .. S_{end-1}.
///
/// The infinite lim sup / lim inf are unobservable; the proxies are:
///   - a window whose bitmaps are constant over a final run of length >= 2
///     has visibly settled: limsup = liminf = that stable bitmap;
///   - otherwise "accepted infinitely often" is read as "accepted at least
///     once in every dyadic suffix-half of the window tail" (blocks of
///     length >= 2) and "eventually always" as "accepted throughout the
///     window's second half";
///   - windows of fewer than 4 iterations are too short to halve: limsup /
///     liminf fall back to the union / intersection over the whole window.
/// converged is literally limsup == liminf.
struct ConvergenceReport {
  Bitmap limsup;
  Bitmap liminf;
  bool converged = false;
  std::optional<std::size_t> first_stable_index;
  std::vector<std::size_t> churn;  // |S_{k+1} delta S_k| for consecutive window iterations
  std::size_t window_start = 0;
  std::size_t window_end = 0;
};

inline ConvergenceReport limit_sets(const AcceptSetTrace& trace, std::size_t start,
                                    std::size_t end) {
  const auto& sets = trace.memberships;
  if (start >= end || end > sets.size())
    throw UsageError("limit_sets window [" + std::to_string(start) + "," + std::to_string(end) +
                     ") is empty or exceeds the trace");
  ConvergenceReport rep;
  rep.window_start = start;
  rep.window_end = end;

  for (std::size_t k = start; k + 1 < end; ++k)
    rep.churn.push_back(popcount(bitmap_xor(sets[k + 1], sets[k])));

  // start of the final constant run of bitmaps
  std::size_t run_start = end - 1;
  while (run_start > start && sets[run_start - 1] == sets[end - 1]) --run_start;
  std::size_t run_len = end - run_start;
  if (run_len >= 2 || end - start == 1) rep.first_stable_index = run_start;

  if (rep.first_stable_index) {
    rep.limsup = rep.liminf = sets[end - 1];
  } else if (end - start < 4) {
    rep.limsup = sets[start];
    rep.liminf = sets[start];
    for (std::size_t k = start + 1; k < end; ++k) {
      rep.limsup = bitmap_or(rep.limsup, sets[k]);
      rep.liminf = bitmap_and(rep.liminf, sets[k]);
    }
  } else {
    std::size_t mid = start + (end - start) / 2;
    rep.liminf = sets[mid];
    for (std::size_t k = mid + 1; k < end; ++k) rep.liminf = bitmap_and(rep.liminf, sets[k]);
    // dyadic suffix-halves [m, end), refined while the block keeps >= 2 entries
    Bitmap limsup(sets[start].size(), true);
    std::size_t m = mid;
    while (true) {
      Bitmap block_or = sets[m];
      for (std::size_t k = m + 1; k < end; ++k) block_or = bitmap_or(block_or, sets[k]);
      limsup = bitmap_and(limsup, block_or);
      std::size_t next = m + (end - m) / 2;
      if (next == m || end - next < 2) break;
      m = next;
    }
    rep.limsup = limsup;
  }

  rep.converged = rep.limsup == rep.liminf;
  return rep;
}

/// |A1 delta A2|, |A1 ∩ A2| and the fraction of grid points with a
/// delta-member at distance <= epsilon (the empirical density proxy,
/// reported exactly).
struct SymDiffReport {
  std::size_t sym_diff_count = 0;
  std::size_t intersection_count = 0;
  Rational density_fraction;
  Rational epsilon;
};

inline SymDiffReport symmetric_difference_density(const Bitmap& a1, const Bitmap& a2,
                                                  const ProbeGrid& grid, const Rational& epsilon) {
  if (a1.size() != a2.size() || a1.size() != grid.points.size())
    throw UsageError("bitmaps and grid must have matching lengths");
  if (epsilon <= 0) throw UsageError("density epsilon must be > 0");
  SymDiffReport rep;
  rep.epsilon = epsilon;
  std::vector<Rational> delta_points;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    if (a1[i] != a2[i]) {
      ++rep.sym_diff_count;
      delta_points.push_back(grid.points[i]);
    }
    if (a1[i] && a2[i]) ++rep.intersection_count;
  }
  std::size_t near = 0;
  std::size_t lo = 0;
  for (const auto& p : grid.points) {
    while (lo < delta_points.size() && delta_points[lo] < p - epsilon) ++lo;
    if (lo < delta_points.size() && abs(delta_points[lo] - p) <= epsilon) ++near;
  }
  rep.density_fraction = Rational(Integer(near), Integer(grid.points.size()));
  return rep;
}

// --- built-in functionals --------------------------------------------------

/// L(e) = target for every e. Models decode as threshold rules
/// "accept x iff x <= value", which is total on arbitrary encodings.
inline Functional make_constant_functional(const Encoding& target) {
  auto decode = [](const Encoding& e) {
    Rational t = e.value;
    return Classifier{"threshold<=" + t.str(), [t](const Rational& x) { return x <= t; }};
  };
  return Functional{"constant", [target](const Encoding&) { return target; }, decode};
}

/// Period-2 functional over the binary alphabet. Phase encodings "0" and
/// "1" decode to accept [0,1/2] and [1/4,3/4]; anything else (a seed)
/// decodes to reject-all, so iteration from a fresh seed changes the
/// accept set at every single step.
inline Functional make_oscillator_functional() {
  encoding::GodelMap bits{encoding::Alphabet("01")};
  Encoding phase_a = encoding::rationalize("0", bits);
  Encoding phase_b = encoding::rationalize("1", bits);
  auto apply = [phase_a, phase_b](const Encoding& e) { return e == phase_a ? phase_b : phase_a; };
  auto decode = [phase_a, phase_b](const Encoding& e) {
    if (e == phase_a)
      return Classifier{"accept[0,1/2]", [](const Rational& x) {
                          return x >= 0 && x <= Rational(1, 2);
                        }};
    if (e == phase_b)
      return Classifier{"accept[1/4,3/4]", [](const Rational& x) {
                          return x >= Rational(1, 4) && x <= Rational(3, 4);
                        }};
    return Classifier{"reject-all", [](const Rational&) { return false; }};
  };
  return Functional{"oscillator", apply, decode};
}

using TrainingSet = std::vector<std::pair<Rational, bool>>;

/// Alphabet for serialized training sets: digits plus the pair/label
/// punctuation. Rationalizing exactly this string gives the default
/// learning seed for data-driven functionals.
inline const encoding::GodelMap& training_godel_map() {
  static const encoding::GodelMap map{encoding::Alphabet("0123456789/:;-")};
  return map;
}

inline std::string serialize_training_set(const TrainingSet& ts) {
  std::string out;
  for (const auto& [x, label] : ts) {
    if (!out.empty()) out += ';';
    out += x.num().str() + "/" + x.den().str() + ":" + (label ? "1" : "0");
  }
  return out;
}

inline Encoding encode_training_set(const TrainingSet& ts) {
  if (ts.empty()) throw UsageError("training set must not be empty");
  return encoding::rationalize(serialize_training_set(ts), training_godel_map());
}

namespace detail {

inline constexpr std::size_t kStumpStepBits = 6;
inline constexpr std::size_t kStumpThresholdBits = 40;
inline constexpr std::size_t kStumpModelBits = kStumpStepBits + kStumpThresholdBits;

struct StumpModel {
  Rational threshold;     // dyadic, denominator divides 2^40
  std::size_t step_exp;   // current step is 2^-step_exp
};

inline Rational quantize_threshold(const Rational& t) {
  Rational clamped = t < 0 ? Rational(0) : (t > 1 ? Rational(1) : t);
  Integer scaled = (clamped * Rational(ipow(2, kStumpThresholdBits))).floor();
  return Rational(scaled, ipow(2, kStumpThresholdBits));
}

/// Lenient decoding: a 46-bit binary model carries (step exponent,
/// threshold); any other encoding is read as a bare threshold at the
/// initial step, so arbitrary seeds (e.g. rho of the training set) are
/// usable.
inline StumpModel decode_stump(const Encoding& e) {
  if (e.base == 2 && e.length == kStumpModelBits) {
    Integer bits = (e.value * Rational(ipow(2, kStumpModelBits))).num();
    Integer mask = ipow(2, kStumpThresholdBits);
    Integer threshold_bits = bits % mask;
    std::size_t step_exp = static_cast<std::size_t>(bits / mask);
    step_exp = std::min<std::size_t>(std::max<std::size_t>(step_exp, 1), kStumpThresholdBits);
    return StumpModel{Rational(threshold_bits, mask), step_exp};
  }
  return StumpModel{e.value, 1};
}

inline Encoding encode_stump(const StumpModel& m) {
  Integer threshold_bits = (quantize_threshold(m.threshold) * Rational(ipow(2, kStumpThresholdBits))).num();
  Integer bits = Integer(static_cast<unsigned>(m.step_exp)) * ipow(2, kStumpThresholdBits) + threshold_bits;
  return Encoding(Rational(bits, ipow(2, kStumpModelBits)), kStumpModelBits, 2);
}

}  // namespace detail

/// Decision-stump learner: models are thresholds "accept x iff x <= t".
/// Each application counts false negatives (positives above t) and false
/// positives (negatives at or below t) on the training set, then moves t
/// one step toward the larger error class, halving the step. Zero
/// training error is an exact fixed point.
inline Functional make_stump_functional(const TrainingSet& training) {
  if (training.empty()) throw UsageError("stump learner needs a non-empty training set");
  auto apply = [training](const Encoding& e) {
    auto m = detail::decode_stump(e);
    Rational t = detail::quantize_threshold(m.threshold);
    std::size_t fn = 0, fp = 0;
    for (const auto& [x, label] : training) {
      bool accepted = x <= t;
      if (label && !accepted) ++fn;
      if (!label && accepted) ++fp;
    }
    if (fn == 0 && fp == 0) return detail::encode_stump({t, m.step_exp});
    Rational step(Integer(1), ipow(2, m.step_exp));
    Rational moved = fn >= fp ? t + step : t - step;
    std::size_t next_exp = std::min(m.step_exp + 1, detail::kStumpThresholdBits);
    return detail::encode_stump({moved, next_exp});
  };
  auto decode = [](const Encoding& e) {
    Rational t = detail::quantize_threshold(detail::decode_stump(e).threshold);
    return Classifier{"stump<=" + t.str(), [t](const Rational& x) { return x <= t; }};
  };
  return Functional{"stump_learner", apply, decode};
}

/// Wraps a machine as a functional over its tape alphabet: the encoding is
/// derationalized to a tape, the machine runs to halt or budget, and the
/// final window is rationalized back. Decoded classifiers run the machine
/// on the model string followed by the probe point's base-b digits and
/// accept iff the machine accepts (budget exhaustion counts as reject, the
/// decider emulation used throughout).
inline Functional make_tm_functional(tm::TMDescription machine,
                                     std::uint64_t budget = 10'000,
                                     std::size_t probe_digits = 8) {
  auto m = std::make_shared<tm::TMDescription>(std::move(machine));
  encoding::GodelMap g = tm::tape_godel_map(*m);
  auto apply = [m, g, budget](const Encoding& e) {
    if (e.base != g.base())
      throw FunctionalError("tm functional expects base-" + std::to_string(g.base()) +
                            " encodings, got base " + std::to_string(e.base));
    std::string tape = encoding::derationalize(e, g);
    auto result = tm::run_seeded(*m, tape, budget);
    std::size_t window = std::max(result.final_config.tape.size(), e.length);
    return encoding::rationalize(tm::tape_window(result.final_config, window, m->blank()), g);
  };
  auto decode = [m, g, budget, probe_digits](const Encoding& e) {
    std::string model = e.base == g.base() ? encoding::derationalize(e, g) : std::string();
    return Classifier{
        "tm:" + std::to_string(e.length) + "sym",
        [m, g, budget, model, probe_digits](const Rational& x) {
          std::string tape = model;
          Rational frac = x - Rational(x.floor());
          Integer b(static_cast<unsigned>(g.base()));
          Rational scaled = frac;
          for (std::size_t i = 0; i < probe_digits; ++i) {
            scaled *= Rational(b);
            Integer digit = scaled.floor();
            if (digit >= b) digit = b - 1;  // x == 1 edge
            tape += g.symbol(static_cast<std::size_t>(digit));
            scaled -= Rational(digit);
          }
          return tm::run_seeded(*m, tape, budget).outcome == tm::Outcome::Accepted;
        }};
  };
  return Functional{"tm_functional", apply, decode};
}

/// Structured parameters for builtin_functional. Only the fields the named
/// functional uses need to be set.
struct FunctionalParams {
  std::optional<Encoding> target;        // constant
  TrainingSet training;                  // stump_learner
  std::string machine_text;              // tm_functional
  std::uint64_t budget = 10'000;         // tm_functional
  std::size_t probe_digits = 8;          // tm_functional
};

inline Functional builtin_functional(std::string_view name, const FunctionalParams& params = {}) {
  if (name == "constant") {
    if (!params.target) throw ConfigError("constant functional needs a target encoding");
    return make_constant_functional(*params.target);
  }
  if (name == "oscillator") return make_oscillator_functional();
  if (name == "stump_learner") {
    if (params.training.empty()) throw ConfigError("stump_learner needs a training set");
    return make_stump_functional(params.training);
  }
  if (name == "tm_functional") {
    if (params.machine_text.empty()) throw ConfigError("tm_functional needs a machine description");
    return make_tm_functional(tm::parse_machine(params.machine_text), params.budget,
                              params.probe_digits);
  }
  throw ConfigError("unknown functional '" + std::string(name) + "'");
}

}  // namespace qdyn::learning
