#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qdyn/dynamics.hpp"
#include "qdyn/errors.hpp"
#include "qdyn/learning.hpp"
#include "qdyn/rational.hpp"
#include "qdyn/tm.hpp"

namespace qdyn::fractal {

using learning::ProbeGrid;

enum class Decision { Reject0, Accept1, GoLeft, GoRight };

inline char decision_char(Decision d) {
  switch (d) {
    case Decision::Reject0: return '0';
    case Decision::Accept1: return '1';
    case Decision::GoLeft: return 'l';
    case Decision::GoRight: return 'r';
  }
  return '?';
}

/// The (D_f, D_d) pair of a tree node: a rational transform plus a 4-way
/// decision on the transformed value.
struct DeciderPair {
  std::string name;
  dynamics::RationalMap transform;
  std::function<Decision(const Rational&)> decide;
};

/// D_d backed by a machine run under a decider budget: the probe value's
/// base-b digits are written on the tape, and the halted tape's first cell
/// selects among 0/1/l/r. Budget exhaustion and rejection both map to
/// Reject0, the usual decider emulation.
inline std::function<Decision(const Rational&)> decider_from_machine(
    tm::TMDescription machine, std::uint64_t budget = 10'000, std::size_t digits = 8) {
  auto m = std::make_shared<tm::TMDescription>(std::move(machine));
  encoding::GodelMap g = tm::tape_godel_map(*m);
  return [m, g, budget, digits](const Rational& y) {
    Rational frac = y - Rational(y.floor());
    Integer b(static_cast<unsigned>(g.base()));
    std::string tape;
    Rational scaled = frac;
    for (std::size_t i = 0; i < digits; ++i) {
      scaled *= Rational(b);
      Integer digit = scaled.floor();
      if (digit >= b) digit = b - 1;
      tape += g.symbol(static_cast<std::size_t>(digit));
      scaled -= Rational(digit);
    }
    auto result = tm::run_seeded(*m, tape, budget);
    if (result.outcome != tm::Outcome::Accepted) return Decision::Reject0;
    switch (result.final_config.tape.empty() ? '0' : result.final_config.tape[0]) {
      case '1': return Decision::Accept1;
      case 'l': return Decision::GoLeft;
      case 'r': return Decision::GoRight;
      default: return Decision::Reject0;
    }
  };
}

struct TreeNode {
  int pair = 0;
  int left = -1;
  int right = -1;
};

/// Finite binary tree of decider pairs drawn from a shared finite pool.
class DecisionTree {
 public:
  DecisionTree(std::vector<DeciderPair> pool, std::vector<TreeNode> nodes, int root = 0)
      : pool_(std::move(pool)), nodes_(std::move(nodes)), root_(root) {
    if (nodes_.empty()) throw InvariantError("decision tree needs at least one node");
    if (root_ < 0 || static_cast<std::size_t>(root_) >= nodes_.size())
      throw InvariantError("tree root out of range");
    std::vector<int> parents(nodes_.size(), -1);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.pair < 0 || static_cast<std::size_t>(n.pair) >= pool_.size())
        throw InvariantError("node " + std::to_string(i) + " references missing decider pair");
      for (int child : {n.left, n.right}) {
        if (child == -1) continue;
        if (child < 0 || static_cast<std::size_t>(child) >= nodes_.size())
          throw InvariantError("node " + std::to_string(i) + " has out-of-range child");
        if (child == root_ || parents[child] != -1)
          throw InvariantError("node " + std::to_string(child) + " has two parents or is the root");
        parents[child] = static_cast<int>(i);
      }
    }
    // reachability: every node hangs off the root
    std::vector<bool> seen(nodes_.size(), false);
    std::vector<int> stack{root_};
    std::size_t reached = 0;
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      if (seen[id]) throw InvariantError("cycle through node " + std::to_string(id));
      seen[id] = true;
      ++reached;
      if (nodes_[id].left != -1) stack.push_back(nodes_[id].left);
      if (nodes_[id].right != -1) stack.push_back(nodes_[id].right);
    }
    if (reached != nodes_.size())
      throw InvariantError("tree has nodes unreachable from the root");
  }

  const std::vector<DeciderPair>& pool() const { return pool_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int root() const { return root_; }

  std::size_t height() const {
    std::function<std::size_t(int)> depth = [&](int id) -> std::size_t {
      std::size_t d = 0;
      if (nodes_[id].left != -1) d = std::max(d, 1 + depth(nodes_[id].left));
      if (nodes_[id].right != -1) d = std::max(d, 1 + depth(nodes_[id].right));
      return d;
    };
    return depth(root_);
  }

 private:
  std::vector<DeciderPair> pool_;
  std::vector<TreeNode> nodes_;
  int root_;
};

enum class HaltReason { Decision0, Decision1, MissingLeftChild, MissingRightChild };

inline std::string_view halt_reason_name(HaltReason r) {
  switch (r) {
    case HaltReason::Decision0: return "decision_0";
    case HaltReason::Decision1: return "decision_1";
    case HaltReason::MissingLeftChild: return "missing_left_child";
    case HaltReason::MissingRightChild: return "missing_right_child";
  }
  return "unknown";
}

struct RoutingStep {
  int node = 0;
  Rational value;   // y = D_f(x) at this node
  char direction;   // '0', '1', 'l', 'r'
};

struct RoutingResult {
  bool accepted = false;
  HaltReason reason = HaltReason::Decision0;
  std::vector<RoutingStep> path;

  /// Stable key identifying the routing class of an input.
  std::string path_key() const {
    std::string k;
    for (const auto& s : path) {
      if (!k.empty()) k += '.';
      k += std::to_string(s.node);
      k += s.direction;
    }
    return k;
  }
};

/// Walks the tree: y = D_f(x), d = D_d(y); 0/1 halt, l/r recurse on y,
/// and a missing child rejects. Total for every finite tree.
inline RoutingResult route(const DecisionTree& t, const Rational& x) {
  RoutingResult res;
  int id = t.root();
  Rational value = x;
  while (true) {
    const TreeNode& node = t.nodes()[id];
    const DeciderPair& pair = t.pool()[node.pair];
    Rational y;
    Decision d;
    try {
      y = pair.transform.eval(value);
      d = pair.decide(y);
    } catch (const std::exception& e) {
      throw DeciderError("decider '" + pair.name + "' failed at node " + std::to_string(id) +
                         ": " + e.what());
    }
    res.path.push_back({id, y, decision_char(d)});
    switch (d) {
      case Decision::Reject0:
        res.accepted = false;
        res.reason = HaltReason::Decision0;
        return res;
      case Decision::Accept1:
        res.accepted = true;
        res.reason = HaltReason::Decision1;
        return res;
      case Decision::GoLeft:
        if (node.left == -1) {
          res.accepted = false;
          res.reason = HaltReason::MissingLeftChild;
          return res;
        }
        id = node.left;
        break;
      case Decision::GoRight:
        if (node.right == -1) {
          res.accepted = false;
          res.reason = HaltReason::MissingRightChild;
          return res;
        }
        id = node.right;
        break;
    }
    value = y;
  }
}

/// One routing class of the grid: every point that took the same path.
struct PartitionCell {
  std::string path_key;
  bool accepted = false;
  std::vector<std::size_t> point_indices;
};

/// Cells keyed by routing path; disjoint by construction and their union
/// is the whole grid. Cell order is the lexicographic path key, so output
/// is independent of evaluation order.
inline std::vector<PartitionCell> partition(const DecisionTree& t, const ProbeGrid& grid,
                                            unsigned parallelism = 1) {
  const std::size_t n = grid.points.size();
  std::vector<std::string> keys(n);
  std::vector<unsigned char> verdicts(n);
  std::vector<std::string> errors(n);
  learning::detail::parallel_for(n, parallelism, [&](std::size_t i) {
    try {
      RoutingResult r = route(t, grid.points[i]);
      keys[i] = r.path_key();
      verdicts[i] = r.accepted ? 1 : 0;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (!errors[i].empty()) throw DeciderError(errors[i]);
  std::map<std::string, PartitionCell> cells;
  for (std::size_t i = 0; i < n; ++i) {
    auto& cell = cells[keys[i]];
    cell.path_key = keys[i];
    cell.accepted = verdicts[i] != 0;
    cell.point_indices.push_back(i);
  }
  std::vector<PartitionCell> out;
  out.reserve(cells.size());
  for (auto& [_, cell] : cells) out.push_back(std::move(cell));
  return out;
}

// --- iterated function systems ---------------------------------------------

/// Affine map x -> scale*x + offset, restricted to self-maps of [0,1] with
/// |scale| < 1.
struct AffineMap {
  Rational scale;
  Rational offset;

  Rational operator()(const Rational& x) const { return scale * x + offset; }

  friend bool operator==(const AffineMap& a, const AffineMap& b) {
    return a.scale == b.scale && a.offset == b.offset;
  }
};

struct FunctionSystem {
  std::string label;
  std::vector<AffineMap> maps;

  FunctionSystem(std::string lbl, std::vector<AffineMap> ms)
      : label(std::move(lbl)), maps(std::move(ms)) {
    if (maps.empty()) throw InvariantError("function system needs at least one map");
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const auto& m = maps[i];
      if (abs(m.scale) >= 1)
        throw InvariantError("map " + std::to_string(i) + " of '" + label + "' is not contracting");
      Rational at0 = m(Rational(0)), at1 = m(Rational(1));
      if (at0 < 0 || at0 > 1 || at1 < 0 || at1 > 1)
        throw InvariantError("map " + std::to_string(i) + " of '" + label + "' leaves [0,1]");
      for (std::size_t j = 0; j < i; ++j)
        if (maps[j] == m)
          throw InvariantError("duplicate map in function system '" + label + "'");
    }
  }
};

/// The middle-thirds system {x/3, x/3 + 2/3}.
inline FunctionSystem cantor_system() {
  return FunctionSystem("cantor", {{Rational(1, 3), Rational(0)}, {Rational(1, 3), Rational(2, 3)}});
}

struct Interval {
  Rational lo;
  Rational hi;

  bool contains(const Rational& x) const { return lo <= x && x <= hi; }

  friend bool operator==(const Interval& a, const Interval& b) {
    return a.lo == b.lo && a.hi == b.hi;
  }
};

/// Depth-k image of [0,1] under the system: sorted, disjoint (touching
/// intervals are merged into canonical form), exact endpoints.
struct IntervalCover {
  std::size_t depth = 0;
  std::vector<Interval> intervals;

  Rational total_length() const {
    Rational sum(0);
    for (const auto& iv : intervals) sum += iv.hi - iv.lo;
    return sum;
  }

  bool contains(const Rational& x) const {
    auto it = std::partition_point(intervals.begin(), intervals.end(),
                                   [&](const Interval& iv) { return iv.hi < x; });
    return it != intervals.end() && it->contains(x);
  }
};

namespace detail {

inline std::vector<Interval> normalize(std::vector<Interval> ivs) {
  std::sort(ivs.begin(), ivs.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
  std::vector<Interval> merged;
  for (auto& iv : ivs) {
    if (!merged.empty() && iv.lo <= merged.back().hi) {
      if (iv.hi > merged.back().hi) merged.back().hi = iv.hi;
    } else {
      merged.push_back(iv);
    }
  }
  return merged;
}

}  // namespace detail

inline IntervalCover ifs_cover(const FunctionSystem& fs, std::size_t depth) {
  IntervalCover cover;
  cover.depth = depth;
  cover.intervals = {Interval{Rational(0), Rational(1)}};
  for (std::size_t level = 0; level < depth; ++level) {
    std::vector<Interval> next;
    next.reserve(cover.intervals.size() * fs.maps.size());
    for (const auto& m : fs.maps) {
      for (const auto& iv : cover.intervals) {
        Rational a = m(iv.lo), b = m(iv.hi);
        Interval img = a <= b ? Interval{a, b} : Interval{b, a};
        if (img.lo < 0 || img.hi > 1)
          throw InvariantError("system '" + fs.label + "' image escaped [0,1] at depth " +
                               std::to_string(level + 1));
        next.push_back(img);
      }
    }
    cover.intervals = detail::normalize(std::move(next));
  }
  return cover;
}

// --- box counting -----------------------------------------------------------

/// Number of half-open grid boxes [k/b^s, (k+1)/b^s) meeting the cover,
/// with cover intervals read as half-open [lo, hi) as well (degenerate
/// points count their containing box). Touching at endpoints therefore
/// does not count, which is what makes the depth-k Cantor cover meet
/// exactly 2^k boxes at scale 3^-k.
inline Integer box_count(const IntervalCover& cover, std::size_t scale, unsigned base = 3) {
  Integer cells = ipow(Integer(base), scale);
  Integer count = 0;
  Integer prev_last = -1;
  for (const auto& iv : cover.intervals) {
    Rational lo_scaled = iv.lo * Rational(cells);
    Rational hi_scaled = iv.hi * Rational(cells);
    Integer first = lo_scaled.floor();
    Integer last;
    if (iv.lo == iv.hi) {
      last = first;
    } else {
      last = hi_scaled.floor();
      if (hi_scaled.is_integer()) --last;  // half-open upper end
    }
    if (first > cells - 1) first = cells - 1;
    if (last > cells - 1) last = cells - 1;
    if (first <= prev_last) first = prev_last + 1;  // boxes shared with the previous interval
    if (last > prev_last) {
      count += last - first + 1;
      prev_last = last;
    }
  }
  return count;
}

struct DimensionEstimate {
  double slope = 0.0;
  unsigned base = 3;
  std::vector<std::pair<std::size_t, Integer>> counts;  // (scale, N(scale))
};

/// Least-squares slope of log N(s) against s*log(base): the box-counting
/// dimension of the cover. The regression is the single place in the
/// library where floating point is used.
inline DimensionEstimate box_count_dimension(const IntervalCover& cover,
                                             const std::vector<std::size_t>& scales,
                                             unsigned base = 3) {
  if (scales.size() < 2) throw UsageError("box_count_dimension needs at least 2 scales");
  DimensionEstimate est;
  est.base = base;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double logb = std::log(static_cast<double>(base));
  for (std::size_t s : scales) {
    Integer n = box_count(cover, s, base);
    est.counts.emplace_back(s, n);
    double x = static_cast<double>(s) * logb;
    double y = std::log(n.convert_to<double>());
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = static_cast<double>(scales.size());
  est.slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return est;
}

// --- membership oracles and probes ------------------------------------------

/// Exact middle-thirds Cantor set membership: iterate y -> 3y (or 3y - 2);
/// landing strictly inside (1/3, 2/3) rejects, and a revisited value
/// proves the expansion never will, which accepts. Terminates for every
/// rational because the iteration can only visit finitely many values.
inline bool cantor_membership(const Rational& x) {
  if (x < 0 || x > 1) return false;
  static const Rational third(1, 3), two_thirds(2, 3);
  std::unordered_set<Rational> seen;
  Rational y = x;
  while (true) {
    if (y > third && y < two_thirds) return false;
    if (!seen.insert(y).second) return true;
    y = y <= third ? y * 3 : y * 3 - 2;
  }
}

struct ProbeOutcome {
  Rational epsilon;
  std::optional<Rational> witness;  // a rejected point within epsilon of x
};

/// For each epsilon, scans a deterministic dyadic refinement of
/// (x - eps, x + eps) ∩ [0,1] — the points x + eps*j/2^L for odd j,
/// level by level — until a rejected point appears or the probe budget
/// is spent.
inline std::vector<ProbeOutcome> dense_rejection_probe(
    const std::function<bool(const Rational&)>& accept, const Rational& x,
    const std::vector<Rational>& epsilons, std::size_t budget = std::size_t{1} << 12) {
  for (const auto& eps : epsilons)
    if (eps <= 0) throw UsageError("probe epsilon must be > 0");
  if (!accept(x)) throw UsageError("dense_rejection_probe needs an accepted anchor point");
  std::vector<ProbeOutcome> out;
  for (const auto& eps : epsilons) {
    ProbeOutcome probe{eps, std::nullopt};
    std::size_t evaluations = 0;
    for (std::size_t level = 1; level < 40 && !probe.witness && evaluations < budget; ++level) {
      Integer den = ipow(2, level);
      for (Integer j = 1 - den; j < den && !probe.witness && evaluations < budget; j += 2) {
        Rational candidate = x + eps * Rational(j, den);
        if (candidate < 0 || candidate > 1) continue;
        ++evaluations;
        if (!accept(candidate)) probe.witness = candidate;
      }
    }
    out.push_back(std::move(probe));
  }
  return out;
}

/// Finite slice of the infinite self-similar tree: the depth-k mirror of
/// the middle-thirds system. A three-pair pool suffices for every depth —
/// left children renormalize by 3x, right children by 3x - 6, and depth-k
/// leaves accept — so routing agrees exactly with depth-k cover
/// membership.
inline DecisionTree cantor_mirror_tree(std::size_t depth) {
  auto band = [](const Rational& y) {
    if (y >= 0 && y <= 1) return Decision::GoLeft;
    if (y >= 2 && y <= 3) return Decision::GoRight;
    return Decision::Reject0;
  };
  std::vector<DeciderPair> pool{
      {"scale3", dynamics::affine_map(Rational(3), Rational(0)), band},
      {"scale3-shift", dynamics::affine_map(Rational(3), Rational(-6)), band},
      {"leaf-accept", dynamics::identity_map(), [](const Rational&) { return Decision::Accept1; }},
  };
  // breadth-first: expanding a node appends its two children, so node q's
  // children are the next unclaimed pair of ids
  struct Pending {
    std::size_t level;
    int arrival_pair;  // 0 when reached as a left child (and for the root), 1 otherwise
  };
  std::vector<Pending> queue{{0, 0}};
  std::vector<TreeNode> nodes;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    auto [level, arrival_pair] = queue[q];
    TreeNode n;
    n.pair = level == depth ? 2 : arrival_pair;
    if (level < depth) {
      n.left = static_cast<int>(queue.size());
      n.right = static_cast<int>(queue.size() + 1);
      queue.push_back({level + 1, 0});
      queue.push_back({level + 1, 1});
    }
    nodes.push_back(n);
  }
  return DecisionTree(std::move(pool), std::move(nodes), 0);
}

}  // namespace qdyn::fractal
