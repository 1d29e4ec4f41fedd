#pragma once

// Shared test fixtures: random decision trees over random finite decider
// pools, plus an independent recursive router to check routing against.

#include <random>
#include <string>
#include <vector>

#include "qdyn/fractal.hpp"

namespace qdyn::testsupport {

inline fractal::DecisionTree random_tree(std::mt19937& rng) {
  using fractal::Decision;
  std::uniform_int_distribution<int> pool_size(2, 4), node_count(1, 7);
  std::uniform_int_distribution<int> num(0, 8), den(1, 8), decision_pick(0, 3);
  auto rand_decision = [&]() {
    switch (decision_pick(rng)) {
      case 0: return Decision::Reject0;
      case 1: return Decision::Accept1;
      case 2: return Decision::GoLeft;
      default: return Decision::GoRight;
    }
  };
  std::vector<fractal::DeciderPair> pool;
  int psize = pool_size(rng);
  for (int p = 0; p < psize; ++p) {
    Rational scale(num(rng), 9), offset(num(rng), 17);
    Rational cut1(num(rng), 8), cut2 = cut1 + Rational(den(rng), 8);
    Decision low = rand_decision(), mid = rand_decision(), high = rand_decision();
    pool.push_back(fractal::DeciderPair{
        "p" + std::to_string(p), dynamics::affine_map(scale, offset),
        [cut1, cut2, low, mid, high](const Rational& y) {
          if (y < cut1) return low;
          if (y < cut2) return mid;
          return high;
        }});
  }
  int n = node_count(rng);
  std::uniform_int_distribution<int> pair_pick(0, psize - 1);
  std::vector<fractal::TreeNode> nodes(n);
  for (int i = 0; i < n; ++i) nodes[i].pair = pair_pick(rng);
  for (int child = 1; child < n; ++child) {
    std::vector<std::pair<int, bool>> slots;
    for (int p = 0; p < child; ++p) {
      if (nodes[p].left == -1) slots.push_back({p, true});
      if (nodes[p].right == -1) slots.push_back({p, false});
    }
    auto [parent, is_left] =
        slots[std::uniform_int_distribution<std::size_t>(0, slots.size() - 1)(rng)];
    (is_left ? nodes[parent].left : nodes[parent].right) = child;
  }
  return fractal::DecisionTree(std::move(pool), std::move(nodes), 0);
}

struct BfOutcome {
  bool accepted;
  fractal::HaltReason reason;
  std::size_t path_len;
};

/// Follows the routing clauses by direct recursion, independent of route().
inline BfOutcome bf_route(const fractal::DecisionTree& t, int id, const Rational& x,
                          std::size_t depth) {
  using fractal::Decision;
  using fractal::HaltReason;
  const auto& node = t.nodes()[id];
  const auto& pair = t.pool()[node.pair];
  Rational y = pair.transform.eval(x);
  switch (pair.decide(y)) {
    case Decision::Reject0: return {false, HaltReason::Decision0, depth + 1};
    case Decision::Accept1: return {true, HaltReason::Decision1, depth + 1};
    case Decision::GoLeft:
      if (node.left == -1) return {false, HaltReason::MissingLeftChild, depth + 1};
      return bf_route(t, node.left, y, depth + 1);
    case Decision::GoRight:
      if (node.right == -1) return {false, HaltReason::MissingRightChild, depth + 1};
      return bf_route(t, node.right, y, depth + 1);
  }
  return {false, HaltReason::Decision0, depth + 1};
}

}  // namespace qdyn::testsupport
