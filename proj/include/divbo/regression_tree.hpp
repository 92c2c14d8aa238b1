#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "divbo/error.hpp"
#include "divbo/feature_table.hpp"

namespace divbo {

// CART regression tree. Leaves store the mean of their training targets and
// the (weighted) training-target count.
struct RegressionTree {
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
    std::int64_t count = 0;
  };

  std::vector<Node> nodes;

  bool empty() const { return nodes.empty(); }

  double predict(const double* x) const {
    std::int32_t id = 0;
    while (nodes[id].feature >= 0) {
      id = x[nodes[id].feature] <= nodes[id].threshold ? nodes[id].left
                                                       : nodes[id].right;
    }
    return nodes[id].value;
  }
};

namespace detail {

// Split statistics are accumulated on targets quantized to a fixed 2^-31
// grid so they are exact integers: split decisions become independent of the
// training-row order and of float summation order. Leaf values are computed
// from the raw targets afterwards, summed in sorted order (canonical, and
// exact for repeated values).
constexpr double kTargetQuantum = 2147483648.0;  // 2^31

struct TreeBuildParams {
  int max_depth = 20;
  std::int64_t min_samples_leaf = 1;
};

// Per-feature row orders sorted by (value, row index); shared by every tree
// grown on the same matrix.
inline std::vector<std::vector<std::int32_t>> presort_columns(
    const FeatureTable& x) {
  std::vector<std::vector<std::int32_t>> sorted(x.n_cols);
  for (std::size_t f = 0; f < x.n_cols; ++f) {
    auto& order = sorted[f];
    order.resize(x.n_rows);
    for (std::size_t r = 0; r < x.n_rows; ++r) {
      order[r] = static_cast<std::int32_t>(r);
    }
    std::sort(order.begin(), order.end(),
              [&](std::int32_t a, std::int32_t b) {
                const double va = x.at(a, f);
                const double vb = x.at(b, f);
                if (va != vb) return va < vb;
                return a < b;
              });
  }
  return sorted;
}

// Level-order exact-greedy builder over presorted columns. `weights` carries
// bootstrap counts (forest) or in-bag 0/1 flags (boosting); rows with weight
// zero are ignored.
class TreeBuilder {
 public:
  TreeBuilder(const FeatureTable& x,
              const std::vector<std::vector<std::int32_t>>& sorted_columns)
      : x_(x), sorted_(sorted_columns) {}

  RegressionTree build(const std::vector<double>& targets,
                       const std::vector<std::int32_t>& weights,
                       const std::vector<std::int32_t>& features,
                       const TreeBuildParams& params) const {
    const std::size_t n_rows = x_.n_rows;
    std::vector<std::int64_t> q(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
      q[r] = weights[r] > 0
                 ? static_cast<std::int64_t>(
                       std::llround(targets[r] * kTargetQuantum))
                 : 0;
    }

    RegressionTree tree;
    std::vector<std::int32_t> node_of_row(n_rows, -1);
    std::int64_t root_n = 0;
    std::int64_t root_sum = 0;
    for (std::size_t r = 0; r < n_rows; ++r) {
      if (weights[r] > 0) {
        node_of_row[r] = 0;
        root_n += weights[r];
        root_sum += weights[r] * q[r];
      }
    }
    if (root_n == 0) {
      throw ValidationError("tree build received no training rows");
    }

    tree.nodes.push_back(RegressionTree::Node{});
    std::vector<NodeState> level{{0, 0, root_n, root_sum}};
    std::vector<std::int32_t> slot_of_node{0};

    std::vector<char> splittable;
    while (!level.empty()) {
      const std::size_t n_slots = level.size();
      std::vector<Candidate> best(n_slots);
      const bool any_splittable =
          mark_splittable(level, params, best, splittable);
      if (any_splittable) {
        scan_features(features, node_of_row, q, weights, slot_of_node, level,
                      params, best, splittable);
      }

      std::vector<NodeState> next_level;
      for (std::size_t s = 0; s < n_slots; ++s) {
        auto& node = tree.nodes[level[s].node_id];
        if (best[s].feature < 0) continue;  // stays a leaf
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.left = static_cast<std::int32_t>(tree.nodes.size());
        node.right = node.left + 1;
        tree.nodes.push_back(RegressionTree::Node{});
        tree.nodes.push_back(RegressionTree::Node{});
        next_level.push_back(NodeState{node.left, level[s].depth + 1,
                                       best[s].left_n, best[s].left_sum});
        next_level.push_back(
            NodeState{node.right, level[s].depth + 1,
                      level[s].n - best[s].left_n,
                      level[s].sum - best[s].left_sum});
      }
      if (next_level.empty()) break;

      // Route rows of split nodes to their children.
      slot_of_node.assign(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < next_level.size(); ++s) {
        slot_of_node[next_level[s].node_id] = static_cast<std::int32_t>(s);
      }
      for (std::size_t r = 0; r < n_rows; ++r) {
        const std::int32_t nid = node_of_row[r];
        if (nid < 0) continue;
        const auto& node = tree.nodes[nid];
        if (node.feature < 0) continue;
        node_of_row[r] =
            x_.at(r, node.feature) <= node.threshold ? node.left : node.right;
      }
      level = std::move(next_level);
    }

    finalize_leaves(tree, node_of_row, targets, weights);
    return tree;
  }

 private:
  struct NodeState {
    std::int32_t node_id;
    int depth;
    std::int64_t n;
    std::int64_t sum;
  };

  struct Candidate {
    double gain = -1.0;
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int64_t left_n = 0;
    std::int64_t left_sum = 0;
  };

  struct ScanState {
    double last_value = 0.0;
    std::int64_t left_n = 0;
    std::int64_t left_sum = 0;
    bool seen = false;
  };

  bool mark_splittable(const std::vector<NodeState>& level,
                       const TreeBuildParams& params,
                       std::vector<Candidate>& best,
                       std::vector<char>& splittable) const {
    bool any = false;
    splittable.assign(level.size(), false);
    for (std::size_t s = 0; s < level.size(); ++s) {
      best[s] = Candidate{};
      if (level[s].depth < params.max_depth &&
          level[s].n >= 2 * params.min_samples_leaf) {
        splittable[s] = true;
        any = true;
      }
    }
    return any;
  }

  void scan_features(const std::vector<std::int32_t>& features,
                     const std::vector<std::int32_t>& node_of_row,
                     const std::vector<std::int64_t>& q,
                     const std::vector<std::int32_t>& weights,
                     const std::vector<std::int32_t>& slot_of_node,
                     const std::vector<NodeState>& level,
                     const TreeBuildParams& params,
                     std::vector<Candidate>& best,
                     const std::vector<char>& splittable) const {
    const double inv_quantum = 1.0 / kTargetQuantum;
    std::vector<ScanState> scan(level.size());
    for (const std::int32_t f : features) {
      for (auto& s : scan) s = ScanState{};
      const auto& order = sorted_[f];
      for (const std::int32_t r : order) {
        const std::int32_t nid = node_of_row[r];
        if (nid < 0) continue;
        const std::int32_t slot = slot_of_node[nid];
        if (slot < 0 || !splittable[slot]) continue;
        const double value = x_.at(r, f);
        ScanState& st = scan[slot];
        if (st.seen && value > st.last_value && st.left_n > 0) {
          try_candidate(level[slot], st, f, value, params, inv_quantum,
                        best[slot]);
        }
        st.left_n += weights[r];
        st.left_sum += weights[r] * q[r];
        st.last_value = value;
        st.seen = true;
      }
    }
  }

  void try_candidate(const NodeState& node, const ScanState& st,
                     std::int32_t feature, double next_value,
                     const TreeBuildParams& params, double inv_quantum,
                     Candidate& best) const {
    const std::int64_t right_n = node.n - st.left_n;
    if (st.left_n < params.min_samples_leaf ||
        right_n < params.min_samples_leaf) {
      return;
    }
    const double sl = static_cast<double>(st.left_sum) * inv_quantum;
    const double sr = static_cast<double>(node.sum - st.left_sum) * inv_quantum;
    const double sp = static_cast<double>(node.sum) * inv_quantum;
    const double parent_term = sp * sp / static_cast<double>(node.n);
    const double gain = sl * sl / static_cast<double>(st.left_n) +
                        sr * sr / static_cast<double>(right_n) - parent_term;
    const double tol = 1e-12 * std::max(1.0, std::abs(parent_term));
    if (gain <= tol) return;
    // Strictly-greater comparison keeps the first candidate seen, which is
    // the lowest feature index and, within a feature, the lowest threshold.
    if (gain > best.gain) {
      best.gain = gain;
      best.feature = feature;
      best.threshold = 0.5 * (st.last_value + next_value);
      best.left_n = st.left_n;
      best.left_sum = st.left_sum;
    }
  }

  void finalize_leaves(RegressionTree& tree,
                       const std::vector<std::int32_t>& node_of_row,
                       const std::vector<double>& targets,
                       const std::vector<std::int32_t>& weights) const {
    std::vector<std::vector<std::pair<double, std::int32_t>>> leaf_members(
        tree.nodes.size());
    for (std::size_t r = 0; r < node_of_row.size(); ++r) {
      if (node_of_row[r] >= 0) {
        leaf_members[node_of_row[r]].push_back({targets[r], weights[r]});
      }
    }
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      auto& node = tree.nodes[id];
      if (node.feature >= 0) continue;
      auto& members = leaf_members[id];
      std::sort(members.begin(), members.end());
      double sum = 0.0;
      std::int64_t count = 0;
      for (const auto& [y, w] : members) {
        sum += y * static_cast<double>(w);
        count += w;
      }
      node.value = count > 0 ? sum / static_cast<double>(count) : 0.0;
      node.count = count;
    }
  }

  const FeatureTable& x_;
  const std::vector<std::vector<std::int32_t>>& sorted_;
};

}  // namespace detail
}  // namespace divbo
