#pragma once

#include <random>
#include <vector>

#include "captree/tree.hpp"

namespace captree::instances {

// Random tree: depth <= max_depth, each internal node has 1..max_branch children
// (a node stops early with probability stop_prob), weights uniform in [lo, hi].
inline WeightedTree random_tree(std::mt19937_64& rng, std::size_t max_depth, std::size_t max_branch,
                                double lo = 0.5, double hi = 2.0, double stop_prob = 0.2) {
    std::uniform_real_distribution<double> w(lo, hi);
    std::uniform_int_distribution<std::size_t> nb(1, max_branch);
    std::bernoulli_distribution stop(stop_prob);
    std::vector<NodeRecord> recs;
    recs.push_back({0, std::nullopt, w(rng)});
    std::vector<std::pair<std::int64_t, std::size_t>> frontier{{0, 0}};
    std::int64_t next = 1;
    while (!frontier.empty()) {
        auto [id, depth] = frontier.back();
        frontier.pop_back();
        if (depth == max_depth || (depth > 0 && stop(rng))) continue;
        const std::size_t k = nb(rng);
        for (std::size_t j = 0; j < k; ++j) {
            recs.push_back({next, id, w(rng)});
            frontier.emplace_back(next++, depth + 1);
        }
    }
    return WeightedTree::from_records(recs);
}

// Random nonempty antichain: walk down from the root, stopping at each node
// with probability stop_prob and dropping subtrees with probability drop_prob.
inline BoundarySet random_antichain(std::mt19937_64& rng, const WeightedTree& tree, double stop_prob = 0.25,
                                    double drop_prob = 0.3) {
    std::bernoulli_distribution stop(stop_prob), drop(drop_prob);
    std::vector<NodeId> out;
    std::vector<NodeId> stack{tree.root()};
    while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        if (v != tree.root() && drop(rng)) continue;
        if (tree.is_leaf(v) || (v != tree.root() && stop(rng))) {
            out.push_back(v);
            continue;
        }
        for (NodeId c : tree.children(v)) stack.push_back(c);
    }
    if (out.empty()) out.push_back(tree.leaves().front());
    return normalize_antichain(tree, out);
}

// Random measure on the leaves (some leaves may get zero mass).
inline TreeMeasure random_leaf_measure(std::mt19937_64& rng, const WeightedTree& tree, double zero_prob = 0.3) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<NodeId, double>> m;
    for (NodeId l : tree.leaves()) m.emplace_back(l, u(rng) < zero_prob ? 0.0 : u(rng));
    return measure_from_masses(tree, m);
}

// Random measure supported on the leaves covered by E.
inline TreeMeasure random_measure_on(std::mt19937_64& rng, const WeightedTree& tree, const BoundarySet& E) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<NodeId, double>> m;
    for (NodeId l : covered_leaves(tree, E)) m.emplace_back(l, u(rng) < 0.2 ? 0.0 : u(rng));
    return measure_from_masses(tree, m);
}

}  // namespace captree::instances
