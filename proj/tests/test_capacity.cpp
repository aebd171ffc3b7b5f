#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "captree/capacity.hpp"
#include "captree/errors.hpp"
#include "captree/potential.hpp"
#include "random_instances.hpp"

using namespace captree;

namespace {

BoundarySet all_leaves(const WeightedTree& t) { return BoundarySet::from_antichain(t, t.leaves()); }

}  // namespace

TEST(Capacity, BinaryFullBoundary) {
    auto t = WeightedTree::homogeneous(2, 2);
    EXPECT_NEAR(capacity(t, all_leaves(t), 2.0), 4.0 / 7.0, 1e-15);
    EXPECT_EQ(capacity(t, BoundarySet{}, 2.0), 0.0);
    for (std::size_t h = 0; h <= 12; ++h) {
        auto b = WeightedTree::homogeneous(2, h);
        const double expect = std::ldexp(1.0, static_cast<int>(h)) / (std::ldexp(1.0, static_cast<int>(h) + 1) - 1.0);
        EXPECT_NEAR(capacity(b, all_leaves(b), 2.0), expect, 1e-13 * expect);
        // The root stands for the same cylinder union as the full leaf set.
        EXPECT_NEAR(capacity(b, BoundarySet::from_antichain(b, {b.root()}), 2.0), expect, 1e-13 * expect);
    }
}

TEST(Capacity, ChainLeaf) {
    auto t = WeightedTree::chain(2);
    EXPECT_NEAR(capacity(t, BoundarySet::from_antichain(t, {NodeId{2}}), 3.0), 1.0 / 9.0, 1e-15);
    for (std::size_t n = 0; n <= 50; ++n) {
        auto c = WeightedTree::chain(n);
        const NodeId leaf{static_cast<std::uint32_t>(n)};
        EXPECT_NEAR(capacity(c, BoundarySet::from_antichain(c, {leaf}), 2.0), 1.0 / static_cast<double>(n + 1),
                    1e-14 / static_cast<double>(n + 1));
    }
    EXPECT_THROW(capacity(t, BoundarySet{}, 1.0), InputError);
}

TEST(CapacityPoint, Examples) {
    auto t = WeightedTree::homogeneous(2, 3);
    EXPECT_DOUBLE_EQ(capacity_point(t, t.leaves()[2], 2.0), 0.25);
    auto w = WeightedTree::homogeneous(2, 2, {1.7, 0.5});
    for (double p : {1.5, 2.0, 3.0}) EXPECT_NEAR(capacity_point(w, w.root(), p), 1.7, 1e-14);
    // Chains with weight 1: d_pi grows linearly and the capacity decays.
    double prev = 2.0;
    for (std::size_t n = 0; n < 30; ++n) {
        auto c = WeightedTree::chain(n);
        const double v = capacity_point(c, NodeId{static_cast<std::uint32_t>(n)}, 2.0);
        EXPECT_LT(v, prev);
        prev = v;
    }
    EXPECT_LT(prev, 0.04);
}

TEST(CapacityPoint, AgreesWithRecursionOnRandomLeavesAndNodes) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 50; ++trial) {
        auto t = fixtures::random_tree(rng, 5, 3);
        for (double p : {1.5, 2.0, 3.0}) {
            for (NodeId l : t.leaves()) {
                const double c = capacity(t, BoundarySet::from_antichain(t, {l}), p);
                EXPECT_NEAR(capacity_point(t, l, p), c, 1e-12 * c);
            }
            for (std::uint32_t v = 0; v < t.size(); v += 3) {
                const NodeId id{v};
                const double c = capacity_interior(t, std::vector<NodeId>{id}, p);
                EXPECT_NEAR(capacity_point(t, id, p), c, 1e-12 * c);
            }
        }
    }
}

TEST(Capacity, SiblingMergeInvariance) {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 100; ++trial) {
        auto t = fixtures::random_tree(rng, 4, 3);
        auto E = fixtures::random_antichain(rng, t);
        for (double p : {1.5, 2.0, 3.0}) {
            const double base = capacity(t, E, p);
            // Replace every internal element by its full child family and back.
            std::vector<NodeId> split;
            for (NodeId v : E.nodes()) {
                if (t.is_leaf(v)) {
                    split.push_back(v);
                } else {
                    for (NodeId c : t.children(v)) split.push_back(c);
                }
            }
            const double expanded = capacity(t, normalize_antichain(t, split), p);
            EXPECT_NEAR(expanded, base, 1e-13 * base);
        }
    }
}

TEST(Capacity, SetAndTruncationMonotone) {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 100; ++trial) {
        auto t = fixtures::random_tree(rng, 4, 3);
        auto E = fixtures::random_antichain(rng, t);
        auto F = fixtures::random_antichain(rng, t);
        std::vector<NodeId> uni(E.nodes().begin(), E.nodes().end());
        uni.insert(uni.end(), F.nodes().begin(), F.nodes().end());
        auto U = normalize_antichain(t, uni);
        for (double p : {1.5, 2.0, 3.0}) {
            EXPECT_LE(capacity(t, E, p), capacity(t, U, p) * (1.0 + 1e-12));
            EXPECT_LE(capacity(t, U, p), (capacity(t, E, p) + capacity(t, F, p)) * (1.0 + 1e-12));
        }
    }
}

TEST(Equilibrium, ChainLeaf) {
    for (std::size_t n : {0u, 1u, 3u, 8u}) {
        auto t = WeightedTree::chain(n);
        const NodeId leaf{static_cast<std::uint32_t>(n)};
        auto eq = equilibrium(t, BoundarySet::from_antichain(t, {leaf}), 2.0);
        const double inv = 1.0 / static_cast<double>(n + 1);
        EXPECT_NEAR(eq.capacity, inv, 1e-15);
        for (std::uint32_t v = 0; v <= n; ++v) EXPECT_NEAR(eq.phi[NodeId{v}], inv, 1e-15);
        EXPECT_NEAR(eq.mu.mass_at(leaf), inv, 1e-15);
        EXPECT_NEAR(eq.mu.total(), inv, 1e-15);
    }
}

TEST(Equilibrium, BinaryHeightOne) {
    auto t = WeightedTree::homogeneous(2, 1);
    auto eq = equilibrium(t, all_leaves(t), 2.0);
    EXPECT_NEAR(eq.capacity, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(eq.phi[t.root()], 2.0 / 3.0, 1e-15);
    for (NodeId c : t.children(t.root())) EXPECT_NEAR(eq.phi[c], 1.0 / 3.0, 1e-15);
    EXPECT_LT(eq.max_constraint_error, 1e-15);
    EXPECT_NEAR(eq.carleson, 1.0, 1e-14);
    EXPECT_THROW(equilibrium(t, BoundarySet{}, 2.0), InputError);
}

TEST(Equilibrium, DiagnosticsOnRandomInstances) {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 60; ++trial) {
        auto t = fixtures::random_tree(rng, 5, 3);
        auto E = fixtures::random_antichain(rng, t);
        for (double p : {1.5, 2.0, 3.0}) {
            const double q = p / (p - 1.0);
            auto eq = equilibrium(t, E, p);
            EXPECT_LT(eq.max_constraint_error, 1e-10);
            EXPECT_NEAR(eq.root_formula, eq.capacity, 1e-12 * eq.capacity);
            EXPECT_NEAR(eq.capacity, capacity(t, E, p), 1e-14 * eq.capacity);
            EXPECT_NEAR(eq.carleson, 1.0, 1e-9);
            // Extremal pair relation phi = (I*mu)^(p'-1) w^(1-p') on the spanning subtree.
            for (std::uint32_t v = 0; v < t.size(); ++v) {
                const NodeId id{v};
                const double m = eq.mu.istar(id);
                const double expect = m > 0.0 ? std::pow(m, q - 1.0) * std::pow(t.weight(id), 1.0 - q) : 0.0;
                EXPECT_NEAR(eq.phi[id], expect, 1e-11 * std::max(1.0, expect));
            }
            // Mass of the extremal measure equals the capacity, energy too.
            EXPECT_NEAR(eq.mu.total(), eq.capacity, 1e-12 * eq.capacity);
            EXPECT_NEAR(energy(t, eq.mu, p), eq.capacity, 1e-11 * eq.capacity);
        }
    }
}

TEST(CapacityInterior, NodesDominateTheirCylinders) {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 50; ++trial) {
        auto t = fixtures::random_tree(rng, 5, 3);
        auto E = fixtures::random_antichain(rng, t);
        for (double p : {1.5, 2.0, 3.0}) {
            EXPECT_GE(capacity_interior(t, E.nodes(), p) * (1.0 + 1e-12), capacity(t, E, p));
        }
    }
    auto b = WeightedTree::homogeneous(2, 2);
    EXPECT_NEAR(capacity_interior(b, std::vector<NodeId>{b.root()}, 2.0), 1.0, 1e-15);
}
