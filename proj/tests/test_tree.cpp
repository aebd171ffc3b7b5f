#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "captree/errors.hpp"
#include "captree/tree.hpp"
#include "captree/tree_io.hpp"
#include "random_instances.hpp"

using namespace captree;

TEST(BuildTree, HomogeneousBinaryHeightThree) {
    auto t = build_tree(HomogeneousSpec{2, 3, {}});
    EXPECT_EQ(t.size(), 15u);
    EXPECT_EQ(t.leaves().size(), 8u);
    EXPECT_EQ(t.height(), 3u);
    for (NodeId v : t.leaves()) EXPECT_EQ(t.depth(v), 3u);
}

TEST(BuildTree, ChainHasOneChildPerInteriorNode) {
    auto t = build_tree(ChainSpec{5, {}});
    EXPECT_EQ(t.size(), 6u);
    for (std::uint32_t v = 0; v < 5; ++v) EXPECT_EQ(t.children(NodeId{v}).size(), 1u);
    EXPECT_TRUE(t.is_leaf(NodeId{5}));
}

TEST(BuildTree, RejectsBadInput) {
    std::vector<NodeRecord> zero{{0, std::nullopt, 1.0}, {1, 0, 0.0}};
    try {
        WeightedTree::from_records(zero);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("nonpositive weight"), std::string::npos);
    }
    std::vector<NodeRecord> orphan{{0, std::nullopt, 1.0}, {1, 7, 1.0}};
    EXPECT_THROW(WeightedTree::from_records(orphan), InputError);
    std::vector<NodeRecord> dup{{0, std::nullopt, 1.0}, {1, 0, 1.0}, {1, 0, 1.0}};
    EXPECT_THROW(WeightedTree::from_records(dup), InputError);
    std::vector<NodeRecord> two_roots{{0, std::nullopt, 1.0}, {1, std::nullopt, 1.0}};
    EXPECT_THROW(WeightedTree::from_records(two_roots), InputError);
    std::vector<NodeRecord> cycle{{0, std::nullopt, 1.0}, {1, 2, 1.0}, {2, 1, 1.0}};
    EXPECT_THROW(WeightedTree::from_records(cycle), InputError);
    EXPECT_THROW(WeightedTree::homogeneous(0, 2), InputError);
}

TEST(BuildTree, ExplicitRecordsKeepLabels) {
    std::vector<NodeRecord> recs{{10, std::nullopt, 1.0}, {30, 10, 2.0}, {20, 10, 3.0}, {40, 20, 4.0}};
    auto t = WeightedTree::from_records(recs, 0.5);
    ASSERT_EQ(t.size(), 4u);
    EXPECT_EQ(t.label(t.root()), 10);
    auto n40 = t.find_label(40);
    ASSERT_TRUE(n40);
    EXPECT_EQ(t.depth(*n40), 2u);
    EXPECT_DOUBLE_EQ(t.weight(*n40), 4.0);
    EXPECT_EQ(t.label(*t.parent(*n40)), 20);
    // Insertion order of siblings is kept.
    EXPECT_EQ(t.label(t.children(t.root())[0]), 30);
    EXPECT_EQ(t.delta(), 0.5);
}

TEST(DPi, Examples) {
    auto unit = WeightedTree::homogeneous(2, 3);
    EXPECT_DOUBLE_EQ(d_pi(unit, unit.leaves().front(), 2.0), 4.0);
    auto grow = WeightedTree::homogeneous(2, 2, {1.0, 4.0});
    EXPECT_DOUBLE_EQ(d_pi(grow, grow.leaves().front(), 2.0), 1.3125);
    auto w = WeightedTree::homogeneous(3, 1, {2.5, 1.0});
    for (double p : {1.5, 2.0, 3.0}) {
        EXPECT_DOUBLE_EQ(d_pi(w, w.root(), p), std::pow(2.5, 1.0 - p / (p - 1.0)));
    }
    EXPECT_THROW(d_pi(unit, unit.root(), 1.0), InputError);
}

TEST(DPi, TelescopesAlongEdges) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto t = fixtures::random_tree(rng, 5, 3);
        for (double p : {1.5, 2.0, 3.0}) {
            const double q = p / (p - 1.0);
            const auto all = d_pi_all(t, p);
            for (std::uint32_t v = 1; v < t.size(); ++v) {
                const NodeId id{v};
                EXPECT_NEAR(d_pi(t, id, p), d_pi(t, *t.parent(id), p) + std::pow(t.weight(id), 1.0 - q), 1e-12);
                EXPECT_NEAR(all[v], d_pi(t, id, p), 1e-12);
            }
        }
    }
}

TEST(Confluent, BasicCases) {
    auto t = WeightedTree::homogeneous(2, 2);
    const NodeId a = t.children(t.root())[0];
    const NodeId b = t.children(t.root())[1];
    EXPECT_EQ(confluent(t, a, b), t.root());
    const NodeId a0 = t.children(a)[0];
    const NodeId a1 = t.children(a)[1];
    EXPECT_EQ(confluent(t, a0, a1), a);
    EXPECT_EQ(confluent(t, a, a0), a);
    EXPECT_EQ(confluent(t, a0, a0), a0);
    EXPECT_THROW(confluent(t, a0, NodeId{99}), InputError);
}

TEST(Confluent, CommutativeAndOnBothGeodesics) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        auto t = fixtures::random_tree(rng, 4, 3);
        for (std::uint32_t i = 0; i < t.size(); ++i) {
            for (std::uint32_t j = 0; j < t.size(); ++j) {
                const NodeId a{i}, b{j};
                const NodeId c = confluent(t, a, b);
                EXPECT_EQ(c, confluent(t, b, a));
                EXPECT_TRUE(t.is_ancestor_or_self(c, a));
                EXPECT_TRUE(t.is_ancestor_or_self(c, b));
                for (NodeId ch : t.children(c)) {
                    EXPECT_FALSE(t.is_ancestor_or_self(ch, a) && t.is_ancestor_or_self(ch, b));
                }
            }
        }
    }
}

TEST(TreeMetric, SymmetricAndZeroOnDiagonal) {
    auto t = WeightedTree::homogeneous(2, 3);
    const auto leaves = t.leaves();
    EXPECT_DOUBLE_EQ(tree_metric(t, leaves[0], leaves[0], 0.5), 0.0);
    EXPECT_DOUBLE_EQ(tree_metric(t, leaves[0], leaves[7], 0.5), tree_metric(t, leaves[7], leaves[0], 0.5));
    EXPECT_GT(tree_metric(t, leaves[0], leaves[7], 0.5), tree_metric(t, leaves[0], leaves[1], 0.5));
    EXPECT_THROW(tree_metric(t, leaves[0], leaves[1], 1.5), InputError);
}

TEST(NormalizeAntichain, Examples) {
    auto t = WeightedTree::homogeneous(2, 2);
    const NodeId l = t.children(t.root())[0];
    const NodeId r = t.children(t.root())[1];
    const NodeId lc = t.children(l)[1];
    std::vector<NodeId> dominated{lc, l};
    auto A = normalize_antichain(t, dominated);
    ASSERT_EQ(A.size(), 1u);
    EXPECT_EQ(A.nodes()[0], l);
    EXPECT_TRUE(normalize_antichain(t, std::vector<NodeId>{}).empty());
    std::vector<NodeId> siblings{r, l};
    auto S = normalize_antichain(t, siblings);
    ASSERT_EQ(S.size(), 2u);
    EXPECT_EQ(S.nodes()[0], l);
    EXPECT_EQ(S.nodes()[1], r);
    std::vector<NodeId> bad{NodeId{100}};
    EXPECT_THROW(normalize_antichain(t, bad), InputError);
    EXPECT_THROW(BoundarySet::from_antichain(t, {l, lc}), InputError);
}

TEST(NormalizeAntichain, IdempotentOnRandomSets) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        auto t = fixtures::random_tree(rng, 5, 3);
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(t.size() - 1));
        std::vector<NodeId> nodes;
        for (int k = 0; k < 6; ++k) nodes.push_back(NodeId{pick(rng)});
        auto A = normalize_antichain(t, nodes);
        EXPECT_EQ(normalize_antichain(t, A.nodes()), A);
        for (NodeId a : A.nodes()) {
            for (NodeId b : A.nodes()) {
                if (a != b) EXPECT_FALSE(t.is_ancestor_or_self(a, b));
            }
        }
        // Every input node is covered by a kept node.
        for (NodeId v : nodes) {
            bool covered = false;
            for (NodeId a : A.nodes()) covered = covered || t.is_ancestor_or_self(a, v);
            EXPECT_TRUE(covered);
        }
    }
}

TEST(Measure, UnitMassAtLeaf) {
    auto t = WeightedTree::homogeneous(2, 3);
    const NodeId leaf = t.leaves()[5];
    std::vector<std::pair<NodeId, double>> m{{leaf, 1.0}};
    auto mu = measure_from_masses(t, m);
    for (std::uint32_t v = 0; v < t.size(); ++v) {
        EXPECT_EQ(mu.istar(NodeId{v}), t.is_ancestor_or_self(NodeId{v}, leaf) ? 1.0 : 0.0);
    }
    EXPECT_EQ(mu.total(), 1.0);
}

TEST(Measure, Errors) {
    auto t = WeightedTree::homogeneous(2, 3);
    std::vector<std::pair<NodeId, double>> neg{{t.leaves()[0], -0.1}};
    EXPECT_THROW(measure_from_masses(t, neg), InputError);
    const NodeId a = t.children(t.root())[0];
    const NodeId grandchild = t.children(t.children(a)[0])[0];
    std::vector<std::pair<NodeId, double>> comparable{{a, 1.0}, {grandchild, 1.0}};
    try {
        measure_from_masses(t, comparable);
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("support not an antichain"), std::string::npos);
    }
}

TEST(Measure, IstarIsChildSumPlusOwnMass) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        auto t = fixtures::random_tree(rng, 5, 3);
        auto E = fixtures::random_antichain(rng, t);
        std::uniform_real_distribution<double> u(0.0, 2.0);
        std::vector<std::pair<NodeId, double>> m;
        for (NodeId v : E.nodes()) m.emplace_back(v, u(rng));
        auto mu = measure_from_masses(t, m);
        double total = 0.0;
        for (auto& [v, x] : m) total += x;
        EXPECT_NEAR(mu.total(), total, 1e-12);
        for (std::uint32_t v = 0; v < t.size(); ++v) {
            const NodeId id{v};
            double s = mu.mass_at(id);
            for (NodeId c : t.children(id)) s += mu.istar(c);
            EXPECT_NEAR(mu.istar(id), s, 1e-12);
        }
    }
}

TEST(TreeFile, RoundTripIsByteIdentical) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        auto t = fixtures::random_tree(rng, 4, 3, 1e-3, 1e3);
        if (trial % 2) t = t.with_delta(1.0 / 3.0);
        const std::string once = serialize_tree(t);
        const auto back = parse_tree(once);
        EXPECT_EQ(serialize_tree(back), once);
        ASSERT_EQ(back.size(), t.size());
        for (std::uint32_t v = 0; v < t.size(); ++v) {
            EXPECT_EQ(back.weight(NodeId{v}), t.weight(NodeId{v}));
            EXPECT_EQ(back.label(NodeId{v}), t.label(NodeId{v}));
        }
    }
}

TEST(TreeFile, ParsesCommentsAndRejectsGarbage) {
    const std::string text = "# a chain\ncaptree-tree 1\ndelta 0.5\n0 null 1\n\n1 0 2.5 \n";
    auto t = parse_tree(text);
    EXPECT_EQ(t.size(), 2u);
    EXPECT_EQ(t.delta(), 0.5);
    EXPECT_THROW(parse_tree("0 null 1\n"), InputError);
    EXPECT_THROW(parse_tree("captree-tree 1\n0 null x\n"), InputError);
    EXPECT_THROW(parse_tree("captree-tree 1\n0 null 1\n1 0\n"), InputError);
    EXPECT_THROW(read_tree_file("/nonexistent/tree.txt"), InputError);
}
