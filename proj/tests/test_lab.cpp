#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "captree/capacity.hpp"
#include "captree/errors.hpp"
#include "captree/lab.hpp"
#include "captree/potential.hpp"
#include "random_instances.hpp"

using namespace captree;

namespace {

BoundarySet leaves_of(const WeightedTree& t) { return BoundarySet::from_antichain(t, t.leaves()); }

TreeMeasure delta_at(const WeightedTree& t, NodeId v, double mass = 1.0) {
    std::vector<std::pair<NodeId, double>> m{{v, mass}};
    return measure_from_masses(t, m);
}

double detail(const CheckReport& r, const std::string& key) {
    for (const auto& [k, v] : r.details) {
        if (k == key) return v;
    }
    ADD_FAILURE() << "missing detail " << key;
    return NAN;
}

}  // namespace

TEST(LogSlope, RecoversExponentialRate) {
    std::vector<std::pair<double, double>> xy;
    for (int n = 0; n < 6; ++n) xy.emplace_back(n, 3.0 * std::exp(-0.2 * n));
    EXPECT_NEAR(log_slope(xy), -0.2, 1e-12);
    EXPECT_EQ(log_slope({{1.0, 2.0}}), 0.0);
}

TEST(PullBack, ConservesMass) {
    auto s = make_space("interval", 8);
    SpaceMeasure w{{{s.node_at(2, 1), 0.5}, {s.node_at(7, 3), 0.25}}, {{Point{0.5}, 1.0}, {Point{1.0 / 3.0}, 2.0}}};
    for (std::size_t n : {0u, 2u, 5u, 8u}) {
        const auto nu = pull_back(s, w, n);
        EXPECT_NEAR(nu.total(), 3.75, 1e-14);
        for (const auto& a : nu.atoms()) EXPECT_EQ(s.level(a.node), n);
    }
    // Uniform piece spreads evenly.
    const auto nu = pull_back(s, SpaceMeasure{{{s.tree().root(), 1.0}}, {}}, 3);
    for (const auto& a : nu.atoms()) EXPECT_DOUBLE_EQ(a.mass, 0.125);
}

TEST(CheckMww, LebesgueIsNonTrending) {
    auto s = make_space("interval", 14);
    SpaceMeasure leb{{{s.tree().root(), 1.0}}, {}};
    std::vector<std::pair<double, double>> series;
    for (std::size_t n = 4; n <= 10; ++n) {
        const auto r = check_mww(s, leb, 2.0, n);
        EXPECT_TRUE(r.pass) << r.note;
        EXPECT_GE(r.ratio, 1.0);
        EXPECT_GE(detail(r, "ratio_wolff"), 1.0 - 1e-12);
        series.emplace_back(n, r.ratio);
    }
    EXPECT_LE(std::abs(log_slope(series)), 0.05);
}

TEST(CheckMww, SingleLeafAtomAndZero) {
    auto s = make_space("interval", 8);
    const auto r = check_mww(s, delta_at(s.tree(), s.node_at(8, 77)), 1.5, 6);
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(std::isfinite(r.ratio));
    EXPECT_GT(r.ratio, 0.0);
    const auto z = check_mww(s, TreeMeasure::zero(s.tree()), 2.0, 5);
    EXPECT_TRUE(z.pass);
    EXPECT_EQ(z.left, 0.0);
    EXPECT_EQ(z.right, 0.0);
    EXPECT_THROW(check_mww(s, TreeMeasure::zero(s.tree()), 0.5, 5), InputError);
    // q = 1: the elementary direction is an identity.
    const auto one = check_mww(s, SpaceMeasure{{{s.tree().root(), 1.0}}, {}}, 1.0, 4);
    EXPECT_NEAR(detail(one, "ratio_wolff"), 1.0, 1e-12);
}

TEST(CheckMww, CubeAndCantor) {
    auto q = make_space("cube:2", 5);
    EXPECT_TRUE(check_mww(q, SpaceMeasure{{{q.tree().root(), 1.0}}, {}}, 2.0, 3).pass);
    auto c = make_space("cantor", 8);
    EXPECT_TRUE(check_mww(c, SpaceMeasure{{}, {{Point{0.25}, 1.0}}}, 2.0, 5).pass);
}

TEST(CheckCmcap, ChainLeafAndBinary) {
    for (std::size_t n : {0u, 3u, 7u}) {
        const auto t = WeightedTree::chain(n);
        const NodeId leaf = t.leaves().front();
        EXPECT_NEAR(carleson_norm(t, delta_at(t, leaf), 2.0), n + 1.0, 1e-12);
        const auto r = check_cmcap(t, BoundarySet::from_antichain(t, {leaf}), 2.0, 20, 1);
        EXPECT_TRUE(r.pass) << r.note;
        EXPECT_NEAR(r.left, 1.0 / (n + 1.0), 1e-12);
        EXPECT_NEAR(r.right, 1.0 / (n + 1.0), 1e-12);
    }
    const auto b = WeightedTree::homogeneous(2, 2);
    const auto r = check_cmcap(b, leaves_of(b), 2.0, 50, 2);
    EXPECT_TRUE(r.pass);
    EXPECT_NEAR(r.left, 4.0 / 7.0, 1e-12);
    EXPECT_EQ(*r.bound, 2.0);
    EXPECT_THROW(check_cmcap(b, BoundarySet{}, 2.0, 5, 0), InputError);
}

TEST(CheckCmcap, RandomInstances) {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 20; ++i) {
        const auto t = fixtures::random_tree(rng, 4, 3);
        const auto E = fixtures::random_antichain(rng, t);
        for (double p : {1.5, 2.0, 3.0}) {
            const auto r = check_cmcap(t, E, p, 30, 100 + i);
            EXPECT_TRUE(r.pass) << r.note << " " << r.instance;
            EXPECT_LE(detail(r, "max_supported_ratio"), r.right * (1 + 1e-8));
        }
    }
}

TEST(CheckMonotonicity, TrivialMultipliers) {
    const auto t = WeightedTree::homogeneous(3, 3, {1.0, 0.7});
    std::mt19937_64 rng(3);
    const auto mu = fixtures::random_leaf_measure(rng, t);
    const auto one = check_monotonicity(t, mu, NodeFunction(t.size(), 1.0), 2.5);
    EXPECT_TRUE(one.pass);
    EXPECT_NEAR(detail(one, "norm_ratio"), 1.0, 1e-12);
    EXPECT_LE(detail(one, "max_local_ratio"), 1.0 + 1e-12);
    const auto zero = check_monotonicity(t, mu, NodeFunction(t.size(), 0.0), 2.5);
    EXPECT_TRUE(zero.pass);
    EXPECT_EQ(zero.left, 0.0);
    EXPECT_EQ(zero.right, 0.0);
    EXPECT_THROW(check_monotonicity(t, mu, NodeFunction(t.size(), 1.5), 2.0), InputError);
    EXPECT_THROW(check_monotonicity(t, mu, NodeFunction(t.size(), -0.1), 2.0), InputError);
}

TEST(CheckMonotonicity, EquilibriumWithRandomMultipliers) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 40; ++i) {
        const auto t = fixtures::random_tree(rng, 4, 3);
        const double p = (i % 3 == 0) ? 1.5 : (i % 3 == 1 ? 2.0 : 3.0);
        const auto eq = equilibrium(t, fixtures::random_antichain(rng, t), p);
        NodeFunction lambda(t.size());
        for (std::uint32_t v = 0; v < t.size(); ++v) lambda[NodeId{v}] = u(rng);
        const auto r = check_monotonicity(t, eq.mu, lambda, p);
        EXPECT_TRUE(r.pass) << r.note;
        EXPECT_NEAR(detail(r, "base_norm"), 1.0, 1e-9);
    }
}

TEST(CheckTrace, EquilibriumAndDelta) {
    const auto b = WeightedTree::homogeneous(2, 3);
    const auto E = leaves_of(b);
    const auto eq = equilibrium(b, E, 2.0);
    const auto r = check_trace_conditions(b, eq.mu, 2.0, {E}, 10, 5);
    EXPECT_TRUE(r.pass) << r.note;
    EXPECT_NEAR(detail(r, "testing_constant"), 1.0, 1e-9);
    EXPECT_NEAR(r.left, 1.0, 1e-9);

    const std::size_t n = 5;
    const auto c = WeightedTree::chain(n);
    const NodeId leaf = c.leaves().front();
    const auto d = check_trace_conditions(c, delta_at(c, leaf), 2.0, {BoundarySet::from_antichain(c, {leaf})}, 10, 6);
    EXPECT_TRUE(d.pass);
    EXPECT_NEAR(detail(d, "testing_constant"), n + 1.0, 1e-12);
    EXPECT_NEAR(d.left, 1.0, 1e-12);  // mu(E) = C_1 Cap(E) exactly
    EXPECT_GE(detail(d, "embedding_lower"), (n + 1.0) * (1 - 1e-9));

    const auto z = check_trace_conditions(b, TreeMeasure::zero(b), 2.0, {E}, 5, 7);
    EXPECT_TRUE(z.pass);
    EXPECT_EQ(detail(z, "testing_constant"), 0.0);
    EXPECT_EQ(detail(z, "embedding_lower"), 0.0);
}

TEST(CheckTrace, RandomMeasuresAndCylinderFamilies) {
    std::mt19937_64 rng(77);
    for (int i = 0; i < 20; ++i) {
        const auto t = fixtures::random_tree(rng, 4, 3);
        const double p = (i % 2 == 0) ? 1.5 : 3.0;
        std::vector<BoundarySet> family;
        for (int k = 0; k < 5; ++k) family.push_back(fixtures::random_antichain(rng, t));
        const auto mu = fixtures::random_leaf_measure(rng, t);
        const auto r = check_trace_conditions(t, mu, p, family, 20, i);
        EXPECT_TRUE(r.pass) << r.note;
        if (!mu.is_zero()) EXPECT_GE(*r.empirical, 1.0 - 1e-9);
    }
}

TEST(CheckShadow, Examples) {
    const auto b = WeightedTree::homogeneous(2, 2);
    const auto full = check_shadow(b, BoundarySet::from_antichain(b, {b.root()}), 2.0);
    EXPECT_TRUE(full.pass) << full.note;
    EXPECT_NEAR(full.left, 1.0, 1e-12);
    EXPECT_NEAR(full.right, 4.0 / 7.0, 1e-12);
    EXPECT_NEAR(full.ratio, 7.0 / 4.0, 1e-12);
    EXPECT_LE(detail(full, "interior_oracle_gap"), 1e-6);

    auto s = make_space("interval", 8);
    const auto t = weight_pi_s(s, 0.75, 2.0);
    const NodeId x = s.node_at(3, 5);
    const auto one = check_shadow(t, BoundarySet::from_antichain(t, {x}), 2.0);
    EXPECT_TRUE(one.pass);
    EXPECT_NEAR(one.left, capacity_point(t, x, 2.0), 1e-12 * one.left);
    EXPECT_GE(one.ratio, 1.0);

    const auto empty = check_shadow(b, BoundarySet{}, 2.0);
    EXPECT_TRUE(empty.pass);
    EXPECT_EQ(empty.note, "empty set");

    const auto floor = check_shadow(b, BoundarySet::from_antichain(b, {b.root()}), 2.0, 0.9);
    EXPECT_EQ(floor.note, "hypothesis not satisfied");
}

TEST(CheckShadow, RandomUnionsOnWeightedSpace) {
    auto s = make_space("interval", 7);
    std::mt19937_64 rng(12);
    for (double sv : {0.5, 0.75}) {
        const auto t = weight_pi_s(s, sv, 2.0);
        for (int i = 0; i < 5; ++i) {
            const auto r = check_shadow(t, fixtures::random_antichain(rng, t, 0.5, 0.5), 2.0);
            EXPECT_TRUE(r.pass) << r.note;
            EXPECT_GE(r.ratio, 1.0 - 1e-9);
        }
    }
}

TEST(CheckEnergy, LebesgueZeroAndHomogeneity) {
    auto s = make_space("interval", 10);
    const std::vector<std::size_t> depths{4, 5, 6, 7, 8};
    SpaceMeasure leb{{{s.tree().root(), 1.0}}, {}};
    const auto r = check_energy_equivalence(s, leb, 0.5, 2.0, depths);
    EXPECT_TRUE(r.pass) << r.note;
    EXPECT_EQ(r.series.size(), depths.size());
    const auto r3 = check_energy_equivalence(s, SpaceMeasure{{{s.tree().root(), 3.0}}, {}}, 0.5, 2.0, depths);
    for (std::size_t i = 0; i < depths.size(); ++i) EXPECT_NEAR(r3.series[i].second, r.series[i].second, 1e-12);
    const auto z = check_energy_equivalence(s, SpaceMeasure{}, 0.5, 2.0, depths);
    EXPECT_TRUE(z.pass);
    EXPECT_EQ(z.left, 0.0);
    EXPECT_EQ(z.right, 0.0);
    EXPECT_THROW(check_energy_equivalence(s, leb, 0.5, 2.0, {}), InputError);
}

TEST(CheckMaximal, ExplicitConstantOnRandomTrees) {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 15; ++i) {
        const auto t = fixtures::random_tree(rng, 4, 3);
        for (double p : {1.5, 2.0, 3.0}) {
            const auto r = check_maximal(t, p, 10, i);
            EXPECT_TRUE(r.pass) << r.ratio << " vs " << *r.bound;
        }
    }
}
