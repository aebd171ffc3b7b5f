#include "captree/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "captree/capacity.hpp"
#include "captree/dyadic.hpp"
#include "captree/errors.hpp"
#include "captree/instances.hpp"
#include "captree/lab.hpp"
#include "captree/potential.hpp"
#include "captree/tree_io.hpp"

namespace captree {

namespace {

constexpr std::uint64_t kSeed = 20240601;

std::string g(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

double rel(double a, double b) { return b == 0.0 ? std::abs(a) : std::abs(a - b) / std::abs(b); }

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Instances shared by criteria 1 and 3: 100 trees, depth <= 4, branching <= 3, weights in [0.5, 2].
std::vector<WeightedTree> small_trees(std::uint64_t seed, int count) {
    std::mt19937_64 rng(seed);
    std::vector<WeightedTree> out;
    for (int i = 0; i < count; ++i) out.push_back(instances::random_tree(rng, 4, 3));
    return out;
}

const double kExponents[] = {1.5, 2.0, 3.0};

Outcome oracle_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(kSeed + 1);
    double worst_primal = 0.0, worst_dual = 0.0;
    int runs = 0;
    for (const auto& t : small_trees(kSeed + 1, 100)) {
        const auto E = instances::random_antichain(rng, t);
        for (double p : kExponents) {
            const double cap = capacity(t, E, p);
            worst_primal = std::max(worst_primal, rel(capacity_primal_oracle(t, E, p).value, cap));
            worst_dual = std::max(worst_dual, rel(capacity_dual_oracle(t, E, p).value, cap));
            ++runs;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst_primal <= 1e-3 && worst_dual <= 1e-3 && secs < 60.0,
            std::to_string(runs) + " runs, max rel err primal " + g(worst_primal) + ", dual " + g(worst_dual) +
                ", " + g(secs) + " s"};
}

Outcome closed_forms() {
    double worst_binary = 0.0, worst_chain = 0.0;
    for (std::size_t h = 0; h <= 20; ++h) {
        const auto t = WeightedTree::homogeneous(2, h);
        const double exact = std::ldexp(1.0, static_cast<int>(h)) / (std::ldexp(1.0, static_cast<int>(h) + 1) - 1.0);
        worst_binary = std::max(worst_binary, rel(capacity(t, BoundarySet::from_antichain(t, t.leaves()), 2.0), exact));
    }
    for (std::size_t n = 0; n <= 50; ++n) {
        const auto t = WeightedTree::chain(n);
        const double exact = 1.0 / static_cast<double>(n + 1);
        worst_chain = std::max(worst_chain, rel(capacity(t, BoundarySet::from_antichain(t, t.leaves()), 2.0), exact));
    }
    // "Exact to roundoff": a few ulps per level of the recursion.
    return {worst_binary <= 1e-10 && worst_chain <= 1e-13,
            "binary h=0..20 max rel err " + g(worst_binary) + ", chain n=0..50 max rel err " + g(worst_chain)};
}

Outcome point_capacity() {
    double worst = 0.0, worst_leaf = 0.0;
    long checked = 0;
    for (const auto& t : small_trees(kSeed + 3, 100)) {
        for (double p : kExponents) {
            const double q = p / (p - 1.0);
            for (std::uint32_t v = 0; v < t.size(); ++v) {
                const NodeId id{v};
                double d = 0.0;
                for (std::optional<NodeId> a = id; a; a = t.parent(*a)) d += std::pow(t.weight(*a), 1.0 - q);
                const double cp = capacity_point(t, id, p);
                worst = std::max(worst, rel(cp, std::pow(d, 1.0 - p)));
                if (t.is_leaf(id)) {
                    worst_leaf = std::max(worst_leaf, rel(capacity(t, BoundarySet::from_antichain(t, {id}), p), cp));
                }
                ++checked;
            }
        }
    }
    return {worst <= 1e-12 && worst_leaf <= 1e-12,
            std::to_string(checked) + " nodes, max rel err " + g(worst) + ", leaf recursion vs formula " +
                g(worst_leaf)};
}

Outcome equilibrium_diagnostics() {
    std::mt19937_64 rng(kSeed + 4);
    double worst_constraint = 0.0, worst_root = 0.0, worst_norm = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto t = instances::random_tree(rng, 4, 3);
        const auto E = instances::random_antichain(rng, t);
        const double p = kExponents[i % 3];
        const auto eq = equilibrium(t, E, p);
        const NodeFunction If = hardy_all(t, eq.phi);
        for (NodeId l : covered_leaves(t, E)) worst_constraint = std::max(worst_constraint, std::abs(If[l] - 1.0));
        worst_root = std::max(worst_root, rel(std::pow(eq.phi[t.root()], p - 1.0) * t.weight(t.root()), eq.capacity));
        worst_norm = std::max(worst_norm, std::abs(carleson_norm(t, eq.mu, p) - 1.0));
    }
    return {worst_constraint <= 1e-8 && worst_root <= 1e-10 && worst_norm <= 1e-6,
            "50 instances, max |I phi - 1| " + g(worst_constraint) + ", root formula rel err " + g(worst_root) +
                ", max |[mu] - 1| " + g(worst_norm)};
}

Outcome cmcap() {
    std::mt19937_64 rng(kSeed + 5);
    int failed = 0;
    double worst_supported = 0.0, worst_free = 0.0;
    for (int i = 0; i < 50; ++i) {
        const auto t = instances::random_tree(rng, 4, 3);
        const auto E = instances::random_antichain(rng, t);
        const double p = kExponents[i % 3];
        const auto r = check_cmcap(t, E, p, 200, kSeed + 500 + i);
        failed += !r.pass;
        worst_supported = std::max(worst_supported, r.details[0].second / r.right);
        worst_free = std::max(worst_free, r.details[2].second / *r.bound);
    }
    return {failed == 0, "50 instances, " + std::to_string(failed) + " failed; max supported ratio/Cap " +
                             g(worst_supported) + ", max unrestricted ratio/(p^(p-1) Cap) " + g(worst_free)};
}

Outcome monotonicity() {
    std::mt19937_64 rng(kSeed + 6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int failed = 0, used = 0;
    double worst_norm = 0.0, worst_root = 0.0;
    while (used < 200) {
        const auto t = instances::random_tree(rng, 4, 3);
        const double p = kExponents[used % 3];
        TreeMeasure mu = (used % 2 == 0) ? instances::random_leaf_measure(rng, t, 0.3)
                                         : equilibrium(t, instances::random_antichain(rng, t), p).mu;
        if (mu.is_zero()) continue;
        NodeFunction lambda(t.size());
        for (std::uint32_t v = 0; v < t.size(); ++v) {
            const double x = u(rng);
            lambda[NodeId{v}] = x < 0.1 ? 0.0 : (x > 0.9 ? 1.0 : u(rng));
        }
        const auto r = check_monotonicity(t, mu, lambda, p);
        failed += !r.pass;
        worst_norm = std::max(worst_norm, r.details[2].second / *r.bound);
        worst_root = std::max(worst_root, r.ratio);
        ++used;
    }
    return {failed == 0, "200 pairs, " + std::to_string(failed) + " failed; max [lambda mu]/(p^(p-1)[mu]) " +
                             g(worst_norm) + ", max root I*sigma/(p I*(lambda mu)) " + g(worst_root)};
}

Outcome testing_capacitary() {
    std::mt19937_64 rng(kSeed + 7);
    std::vector<std::tuple<WeightedTree, TreeMeasure, double, std::string>> cases;
    for (int i = 0; i < 7; ++i) {
        auto t = instances::random_tree(rng, 4, 3);
        const double p = kExponents[i % 3];
        auto mu = equilibrium(t, instances::random_antichain(rng, t), p).mu;
        cases.emplace_back(std::move(t), std::move(mu), p, "equilibrium");
    }
    for (int i = 0; i < 7; ++i) {
        auto t = instances::random_tree(rng, 4, 3);
        const auto leaves = t.leaves();
        const NodeId leaf = leaves[std::uniform_int_distribution<std::size_t>(0, leaves.size() - 1)(rng)];
        std::vector<std::pair<NodeId, double>> m{{leaf, 1.0}};
        auto mu = measure_from_masses(t, m);
        cases.emplace_back(std::move(t), std::move(mu), kExponents[i % 3], "atom");
    }
    const auto space = make_space("interval", 6);
    const std::pair<double, double> sp[] = {{0.5, 2.0}, {0.6, 2.0}, {0.75, 2.0}, {2.0 / 3.0, 3.0}, {0.8, 3.0}, {0.5, 1.5}};
    for (auto [s, p] : sp) {
        auto t = weight_pi_s(space, s, p);
        std::vector<std::pair<NodeId, double>> m;
        for (NodeId l : t.leaves()) m.emplace_back(l, space.cell_mass(l));
        auto mu = measure_from_masses(t, m);
        cases.emplace_back(std::move(t), std::move(mu), p, "lebesgue");
    }
    int failed = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const auto& [t, mu, p, kind] = cases[i];
        std::vector<BoundarySet> family;
        for (int k = 0; k < 6; ++k) family.push_back(instances::random_antichain(rng, t));
        for (std::size_t d = 1; d <= 2; ++d) {
            for (NodeId v : t.nodes_at_depth(d)) family.push_back(BoundarySet::from_antichain(t, {v}));
        }
        const auto r = check_trace_conditions(t, mu, p, family, 20, kSeed + 700 + i);
        failed += !r.pass;
        worst = std::max(worst, r.ratio);
    }
    return {failed == 0, std::to_string(cases.size()) + " measures, " + std::to_string(failed) +
                             " failed; max mu(E)/(p^(p-1) C_1 Cap(E)) " + g(worst)};
}

// Root-to-a chain of length k followed by a full binary subtree of height
// `below`, with the interval weights m^e, m = 2^-depth. Its spanning subtree
// over a is the one of the interval space truncated at depth k + below.
WeightedTree chain_over_binary(std::size_t k, std::size_t below, double e) {
    auto w = [&](std::size_t d) { return std::pow(2.0, -e * static_cast<double>(d)); };
    std::vector<NodeRecord> recs{{0, std::nullopt, w(0)}};
    std::int64_t id = 0;
    for (std::size_t d = 1; d <= k; ++d, ++id) recs.push_back({id + 1, id, w(d)});
    std::vector<std::int64_t> frontier{id};
    for (std::size_t d = k + 1; d <= k + below; ++d) {
        std::vector<std::int64_t> next;
        for (std::int64_t parent : frontier) {
            for (int c = 0; c < 2; ++c) {
                recs.push_back({++id, parent, w(d)});
                next.push_back(id);
            }
        }
        frontier.swap(next);
    }
    return WeightedTree::from_records(recs);
}

Outcome ball_capacities() {
    const std::pair<double, double> sp[] = {{0.5, 2.0}, {0.6, 2.0}, {0.75, 2.0}, {2.0 / 3.0, 3.0}};
    bool pass = true;
    std::string detail;
    for (auto [s, p] : sp) {
        const double q = p / (p - 1.0);
        const double e = (s * q - 1.0) / (q - 1.0);
        std::vector<std::pair<double, double>> series;
        double lo = INFINITY, hi = 0.0;
        for (std::size_t k = 1; k <= 12; ++k) {
            const auto t = chain_over_binary(k, 14, e);
            const NodeId a{static_cast<std::uint32_t>(k)};
            const double r = capacity(t, BoundarySet::from_antichain(t, {a}), p) / capacity_point(t, a, p);
            series.emplace_back(static_cast<double>(k), r);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        const double slope = log_slope(series);
        const bool ok = lo > 0.0 && hi <= 1.0 + 1e-9 && std::abs(slope) <= 0.05;
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += "(s,p)=(" + g(s) + "," + g(p) + ") window [" + g(lo) + "," + g(hi) + "] slope " + g(slope) +
                  (ok ? "" : " FAIL");
    }
    return {pass, detail};
}

Outcome energy_and_transfer() {
    bool pass = true;
    std::string detail;
    const std::vector<std::size_t> depths{4, 5, 6, 7, 8, 9, 10};
    for (const char* kind : {"interval", "cantor"}) {
        const auto space = make_space(kind, 10);
        const SpaceMeasure natural{{{space.tree().root(), 1.0}}, {}};
        const auto r = check_energy_equivalence(space, natural, 0.5, 2.0, depths);
        pass = pass && r.pass;
        detail += std::string(kind) + " energy window [" + g(r.details[0].second) + "," + g(r.details[1].second) +
                  "] slope " + g(r.details[2].second) + "; ";
    }
    const auto space = make_space("interval", 12);
    const auto tree = weight_pi_s(space, 0.5, 2.0);
    for (const char* set : {"interval 0 1", "interval 0 1/3", "ifs 1/3 0 1/3 2/3"}) {
        const auto sd = SetDescriptor::parse(set, 1);
        std::vector<std::pair<double, double>> series;
        double lo = INFINITY, hi = 0.0;
        for (std::size_t n : depths) {
            const double r = capacity(tree, discretize_set(space, sd, n), 2.0) /
                             capacity(tree, discretize_set(space, sd, n + 2), 2.0);
            series.emplace_back(static_cast<double>(n), r);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        const double slope = log_slope(series);
        pass = pass && std::isfinite(lo) && lo > 0.0 && std::abs(slope) <= 0.05;
        detail += "'" + std::string(set) + "' Cap(n)/Cap(n+2) window [" + g(lo) + "," + g(hi) + "] slope " + g(slope) +
                  "; ";
    }
    detail.resize(detail.size() - 2);
    return {pass, detail};
}

Outcome mww() {
    const auto space = make_space("interval", 16);
    bool pass = true;
    std::string detail;
    const SpaceMeasure lebesgue{{{space.tree().root(), 1.0}}, {}};
    const SpaceMeasure atom{{}, {{Point{1.0 / 3.0}, 1.0}}};
    for (double q : kExponents) {
        for (const auto& [name, omega] : {std::pair{"lebesgue", lebesgue}, std::pair{"atom", atom}}) {
            std::vector<std::pair<double, double>> series, wolff;
            bool elementary = true;
            for (std::size_t n = 4; n <= 10; ++n) {
                const auto r = check_mww(space, omega, q, n, 0.5);
                elementary = elementary && r.pass;
                series.emplace_back(static_cast<double>(n), r.ratio);
                wolff.emplace_back(static_cast<double>(n), r.details[1].second);
            }
            const double slope = log_slope(series), wslope = log_slope(wolff);
            const bool ok = elementary && std::abs(slope) <= 0.05 && std::abs(wslope) <= 0.05;
            pass = pass && ok;
            if (!detail.empty()) detail += "; ";
            detail += "q=" + g(q) + " " + name + " slope " + g(slope) + "/" + g(wslope) + (ok ? "" : " FAIL");
        }
    }
    return {pass, detail};
}

Outcome nested_monotonicity() {
    std::mt19937_64 rng(kSeed + 11);
    int violations = 0;
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const auto t = instances::random_tree(rng, 4, 3);
        const double p = kExponents[i % 3];
        const auto F = instances::random_antichain(rng, t);
        std::vector<NodeId> inner;
        if (i % 2 == 0) {
            // Set monotonicity: a nonempty sub-collection of the cylinders.
            std::bernoulli_distribution keep(0.6);
            for (NodeId v : F.nodes()) {
                if (keep(rng)) inner.push_back(v);
            }
            if (inner.empty()) inner.push_back(F.nodes().front());
        } else {
            // Truncation: every node replaced by a strict descendant when it has one.
            for (NodeId v : F.nodes()) {
                NodeId w = v;
                do {
                    const auto ch = t.children(w);
                    if (ch.empty()) break;
                    w = ch[std::uniform_int_distribution<std::size_t>(0, ch.size() - 1)(rng)];
                } while (std::bernoulli_distribution(0.5)(rng));
                inner.push_back(w);
            }
        }
        const double small = capacity(t, normalize_antichain(t, inner), p);
        const double big = capacity(t, F, p);
        worst = std::max(worst, small / big - 1.0);
        violations += small > big * (1.0 + 1e-12);
    }
    // Decreasing covers of the Cantor set.
    const auto space = make_space("interval", 12);
    const auto tree = weight_pi_s(space, 0.6, 2.0);
    const auto sd = SetDescriptor::parse("ifs 1/3 0 1/3 2/3", 1);
    double prev = INFINITY;
    for (std::size_t n = 0; n <= 12; ++n) {
        const double c = capacity(tree, discretize_set(space, sd, n), 2.0);
        violations += c > prev * (1.0 + 1e-12);
        prev = c;
    }
    return {violations == 0, "200 pairs + Cantor covers n=0..12, " + std::to_string(violations) +
                                 " violations, max Cap(inner)/Cap(outer) - 1 = " + g(worst)};
}

Outcome round_trip() {
    std::mt19937_64 rng(kSeed + 12);
    int mismatches = 0;
    std::vector<WeightedTree> trees;
    for (int i = 0; i < 100; ++i) trees.push_back(instances::random_tree(rng, 5, 4, 1e-3, 1e3));
    trees.push_back(WeightedTree::homogeneous(3, 4, {0.7, 1.0 / 3.0}).with_delta(1.0 / 3.0));
    trees.push_back(weight_pi_s(make_space("cantor", 5), 0.9, 2.0));
    for (const auto& t : trees) {
        const std::string once = serialize_tree(t);
        const std::string twice = serialize_tree(parse_tree(once));
        mismatches += once != twice;
        const auto back = parse_tree(once);
        for (std::uint32_t v = 0; v < t.size(); ++v) mismatches += back.weight(NodeId{v}) != t.weight(NodeId{v});
    }
    // Exit-code contract of selftest.
    CriterionResult ok{1, "", true, false, "", 0.0}, bad{2, "", false, false, "", 0.0}, stuck{3, "", false, true, "", 0.0};
    const bool codes = acceptance_exit_code({ok, ok}) == 0 && acceptance_exit_code({ok, bad}) == 2 &&
                       acceptance_exit_code({ok, stuck}) == 3 && acceptance_exit_code({stuck, bad}) == 2;
    return {mismatches == 0 && codes, std::to_string(trees.size()) + " trees, " + std::to_string(mismatches) +
                                          " mismatches; exit-code mapping " + (codes ? "ok" : "wrong")};
}

struct Criterion {
    int id;
    const char* title;
    Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "oracle equivalence", oracle_equivalence},
    {2, "closed forms", closed_forms},
    {3, "point capacity formula", point_capacity},
    {4, "equilibrium diagnostics", equilibrium_diagnostics},
    {5, "capacity as sup of mass over testing norm", cmcap},
    {6, "monotonicity of the testing condition", monotonicity},
    {7, "testing implies capacitary", testing_capacitary},
    {8, "ball capacities", ball_capacities},
    {9, "energy equivalence and capacity transfer", energy_and_transfer},
    {10, "MWW harness", mww},
    {11, "set and truncation monotonicity", nested_monotonicity},
    {12, "round trip and selftest exit code", round_trip},
};

}  // namespace

int acceptance_count() { return static_cast<int>(std::size(kCriteria)); }

std::vector<CriterionResult> run_acceptance(const std::vector<int>& only,
                                            const std::function<void(const CriterionResult&)>& sink) {
    std::vector<CriterionResult> out;
    for (const auto& c : kCriteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        CriterionResult r;
        r.id = c.id;
        r.title = c.title;
        const auto start = std::chrono::steady_clock::now();
        try {
            const Outcome o = c.run();
            r.pass = o.pass;
            r.detail = o.detail;
        } catch (const ConvergenceError& e) {
            r.pass = false;
            r.nonconvergence = true;
            r.detail = std::string("oracle did not converge: ") + e.what();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("error: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (sink) sink(r);
        out.push_back(std::move(r));
    }
    return out;
}

std::string format_criterion(const CriterionResult& r) {
    char head[16];
    std::snprintf(head, sizeof head, "%2d", r.id);
    return std::string(r.pass ? "PASS" : "FAIL") + "  " + head + "  " + r.title + ": " + r.detail;
}

int acceptance_exit_code(const std::vector<CriterionResult>& results) {
    bool check_failed = false, stuck = false;
    for (const auto& r : results) {
        if (r.pass) continue;
        (r.nonconvergence ? stuck : check_failed) = true;
    }
    return check_failed ? 2 : (stuck ? 3 : 0);
}

}  // namespace captree
