#include "captree/potential.hpp"

#include <algorithm>
#include <cmath>

#include "captree/errors.hpp"

namespace captree {

namespace {

void require_size(const WeightedTree& tree, std::size_t n, const char* what) {
    if (n != tree.size()) throw InputError(std::string(what) + " does not match the tree size");
}

}  // namespace

double hardy_sum(const WeightedTree& tree, const NodeFunction& f, NodeId target) {
    tree.require_valid(target);
    require_size(tree, f.size(), "node function");
    double sum = 0.0;
    std::optional<NodeId> cur = target;
    while (cur) {
        sum += f[*cur];
        cur = tree.parent(*cur);
    }
    return sum;
}

NodeFunction hardy_all(const WeightedTree& tree, const NodeFunction& f) {
    require_size(tree, f.size(), "node function");
    NodeFunction out(tree.size());
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        auto par = tree.parent(id);
        out[id] = f[id] + (par ? out[*par] : 0.0);
    }
    return out;
}

NodeFunction adjoint_field(const WeightedTree& tree, const TreeMeasure& mu) {
    require_size(tree, mu.tree_size(), "measure");
    auto f = mu.istar_field();
    return NodeFunction(std::vector<double>(f.begin(), f.end()));
}

NodeFunction subtree_sums(const WeightedTree& tree, const NodeFunction& sigma) {
    require_size(tree, sigma.size(), "node function");
    std::vector<double> out(sigma.values().begin(), sigma.values().end());
    for (std::uint32_t v = static_cast<std::uint32_t>(tree.size()); v-- > 1;) {
        out[tree.parent(NodeId{v})->value] += out[v];
    }
    return NodeFunction(std::move(out));
}

NodeFunction energy_density(const WeightedTree& tree, const TreeMeasure& mu, double p) {
    require_size(tree, mu.tree_size(), "measure");
    const double q = conjugate_exponent(p);
    NodeFunction out(tree.size());
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        const double m = mu.istar(id);
        if (m > 0.0) out[id] = std::pow(m, q) * std::pow(tree.weight(id), 1.0 - q);
    }
    return out;
}

double energy(const WeightedTree& tree, const TreeMeasure& mu, double p) {
    const NodeFunction d = energy_density(tree, mu, p);
    double sum = 0.0;
    for (double x : d.values()) sum += x;
    return sum;
}

NodeFunction potential_V_all(const WeightedTree& tree, const TreeMeasure& mu, double p) {
    require_size(tree, mu.tree_size(), "measure");
    const double q = conjugate_exponent(p);
    NodeFunction term(tree.size());
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        const double m = mu.istar(id);
        if (m > 0.0) term[id] = std::pow(tree.weight(id), 1.0 - q) * std::pow(m, q - 1.0);
    }
    return hardy_all(tree, term);
}

double potential_V(const WeightedTree& tree, const TreeMeasure& mu, double p, NodeId xi) {
    tree.require_valid(xi);
    require_size(tree, mu.tree_size(), "measure");
    const double q = conjugate_exponent(p);
    double sum = 0.0;
    std::optional<NodeId> cur = xi;
    while (cur) {
        const double m = mu.istar(*cur);
        if (m > 0.0) sum += std::pow(tree.weight(*cur), 1.0 - q) * std::pow(m, q - 1.0);
        cur = tree.parent(*cur);
    }
    return sum;
}

TestingSup testing_sup(const WeightedTree& tree, const TreeMeasure& mu, double p) {
    const NodeFunction local = subtree_sums(tree, energy_density(tree, mu, p));
    TestingSup best;
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        const double m = mu.istar(id);
        if (!(m > 0.0)) continue;
        const double r = local[id] / m;
        if (!best.where || r > best.value) {
            best.value = r;
            best.where = id;
        }
    }
    return best;
}

double carleson_norm(const WeightedTree& tree, const TreeMeasure& mu, double p) {
    const TestingSup s = testing_sup(tree, mu, p);
    if (!s.where) return 0.0;
    return std::pow(s.value, p - 1.0);
}

NodeFunction maximal_ratio_all(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& sigma) {
    require_size(tree, mu.tree_size(), "measure");
    const NodeFunction up = subtree_sums(tree, sigma);
    NodeFunction out(tree.size());
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        auto par = tree.parent(id);
        double best = par ? out[*par] : 0.0;
        const double m = mu.istar(id);
        if (m > 0.0) best = std::max(best, up[id] / m);
        out[id] = best;
    }
    return out;
}

NodeFunction maximal_fn_all(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& g) {
    require_size(tree, mu.tree_size(), "measure");
    require_size(tree, g.size(), "node function");
    if (!(mu.total() > 0.0)) throw InputError("maximal function undefined for zero measure");
    NodeFunction gmu(tree.size());
    for (const auto& a : mu.atoms()) {
        if (a.mass > 0.0 && g[a.node] < 0.0) throw InputError("maximal function needs g >= 0 on the support");
        gmu[a.node] = g[a.node] * a.mass;
    }
    return maximal_ratio_all(tree, mu, gmu);
}

double maximal_fn(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& g, NodeId zeta) {
    tree.require_valid(zeta);
    return maximal_fn_all(tree, mu, g)[zeta];
}

MaximalSides maximal_inequality_sides(const WeightedTree& tree, const TreeMeasure& mu,
                                      const NodeFunction& sigma, const NodeFunction& g, double p) {
    const double q = conjugate_exponent(p);
    const NodeFunction mg = maximal_fn_all(tree, mu, g);
    const NodeFunction ms = maximal_ratio_all(tree, mu, sigma);
    MaximalSides out;
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        if (sigma[id] > 0.0 && mg[id] > 0.0) out.lhs += sigma[id] * std::pow(mg[id], q);
    }
    for (const auto& a : mu.atoms()) {
        if (a.mass > 0.0 && g[a.node] > 0.0) out.rhs += std::pow(g[a.node], q) * ms[a.node] * a.mass;
    }
    return out;
}

double trace_ratio(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& f, double p) {
    require_size(tree, f.size(), "node function");
    double den = 0.0;
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        if (f[id] < 0.0) throw InputError("trace ratio needs f >= 0");
        if (f[id] > 0.0) den += std::pow(f[id], p) * tree.weight(id);
    }
    if (!(den > 0.0)) return 0.0;
    const NodeFunction If = hardy_all(tree, f);
    double num = 0.0;
    for (const auto& a : mu.atoms()) {
        if (a.mass > 0.0 && If[a.node] > 0.0) num += std::pow(If[a.node], p) * a.mass;
    }
    return num / den;
}

}  // namespace captree
