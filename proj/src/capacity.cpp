#include "captree/capacity.hpp"

#include <cmath>

#include "captree/errors.hpp"
#include "captree/potential.hpp"

namespace captree {

namespace {

// Relative capacity for every node when the nodes flagged in `terminal` are
// the constraint points. A terminal node contributes its own weight.
NodeFunction fold_capacities(const WeightedTree& tree, const std::vector<char>& terminal, double p) {
    const double q = conjugate_exponent(p);
    NodeFunction c(tree.size());
    std::vector<double> child_sum(tree.size(), 0.0);
    for (std::uint32_t v = static_cast<std::uint32_t>(tree.size()); v-- > 0;) {
        const NodeId id{v};
        double cv = 0.0;
        if (terminal[v]) {
            cv = tree.weight(id);
        } else if (child_sum[v] > 0.0) {
            const double S = child_sum[v];
            cv = S / std::pow(1.0 + std::pow(tree.weight(id), 1.0 - q) * std::pow(S, q - 1.0), p - 1.0);
        }
        c[id] = cv;
        if (v > 0) child_sum[tree.parent(id)->value] += cv;
    }
    return c;
}

std::vector<char> leaf_terminals(const WeightedTree& tree, const BoundarySet& E) {
    std::vector<char> t = covered_mask(tree, E);
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        if (!tree.is_leaf(NodeId{v})) t[v] = 0;
    }
    return t;
}

}  // namespace

NodeFunction relative_capacities(const WeightedTree& tree, const BoundarySet& E, double p) {
    conjugate_exponent(p);
    for (NodeId v : E.nodes()) tree.require_valid(v);
    return fold_capacities(tree, leaf_terminals(tree, E), p);
}

double capacity(const WeightedTree& tree, const BoundarySet& E, double p) {
    conjugate_exponent(p);
    if (E.empty()) return 0.0;
    return relative_capacities(tree, E, p)[tree.root()];
}

double capacity_interior(const WeightedTree& tree, std::span<const NodeId> nodes, double p) {
    conjugate_exponent(p);
    const BoundarySet A = BoundarySet::from_antichain(tree, std::vector<NodeId>(nodes.begin(), nodes.end()));
    if (A.empty()) return 0.0;
    std::vector<char> terminal(tree.size(), 0);
    for (NodeId v : A.nodes()) terminal[v.value] = 1;
    return fold_capacities(tree, terminal, p)[tree.root()];
}

double capacity_point(const WeightedTree& tree, NodeId zeta, double p) {
    return std::pow(d_pi(tree, zeta, p), 1.0 - p);
}

EquilibriumResult equilibrium(const WeightedTree& tree, const BoundarySet& E, double p) {
    const double q = conjugate_exponent(p);
    if (E.empty()) throw InputError("equilibrium needs a nonempty set");
    const NodeFunction c = relative_capacities(tree, E, p);

    EquilibriumResult out;
    out.capacity = c[tree.root()];
    out.phi = NodeFunction(tree.size());
    // target[v]: the part of the unit constraint still to be met from v downwards.
    std::vector<double> target(tree.size(), 0.0);
    target[0] = 1.0;
    std::vector<std::pair<NodeId, double>> masses;
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        if (!(c[id] > 0.0)) continue;
        const double phi = target[v] * std::pow(c[id] / tree.weight(id), q - 1.0);
        out.phi[id] = phi;
        const double rest = target[v] - phi;
        for (NodeId ch : tree.children(id)) target[ch.value] = rest;
        if (tree.is_leaf(id)) masses.emplace_back(id, tree.weight(id) * std::pow(phi, p - 1.0));
    }
    out.mu = measure_from_masses(tree, masses);

    const NodeFunction Iphi = hardy_all(tree, out.phi);
    for (const auto& [leaf, m] : masses) {
        out.max_constraint_error = std::max(out.max_constraint_error, std::abs(Iphi[leaf] - 1.0));
    }
    out.carleson = carleson_norm(tree, out.mu, p);
    out.root_formula = std::pow(out.phi[tree.root()], p - 1.0) * tree.weight(tree.root());
    return out;
}

}  // namespace captree
