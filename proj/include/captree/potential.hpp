#pragma once

#include <optional>

#include "captree/tree.hpp"

namespace captree {

/// Sum of f over the closed geodesic [root, target].
double hardy_sum(const WeightedTree& tree, const NodeFunction& f, NodeId target);
/// Hardy sums at every node, one top-down pass.
NodeFunction hardy_all(const WeightedTree& tree, const NodeFunction& f);

/// Subtree mass I*mu at every node.
NodeFunction adjoint_field(const WeightedTree& tree, const TreeMeasure& mu);
/// Subtree sums of an arbitrary node function (the adjoint applied to a node measure).
NodeFunction subtree_sums(const WeightedTree& tree, const NodeFunction& sigma);

/// Sum over nodes of (I*mu)^p' * weight^(1-p').
double energy(const WeightedTree& tree, const TreeMeasure& mu, double p);

/// Nonlinear potential at xi: sum over [root, xi] of weight^(1-p') (I*mu)^(p'-1).
double potential_V(const WeightedTree& tree, const TreeMeasure& mu, double p, NodeId xi);
NodeFunction potential_V_all(const WeightedTree& tree, const TreeMeasure& mu, double p);

/// Node measure (I*mu)^p' * weight^(1-p'); its subtree sums are the localized energies.
NodeFunction energy_density(const WeightedTree& tree, const TreeMeasure& mu, double p);

struct TestingSup {
    double value = 0.0;           // sup of localized energy over subtree mass
    std::optional<NodeId> where;  // empty for the zero measure
};

/// The inner supremum of the Carleson testing norm, over nodes with positive mass.
TestingSup testing_sup(const WeightedTree& tree, const TreeMeasure& mu, double p);

/// Testing norm: testing_sup^(p-1); zero for the zero measure.
double carleson_norm(const WeightedTree& tree, const TreeMeasure& mu, double p);

/// Dyadic maximal function of g with respect to mu, evaluated at zeta:
/// sup over beta in [root, zeta] with I*mu(beta) > 0 of I*(g dmu)(beta) / I*mu(beta).
/// Throws InputError for the zero measure.
double maximal_fn(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& g, NodeId zeta);
NodeFunction maximal_fn_all(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& g);

/// Maximal ratio of a node measure sigma against mu at every node:
/// sup over ancestors beta with I*mu(beta) > 0 of I*sigma(beta) / I*mu(beta), or 0 if none.
NodeFunction maximal_ratio_all(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& sigma);

/// Both sides of the weighted maximal inequality
///   sum_v sigma(v) (M_mu g)(v)^p'   versus   sum_{atoms} g^p' (M_mu sigma) mu,
/// without any constant.
struct MaximalSides {
    double lhs = 0.0;
    double rhs = 0.0;
};
MaximalSides maximal_inequality_sides(const WeightedTree& tree, const TreeMeasure& mu,
                                      const NodeFunction& sigma, const NodeFunction& g, double p);

/// Trace ratio sum_atoms (If)^p mu / sum_v f^p weight, 0 when f vanishes.
double trace_ratio(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& f, double p);

}  // namespace captree
