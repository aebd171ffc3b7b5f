#pragma once

#include <span>

#include "captree/tree.hpp"

namespace captree {

/// Capacity of the union of boundary cylinders below the nodes of E.
/// Bottom-up recursion over the subtree spanning E and the root; 0 for empty E.
double capacity(const WeightedTree& tree, const BoundarySet& E, double p);

/// Capacity of the node set itself: the constraint sits at each node of the
/// antichain rather than on the leaves below it.
double capacity_interior(const WeightedTree& tree, std::span<const NodeId> nodes, double p);

/// Capacity of the single point zeta (a leaf or an interior node): d_pi^(1-p).
double capacity_point(const WeightedTree& tree, NodeId zeta, double p);

/// Capacity of each subtree S(v) relative to its own root v, for every node.
/// Zero off the spanning subtree.
NodeFunction relative_capacities(const WeightedTree& tree, const BoundarySet& E, double p);

struct EquilibriumResult {
    double capacity = 0.0;
    NodeFunction phi;
    TreeMeasure mu;
    double max_constraint_error = 0.0;  // max |I phi - 1| over the covered leaves
    double carleson = 0.0;              // testing norm of mu
    double root_formula = 0.0;          // phi(root)^(p-1) * weight(root)
};

/// Extremal function and measure for E. Throws InputError for empty E.
EquilibriumResult equilibrium(const WeightedTree& tree, const BoundarySet& E, double p);

struct OracleOptions {
    double tol = 1e-8;
    long max_iter = 100000;
};

struct OracleResult {
    double value = 0.0;  // best estimate of the capacity
    double lower = 0.0;  // certified lower bound
    double upper = 0.0;  // certified upper bound (infinity when none)
    long iterations = 0;
    TreeMeasure certificate;  // measure realising the lower bound
};

/// Brute-force minimisation of sum weight*phi^p under I phi >= 1 on every
/// covered leaf (augmented Lagrangian, projected-gradient inner solve).
/// Throws ConvergenceError when the relative gap stays above tol.
OracleResult capacity_primal_oracle(const WeightedTree& tree, const BoundarySet& E, double p,
                                    OracleOptions opts = {});
/// Same program with the constraints placed at the given antichain nodes.
OracleResult capacity_primal_oracle_nodes(const WeightedTree& tree, std::span<const NodeId> nodes, double p,
                                          OracleOptions opts = {});

/// Brute-force maximisation of mass^p / energy^(p-1) over probability
/// measures on the covered leaves, by projected gradient on the simplex.
OracleResult capacity_dual_oracle(const WeightedTree& tree, const BoundarySet& E, double p,
                                  OracleOptions opts = {});
OracleResult capacity_dual_oracle_nodes(const WeightedTree& tree, std::span<const NodeId> nodes, double p,
                                        OracleOptions opts = {});

/// p = 2 only: the capacity is 1' G^-1 1 with G = d_pi of pairwise confluents.
double capacity_quadratic_oracle(const WeightedTree& tree, const BoundarySet& E);
double capacity_quadratic_oracle_nodes(const WeightedTree& tree, std::span<const NodeId> nodes);

}  // namespace captree
