#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "captree/dyadic.hpp"
#include "captree/tree.hpp"

namespace captree {

/// Outcome of one numerical inequality check.
///
/// `bound` is set when the inequality carries an explicit constant, which is
/// then asserted. Otherwise `empirical` records the observed constant and the
/// check only asserts what is stated in `note`.
struct CheckReport {
    std::string name;
    std::string instance;
    double left = 0.0;
    double right = 0.0;
    double ratio = 0.0;
    std::optional<double> bound;
    std::optional<double> empirical;
    bool pass = true;
    std::string note;
    std::uint64_t seed = 0;
    double runtime_ms = 0.0;
    std::vector<std::pair<std::string, double>> details;  // named side values, in insertion order
    std::vector<std::pair<double, double>> series;        // plot data (depth or r, value)
};

/// Least-squares slope of log(y) against x. Zero for fewer than two points.
double log_slope(const std::vector<std::pair<double, double>>& xy);

/// One sample point per level-`depth` cell: the image of the cell's prefix
/// continued by the alternating digits 0, b-1 (an interior point off every
/// dyadic boundary).
std::vector<Point> cell_sample_points(const DyadicSpace& space, std::size_t depth);

/// Graph-side comparison: quadratures of (I_G w)^q, (S_G w)^q and the Wolff
/// sum of (w(a)/m(a)^s)^q, one sample point per level-`depth` cell. P_G(x)
/// is taken down to the full depth of the space.
CheckReport check_mww(const DyadicSpace& space, const SpaceMeasure& omega, double q, std::size_t depth,
                      double s = 0.5);
CheckReport check_mww(const DyadicSpace& space, const TreeMeasure& mu, double q, std::size_t depth,
                      double s = 0.5);

/// Cap(E) against mu(E)/[mu]: equilibrium attains it, supported measures stay
/// below, unrestricted ones stay below p^(p-1) Cap(E).
CheckReport check_cmcap(const WeightedTree& tree, const BoundarySet& E, double p, std::size_t n_samples,
                        std::uint64_t seed);

/// Monotonicity of the testing condition under multiplication by 0 <= lambda <= 1.
/// mu is first rescaled so that its testing constant equals one.
CheckReport check_monotonicity(const WeightedTree& tree, const TreeMeasure& mu, const NodeFunction& lambda,
                               double p);

/// Testing constant C_1 = [mu] against the capacitary condition on each set of
/// the family, plus a sampled lower bound of the embedding norm.
CheckReport check_trace_conditions(const WeightedTree& tree, const TreeMeasure& mu, double p,
                                   const std::vector<BoundarySet>& E_family, std::size_t f_samples,
                                   std::uint64_t seed);

/// Capacity of the node set {x_j} against that of the cylinders below it.
/// First checks numerically that Cap(S(x)) d_pi(x)^(p-1) stays bounded below.
CheckReport check_shadow(const WeightedTree& tree, const BoundarySet& E, double p);
/// Same, marking the hypothesis as failed when the sampled constant is not above `hypothesis_floor`.
CheckReport check_shadow(const WeightedTree& tree, const BoundarySet& E, double p, double hypothesis_floor);

/// Continuous energy of omega against the discrete sum
/// sum over cells a of level <= n of w(a)^p' / m(a)^(s p' - 1), for each n.
CheckReport check_energy_equivalence(const DyadicSpace& space, const SpaceMeasure& omega, double s, double p,
                                     const std::vector<std::size_t>& depths);

/// Weak-type maximal inequality on random (sigma, mu, g) with the explicit
/// constant 2 p' / (p' - 1).
CheckReport check_maximal(const WeightedTree& tree, double p, std::size_t n_samples, std::uint64_t seed);

/// Pull-back of omega to the level-`depth` cells: cell pieces are spread (or
/// gathered) by mass, atoms split equally among their containing cells.
TreeMeasure pull_back(const DyadicSpace& space, const SpaceMeasure& omega, std::size_t depth);

}  // namespace captree
