#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "captree/tree.hpp"

namespace captree {

enum class SpaceKind { Interval, Cube, Cantor };

std::string to_string(SpaceKind kind);

/// Exact rational coordinate, kept when a point was given as a fraction or a
/// terminating decimal.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Parses "p/q", a decimal, or scientific notation. The exact part is set
/// whenever the literal is a fraction or a short terminating decimal.
struct Coordinate {
    double value = 0.0;
    std::optional<Rational> exact;

    static Coordinate parse(std::string_view text);
    static Coordinate from_double(double x) { return {x, std::nullopt}; }
};

using Point = std::vector<double>;
using ExactPoint = std::vector<Coordinate>;

/// Axis-aligned closed cell; unused axes are left at zero.
struct Cell {
    std::array<double, 3> lo{};
    std::array<double, 3> hi{};
};

struct SpaceParams {
    std::size_t depth = 0;
    int Q = 1;                     // cube dimension; ignored for the other kinds
    std::optional<double> delta;   // must match the kind's contraction ratio when given
};

/// Ahlfors-regular exemplar space with its explicit dyadic cells. The tree is
/// homogeneous with branching 2 (interval, Cantor) or 2^Q (cube) and carries
/// the cell masses as weights.
class DyadicSpace {
public:
    SpaceKind kind() const { return kind_; }
    std::size_t depth() const { return depth_; }
    /// Number of coordinates of a point.
    std::size_t dim() const { return dim_; }
    /// Ahlfors dimension.
    double Q() const { return Q_; }
    double delta() const { return delta_; }
    std::size_t branching() const { return branching_; }
    const WeightedTree& tree() const { return tree_; }

    std::size_t level(NodeId v) const { return tree_.depth(v); }
    /// Position of v among the cells of its level, in breadth-first order.
    std::uint64_t index_in_level(NodeId v) const;
    NodeId node_at(std::size_t level, std::uint64_t index) const;
    std::uint64_t cells_at(std::size_t level) const;

    Cell cell(NodeId v) const;
    double cell_mass(NodeId v) const;
    double cell_mass_at_level(std::size_t level) const;
    /// Side length of a level-k cell (the construction interval for Cantor).
    double cell_width(std::size_t level) const;
    double diameter(NodeId v) const;

    /// Per-axis integer coordinates of a cell (for Cantor the binary code).
    std::array<std::uint64_t, 3> axis_index(NodeId v) const;
    NodeId node_from_axes(std::size_t level, const std::array<std::uint64_t, 3>& idx) const;

    /// Distance in the space metric (Euclidean on the line and the Cantor set, max-norm on cubes).
    double distance(const Point& x, const Point& y) const;
    /// Mass of the closed ball B(x, r).
    double ball_mass(const Point& x, double r) const;
    /// Throws InputError unless x lies in the space (Cantor: within 1e-9 of the set).
    void require_point(const Point& x) const;

    /// Separation of two closed cells in the space metric.
    double cell_gap(NodeId a, NodeId b) const;

private:
    friend DyadicSpace make_space(SpaceKind kind, const SpaceParams& params);

    SpaceKind kind_ = SpaceKind::Interval;
    std::size_t depth_ = 0;
    std::size_t dim_ = 1;
    double Q_ = 1.0;
    double delta_ = 0.5;
    std::size_t branching_ = 2;
    std::vector<std::uint64_t> level_start_;
    WeightedTree tree_ = WeightedTree::chain(0);
};

DyadicSpace make_space(SpaceKind kind, const SpaceParams& params);
/// Parses "interval", "cantor", "cube" (Q = 2) or "cube:Q".
DyadicSpace make_space(std::string_view kind, std::size_t depth);

/// The space's tree reweighted with m(cell)^((s p' - 1)/(p' - 1)).
WeightedTree weight_pi_s(const DyadicSpace& space, double s, double p);

/// Cantor function (distribution function of the natural measure).
double cantor_function(double x);
/// Distance from x to the middle-thirds Cantor set.
double cantor_distance(double x);

/// A compact subset of the space.
struct SetDescriptor {
    enum class Kind { Boxes, Ifs, Points };
    struct Box {
        std::array<double, 3> lo{};
        std::array<double, 3> hi{};
    };
    struct Map {
        double ratio = 0.5;
        double shift = 0.0;
    };

    Kind kind = Kind::Boxes;
    std::vector<Box> boxes;
    std::vector<Map> maps;
    std::vector<ExactPoint> points;

    /// Text forms: "interval a b [a b ...]", "box lo1 hi1 .. loQ hiQ [...]",
    /// "ifs r1 t1 r2 t2 ...", "points x1 x2 ..." (dim coordinates per point).
    static SetDescriptor parse(std::string_view text, std::size_t dim);
};

/// Every level-`depth` cell whose closed cell meets the set.
BoundarySet discretize_set(const DyadicSpace& space, const SetDescriptor& sd, std::size_t depth);

/// Kernel [m(B(x,r)) + m(B(y,r))]^(-s) with r = distance(x, y); +infinity on the diagonal.
double kernel_K(const DyadicSpace& space, const Point& x, const Point& y, double s);

/// Measure on the space: cell-uniform pieces plus atoms.
struct SpaceMeasure {
    std::vector<std::pair<NodeId, double>> cells;  // mass spread uniformly (in m) over the cell
    std::vector<std::pair<Point, double>> atoms;

    double total() const;
};

/// Mass of the closed cell of v.
double closed_cell_mass(const DyadicSpace& space, const SpaceMeasure& omega, NodeId v);

/// Quadrature of the integral of (K omega)^p' dm on the cells of level
/// `resolution`. Cell-averaged kernels are used on the diagonal and between
/// neighbouring cells. Throws InputError when resolution does not exceed the
/// depth of every cell piece.
double continuous_energy(const DyadicSpace& space, const SpaceMeasure& omega, double s, double p,
                         std::size_t resolution);

/// A boundary ray: a finite prefix (a node) completed by a rule.
struct Ray {
    enum class Rule { AllLeft, AllRight, Periodic, Toward };
    NodeId prefix;
    Rule rule = Rule::AllLeft;
    std::vector<unsigned> period;  // child digits repeated forever (Periodic)
    Point target;                  // the point whose nested cells the ray follows (Toward)
};

/// The point lying in every closed cell along the ray.
Point lambda_map(const DyadicSpace& space, const Ray& ray);

SpaceMeasure push_forward(const DyadicSpace& space, const TreeMeasure& nu);
SpaceMeasure push_forward(const DyadicSpace& space, const std::vector<std::pair<Ray, double>>& rays);

struct PullBack {
    TreeMeasure measure;                          // on the level-`depth` cells
    std::vector<std::pair<Ray, double>> rays;     // one ray per (atom, containing cell)
    std::vector<std::size_t> multiplicity;        // N(x) for each atom
    bool snapped = false;                         // some coordinate needed the 1e-12 snap
};

/// Splits every atom equally among the level-`depth` closed cells containing it.
PullBack pull_back_atomic(const DyadicSpace& space, const std::vector<std::pair<ExactPoint, double>>& atoms,
                          std::size_t depth);

/// Level-k cells whose closed cell contains x, for a single level.
std::vector<NodeId> containing_cells(const DyadicSpace& space, const ExactPoint& x, std::size_t level,
                                     bool* snapped = nullptr);

/// Cells within one graph step of the geodesics ending at x: for each level
/// up to `depth`, the closed cells containing x and every cell of the same
/// level at distance at most delta^k from one of them. Sorted by id.
std::vector<NodeId> graph_predecessor_set(const DyadicSpace& space, const ExactPoint& x, std::size_t depth);

struct BallEstimate {
    double value = 0.0;
    long level = 0;
    bool log_case = false;               // s = 1/p'
    bool positive_point_regime = false;  // s < 1/p'
};

/// Comparable value for the capacity of a ball of radius r in (0,1].
BallEstimate ball_capacity_estimate(const DyadicSpace& space, double r, double s, double p);

}  // namespace captree
