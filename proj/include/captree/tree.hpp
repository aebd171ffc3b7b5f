#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace captree {

/// Index of a vertex inside one WeightedTree. Ids are assigned in breadth-first
/// order, so a parent always has a smaller id than its children and the
/// children of a vertex occupy a contiguous id range.
struct NodeId {
    std::uint32_t value = 0;

    constexpr auto operator<=>(const NodeId&) const = default;
};

/// Contiguous run of node ids, used for child lists.
class NodeRange {
public:
    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = NodeId;
        using difference_type = std::ptrdiff_t;
        using pointer = void;
        using reference = NodeId;

        iterator() = default;
        explicit iterator(std::uint32_t v) : v_(v) {}
        NodeId operator*() const { return NodeId{v_}; }
        iterator& operator++() {
            ++v_;
            return *this;
        }
        iterator operator++(int) {
            auto old = *this;
            ++v_;
            return old;
        }
        bool operator==(const iterator&) const = default;

    private:
        std::uint32_t v_ = 0;
    };

    NodeRange() = default;
    NodeRange(std::uint32_t first, std::uint32_t count) : first_(first), count_(count) {}

    iterator begin() const { return iterator(first_); }
    iterator end() const { return iterator(first_ + count_); }
    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    NodeId operator[](std::size_t i) const { return NodeId{first_ + static_cast<std::uint32_t>(i)}; }

private:
    std::uint32_t first_ = 0;
    std::uint32_t count_ = 0;
};

/// Weight as a function of depth: scale * ratio^depth.
struct WeightRule {
    double scale = 1.0;
    double ratio = 1.0;

    double operator()(std::size_t depth) const;
};

/// One line of an explicit tree description. A missing parent marks the root.
struct NodeRecord {
    std::int64_t id = 0;
    std::optional<std::int64_t> parent;
    double weight = 1.0;
};

/// Finite rooted tree with a positive weight on every vertex.
///
/// Immutable after construction. All derived tables (depths, Euler-tour
/// intervals for ancestor queries, label lookup) are built eagerly so that a
/// tree can be shared between threads without synchronisation.
class WeightedTree {
public:
    static constexpr std::size_t kMaxNodes = std::size_t{1} << 23;

    static WeightedTree homogeneous(std::size_t branching, std::size_t height, WeightRule rule = {});
    static WeightedTree chain(std::size_t height, WeightRule rule = {});
    static WeightedTree from_records(std::span<const NodeRecord> records,
                                     std::optional<double> delta = std::nullopt);

    std::size_t size() const { return parent_.size(); }
    NodeId root() const { return NodeId{0}; }
    bool valid(NodeId v) const { return v.value < size(); }
    void require_valid(NodeId v) const;

    std::optional<NodeId> parent(NodeId v) const;
    NodeRange children(NodeId v) const { return {first_child_[v.value], child_count_[v.value]}; }
    bool is_leaf(NodeId v) const { return child_count_[v.value] == 0; }
    std::size_t depth(NodeId v) const { return depth_[v.value]; }
    std::size_t height() const { return height_; }
    double weight(NodeId v) const { return weight_[v.value]; }
    std::span<const double> weights() const { return weight_; }
    std::int64_t label(NodeId v) const { return label_[v.value]; }
    std::optional<NodeId> find_label(std::int64_t label) const;
    std::optional<double> delta() const { return delta_; }

    /// True when a lies on the root geodesic of b (a == b included).
    bool is_ancestor_or_self(NodeId a, NodeId b) const {
        return tin_[a.value] <= tin_[b.value] && tout_[b.value] <= tout_[a.value];
    }

    /// Position in a depth-first preorder walk.
    std::uint32_t preorder_index(NodeId v) const { return tin_[v.value]; }

    std::vector<NodeId> leaves() const;
    std::vector<NodeId> nodes_at_depth(std::size_t depth) const;
    /// Root-to-v path, root first.
    std::vector<NodeId> geodesic(NodeId v) const;

    /// Same topology and labels with new weights (one per node, id order).
    WeightedTree with_weights(std::vector<double> weights) const;
    WeightedTree with_weights(const std::function<double(NodeId)>& rule) const;
    WeightedTree with_delta(std::optional<double> delta) const;

private:
    WeightedTree() = default;
    // parent ids must already be in breadth-first order with contiguous children.
    static WeightedTree from_bfs(std::vector<std::uint32_t> parent, std::vector<double> weight,
                                 std::vector<std::int64_t> label, std::optional<double> delta);
    void build_tables();

    std::vector<std::uint32_t> parent_;
    std::vector<std::uint32_t> first_child_;
    std::vector<std::uint32_t> child_count_;
    std::vector<std::uint32_t> depth_;
    std::vector<std::uint32_t> tin_;
    std::vector<std::uint32_t> tout_;
    std::vector<double> weight_;
    std::vector<std::int64_t> label_;
    std::vector<std::pair<std::int64_t, std::uint32_t>> label_index_;  // sorted; empty when labels are ids
    std::optional<double> delta_;
    std::size_t height_ = 0;
};

/// Generator description accepted by build_tree.
struct HomogeneousSpec {
    std::size_t branching = 2;
    std::size_t height = 0;
    WeightRule weight;
};
struct ChainSpec {
    std::size_t height = 0;
    WeightRule weight;
};
struct ExplicitSpec {
    std::vector<NodeRecord> records;
    std::optional<double> delta;
};
struct FileSpec {
    std::string path;
};
using TreeSpec = std::variant<HomogeneousSpec, ChainSpec, ExplicitSpec, FileSpec>;

WeightedTree build_tree(const TreeSpec& spec);

/// Hölder conjugate p/(p-1). Throws InputError unless p > 1.
double conjugate_exponent(double p);

/// Sum of weight^(1-p') over the closed geodesic [root, v].
double d_pi(const WeightedTree& tree, NodeId v, double p);
/// d_pi for every node at once.
std::vector<double> d_pi_all(const WeightedTree& tree, double p);

/// Deepest common ancestor.
NodeId confluent(const WeightedTree& tree, NodeId a, NodeId b);

/// Gromov-type tree metric with parameter delta in (0,1).
double tree_metric(const WeightedTree& tree, NodeId a, NodeId b, double delta);

/// Antichain of vertices; stands for the union of the boundary cylinders
/// below its members. Elements are kept sorted by id.
class BoundarySet {
public:
    BoundarySet() = default;

    /// Validates the antichain property; throws InputError otherwise.
    static BoundarySet from_antichain(const WeightedTree& tree, std::vector<NodeId> nodes);

    std::span<const NodeId> nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }
    bool contains(NodeId v) const;

    bool operator==(const BoundarySet&) const = default;

private:
    explicit BoundarySet(std::vector<NodeId> nodes) : nodes_(std::move(nodes)) {}
    friend BoundarySet normalize_antichain(const WeightedTree&, std::span<const NodeId>);

    std::vector<NodeId> nodes_;
};

/// Drops every node that has a proper ancestor in the input. Sibling families
/// are never merged upward.
BoundarySet normalize_antichain(const WeightedTree& tree, std::span<const NodeId> nodes);

/// Leaves lying below (or equal to) some element of E, sorted by id.
std::vector<NodeId> covered_leaves(const WeightedTree& tree, const BoundarySet& E);

/// Per-node flag: node lies in the subtree of some element of E.
std::vector<char> covered_mask(const WeightedTree& tree, const BoundarySet& E);

/// Real value per node, zero by default.
class NodeFunction {
public:
    NodeFunction() = default;
    explicit NodeFunction(std::size_t n, double fill = 0.0) : values_(n, fill) {}
    explicit NodeFunction(std::vector<double> values) : values_(std::move(values)) {}

    std::size_t size() const { return values_.size(); }
    double operator[](NodeId v) const { return values_[v.value]; }
    double& operator[](NodeId v) { return values_[v.value]; }
    std::span<const double> values() const { return values_; }

private:
    std::vector<double> values_;
};

/// Nonnegative masses on an antichain, with the subtree-sum field I* built at
/// construction.
class TreeMeasure {
public:
    struct Atom {
        NodeId node;
        double mass = 0.0;
    };

    TreeMeasure() = default;
    /// Zero measure on a tree.
    static TreeMeasure zero(const WeightedTree& tree);

    std::span<const Atom> atoms() const { return atoms_; }
    double total() const { return istar_.empty() ? 0.0 : istar_[0]; }
    double istar(NodeId v) const { return istar_[v.value]; }
    std::span<const double> istar_field() const { return istar_; }
    double mass_at(NodeId v) const;
    bool is_zero() const;
    std::size_t tree_size() const { return istar_.size(); }

    TreeMeasure scaled(const WeightedTree& tree, double factor) const;
    /// Multiplies each atom by factor(node).
    TreeMeasure reweighted(const WeightedTree& tree, const std::function<double(NodeId)>& factor) const;

private:
    friend TreeMeasure measure_from_masses(const WeightedTree&, std::span<const std::pair<NodeId, double>>);

    std::vector<Atom> atoms_;
    std::vector<double> istar_;
};

/// Throws InputError on negative or non-finite masses, invalid or duplicate
/// nodes, and supports that are not antichains.
TreeMeasure measure_from_masses(const WeightedTree& tree,
                                std::span<const std::pair<NodeId, double>> masses);

}  // namespace captree
