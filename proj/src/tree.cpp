#include "captree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "captree/errors.hpp"
#include "captree/tree_io.hpp"

namespace captree {

namespace {

constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

void require_positive_weight(double w) {
    if (!(w > 0.0) || !std::isfinite(w)) {
        throw InputError("nonpositive weight: " + std::to_string(w));
    }
}

}  // namespace

double WeightRule::operator()(std::size_t depth) const {
    return scale * std::pow(ratio, static_cast<double>(depth));
}

WeightedTree WeightedTree::from_bfs(std::vector<std::uint32_t> parent, std::vector<double> weight,
                                    std::vector<std::int64_t> label, std::optional<double> delta) {
    if (delta && !(*delta > 0.0 && *delta < 1.0)) {
        throw InputError("delta must lie in (0,1)");
    }
    for (double w : weight) require_positive_weight(w);
    WeightedTree t;
    t.parent_ = std::move(parent);
    t.weight_ = std::move(weight);
    t.label_ = std::move(label);
    t.delta_ = delta;
    t.build_tables();
    return t;
}

void WeightedTree::build_tables() {
    const std::size_t n = parent_.size();
    first_child_.assign(n, 0);
    child_count_.assign(n, 0);
    depth_.assign(n, 0);
    height_ = 0;
    for (std::uint32_t v = 1; v < n; ++v) {
        const std::uint32_t p = parent_[v];
        if (child_count_[p] == 0) first_child_[p] = v;
        ++child_count_[p];
        depth_[v] = depth_[p] + 1;
        height_ = std::max<std::size_t>(height_, depth_[v]);
    }
    for (std::uint32_t v = 0; v < n; ++v) {
        if (child_count_[v] == 0) first_child_[v] = static_cast<std::uint32_t>(n);
    }

    // Euler tour, iterative preorder.
    tin_.assign(n, 0);
    tout_.assign(n, 0);
    if (n > 0) {
        std::vector<std::pair<std::uint32_t, std::uint32_t>> stack;  // node, next child offset
        stack.reserve(height_ + 2);
        std::uint32_t clock = 0;
        stack.emplace_back(0, 0);
        tin_[0] = clock++;
        while (!stack.empty()) {
            auto& [v, next] = stack.back();
            if (next < child_count_[v]) {
                const std::uint32_t c = first_child_[v] + next++;
                tin_[c] = clock++;
                stack.emplace_back(c, 0);
            } else {
                tout_[v] = clock++;
                stack.pop_back();
            }
        }
    }

    bool identity = true;
    for (std::size_t v = 0; v < n && identity; ++v) identity = label_[v] == static_cast<std::int64_t>(v);
    label_index_.clear();
    if (!identity) {
        label_index_.reserve(n);
        for (std::uint32_t v = 0; v < n; ++v) label_index_.emplace_back(label_[v], v);
        std::sort(label_index_.begin(), label_index_.end());
    }
}

WeightedTree WeightedTree::homogeneous(std::size_t branching, std::size_t height, WeightRule rule) {
    if (branching < 1) throw InputError("branching must be at least 1");
    std::size_t total = 0;
    std::size_t level = 1;
    for (std::size_t k = 0; k <= height; ++k) {
        total += level;
        if (total > kMaxNodes) throw InputError("tree exceeds node limit");
        if (k < height) {
            if (level > kMaxNodes / branching) throw InputError("tree exceeds node limit");
            level *= branching;
        }
    }
    std::vector<std::uint32_t> parent(total);
    std::vector<double> weight(total);
    std::vector<std::int64_t> label(total);
    parent[0] = kNoParent;
    std::size_t level_start = 0;
    std::size_t level_size = 1;
    std::size_t next = 1;
    for (std::size_t k = 0; k <= height; ++k) {
        const double w = rule(k);
        for (std::size_t i = 0; i < level_size; ++i) {
            const std::size_t v = level_start + i;
            weight[v] = w;
            label[v] = static_cast<std::int64_t>(v);
            if (k < height) {
                for (std::size_t c = 0; c < branching; ++c) parent[next++] = static_cast<std::uint32_t>(v);
            }
        }
        level_start += level_size;
        level_size *= branching;
    }
    return from_bfs(std::move(parent), std::move(weight), std::move(label), std::nullopt);
}

WeightedTree WeightedTree::chain(std::size_t height, WeightRule rule) {
    return homogeneous(1, height, rule);
}

WeightedTree WeightedTree::from_records(std::span<const NodeRecord> records, std::optional<double> delta) {
    if (records.empty()) throw InputError("tree has no nodes");
    if (records.size() > kMaxNodes) throw InputError("tree exceeds node limit");
    std::unordered_map<std::int64_t, std::size_t> index;
    index.reserve(records.size());
    std::optional<std::size_t> root;
    for (std::size_t i = 0; i < records.size(); ++i) {
        require_positive_weight(records[i].weight);
        if (!index.emplace(records[i].id, i).second) {
            throw InputError("duplicate node id " + std::to_string(records[i].id));
        }
        if (!records[i].parent) {
            if (root) throw InputError("more than one root");
            root = i;
        }
    }
    if (!root) throw InputError("no root record");

    std::vector<std::vector<std::size_t>> kids(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].parent) continue;
        auto it = index.find(*records[i].parent);
        if (it == index.end()) {
            throw InputError("orphan node " + std::to_string(records[i].id) + ": parent " +
                             std::to_string(*records[i].parent) + " does not exist");
        }
        kids[it->second].push_back(i);
    }

    // Breadth-first relabelling keeps children contiguous and in record order.
    std::vector<std::size_t> order;
    order.reserve(records.size());
    std::vector<std::uint32_t> new_id(records.size(), kNoParent);
    order.push_back(*root);
    new_id[*root] = 0;
    for (std::size_t head = 0; head < order.size(); ++head) {
        for (std::size_t c : kids[order[head]]) {
            new_id[c] = static_cast<std::uint32_t>(order.size());
            order.push_back(c);
        }
    }
    if (order.size() != records.size()) {
        throw InputError("tree is not connected to the root (cycle or detached component)");
    }

    std::vector<std::uint32_t> parent(order.size());
    std::vector<double> weight(order.size());
    std::vector<std::int64_t> label(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        const NodeRecord& r = records[order[k]];
        parent[k] = r.parent ? new_id[index.at(*r.parent)] : kNoParent;
        weight[k] = r.weight;
        label[k] = r.id;
    }
    return from_bfs(std::move(parent), std::move(weight), std::move(label), delta);
}

void WeightedTree::require_valid(NodeId v) const {
    if (!valid(v)) throw InputError("invalid node id " + std::to_string(v.value));
}

std::optional<NodeId> WeightedTree::parent(NodeId v) const {
    const std::uint32_t p = parent_[v.value];
    if (p == kNoParent) return std::nullopt;
    return NodeId{p};
}

std::optional<NodeId> WeightedTree::find_label(std::int64_t label) const {
    if (label_index_.empty()) {
        if (label >= 0 && static_cast<std::size_t>(label) < size()) {
            return NodeId{static_cast<std::uint32_t>(label)};
        }
        return std::nullopt;
    }
    auto it = std::lower_bound(label_index_.begin(), label_index_.end(),
                               std::pair<std::int64_t, std::uint32_t>{label, 0});
    if (it == label_index_.end() || it->first != label) return std::nullopt;
    return NodeId{it->second};
}

std::vector<NodeId> WeightedTree::leaves() const {
    std::vector<NodeId> out;
    for (std::uint32_t v = 0; v < size(); ++v) {
        if (child_count_[v] == 0) out.push_back(NodeId{v});
    }
    return out;
}

std::vector<NodeId> WeightedTree::nodes_at_depth(std::size_t depth) const {
    std::vector<NodeId> out;
    for (std::uint32_t v = 0; v < size(); ++v) {
        if (depth_[v] == depth) out.push_back(NodeId{v});
    }
    return out;
}

std::vector<NodeId> WeightedTree::geodesic(NodeId v) const {
    require_valid(v);
    std::vector<NodeId> path(depth_[v.value] + 1);
    std::uint32_t cur = v.value;
    for (std::size_t i = path.size(); i-- > 0;) {
        path[i] = NodeId{cur};
        cur = parent_[cur];
    }
    return path;
}

WeightedTree WeightedTree::with_weights(std::vector<double> weights) const {
    if (weights.size() != size()) throw InputError("weight vector size does not match tree");
    for (double w : weights) require_positive_weight(w);
    WeightedTree t = *this;
    t.weight_ = std::move(weights);
    return t;
}

WeightedTree WeightedTree::with_weights(const std::function<double(NodeId)>& rule) const {
    std::vector<double> w(size());
    for (std::uint32_t v = 0; v < size(); ++v) w[v] = rule(NodeId{v});
    return with_weights(std::move(w));
}

WeightedTree WeightedTree::with_delta(std::optional<double> delta) const {
    if (delta && !(*delta > 0.0 && *delta < 1.0)) throw InputError("delta must lie in (0,1)");
    WeightedTree t = *this;
    t.delta_ = delta;
    return t;
}

WeightedTree build_tree(const TreeSpec& spec) {
    struct Visitor {
        WeightedTree operator()(const HomogeneousSpec& s) const {
            return WeightedTree::homogeneous(s.branching, s.height, s.weight);
        }
        WeightedTree operator()(const ChainSpec& s) const { return WeightedTree::chain(s.height, s.weight); }
        WeightedTree operator()(const ExplicitSpec& s) const {
            return WeightedTree::from_records(s.records, s.delta);
        }
        WeightedTree operator()(const FileSpec& s) const { return read_tree_file(s.path); }
    };
    return std::visit(Visitor{}, spec);
}

double conjugate_exponent(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw InputError("exponent p must be a finite number > 1");
    return p / (p - 1.0);
}

double d_pi(const WeightedTree& tree, NodeId v, double p) {
    tree.require_valid(v);
    const double e = 1.0 - conjugate_exponent(p);
    double sum = 0.0;
    std::optional<NodeId> cur = v;
    while (cur) {
        sum += std::pow(tree.weight(*cur), e);
        cur = tree.parent(*cur);
    }
    return sum;
}

std::vector<double> d_pi_all(const WeightedTree& tree, double p) {
    const double e = 1.0 - conjugate_exponent(p);
    std::vector<double> d(tree.size());
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        const NodeId id{v};
        const double own = std::pow(tree.weight(id), e);
        auto par = tree.parent(id);
        d[v] = par ? d[par->value] + own : own;
    }
    return d;
}

NodeId confluent(const WeightedTree& tree, NodeId a, NodeId b) {
    tree.require_valid(a);
    tree.require_valid(b);
    while (tree.depth(a) > tree.depth(b)) a = *tree.parent(a);
    while (tree.depth(b) > tree.depth(a)) b = *tree.parent(b);
    while (a != b) {
        a = *tree.parent(a);
        b = *tree.parent(b);
    }
    return a;
}

double tree_metric(const WeightedTree& tree, NodeId a, NodeId b, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0,1)");
    const NodeId c = confluent(tree, a, b);
    auto pw = [delta](std::size_t k) { return std::pow(delta, static_cast<double>(k)); };
    return 2.0 * delta / (1.0 - delta) *
           (pw(tree.depth(c)) - 0.5 * (pw(tree.depth(a)) + pw(tree.depth(b))));
}

BoundarySet BoundarySet::from_antichain(const WeightedTree& tree, std::vector<NodeId> nodes) {
    for (NodeId v : nodes) tree.require_valid(v);
    BoundarySet normal = normalize_antichain(tree, nodes);
    std::sort(nodes.begin(), nodes.end());
    if (normal.nodes_ != nodes) throw InputError("node set is not an antichain");
    return normal;
}

bool BoundarySet::contains(NodeId v) const {
    return std::binary_search(nodes_.begin(), nodes_.end(), v);
}

BoundarySet normalize_antichain(const WeightedTree& tree, std::span<const NodeId> nodes) {
    std::vector<NodeId> sorted(nodes.begin(), nodes.end());
    for (NodeId v : sorted) tree.require_valid(v);
    // Preorder sort: an ancestor precedes its whole subtree.
    std::sort(sorted.begin(), sorted.end(),
              [&](NodeId a, NodeId b) { return tree.preorder_index(a) < tree.preorder_index(b); });
    std::vector<NodeId> kept;
    for (NodeId v : sorted) {
        if (!kept.empty() && tree.is_ancestor_or_self(kept.back(), v)) continue;
        kept.push_back(v);
    }
    std::sort(kept.begin(), kept.end());
    return BoundarySet(std::move(kept));
}

std::vector<char> covered_mask(const WeightedTree& tree, const BoundarySet& E) {
    std::vector<char> mask(tree.size(), 0);
    for (NodeId v : E.nodes()) mask[v.value] = 1;
    for (std::uint32_t v = 1; v < tree.size(); ++v) {
        if (mask[tree.parent(NodeId{v})->value]) mask[v] = 1;
    }
    return mask;
}

std::vector<NodeId> covered_leaves(const WeightedTree& tree, const BoundarySet& E) {
    const auto mask = covered_mask(tree, E);
    std::vector<NodeId> out;
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        if (mask[v] && tree.is_leaf(NodeId{v})) out.push_back(NodeId{v});
    }
    return out;
}

TreeMeasure TreeMeasure::zero(const WeightedTree& tree) {
    TreeMeasure m;
    m.istar_.assign(tree.size(), 0.0);
    return m;
}

double TreeMeasure::mass_at(NodeId v) const {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), v,
                               [](const Atom& a, NodeId n) { return a.node < n; });
    return (it != atoms_.end() && it->node == v) ? it->mass : 0.0;
}

bool TreeMeasure::is_zero() const {
    return std::all_of(atoms_.begin(), atoms_.end(), [](const Atom& a) { return a.mass == 0.0; });
}

TreeMeasure TreeMeasure::scaled(const WeightedTree& tree, double factor) const {
    return reweighted(tree, [factor](NodeId) { return factor; });
}

TreeMeasure TreeMeasure::reweighted(const WeightedTree& tree,
                                    const std::function<double(NodeId)>& factor) const {
    std::vector<std::pair<NodeId, double>> masses;
    masses.reserve(atoms_.size());
    for (const Atom& a : atoms_) masses.emplace_back(a.node, a.mass * factor(a.node));
    return measure_from_masses(tree, masses);
}

TreeMeasure measure_from_masses(const WeightedTree& tree,
                                std::span<const std::pair<NodeId, double>> masses) {
    TreeMeasure m;
    m.atoms_.reserve(masses.size());
    for (const auto& [node, mass] : masses) {
        tree.require_valid(node);
        if (!(mass >= 0.0) || !std::isfinite(mass)) {
            throw InputError("negative or non-finite mass " + std::to_string(mass));
        }
        m.atoms_.push_back({node, mass});
    }
    std::sort(m.atoms_.begin(), m.atoms_.end(),
              [](const TreeMeasure::Atom& a, const TreeMeasure::Atom& b) { return a.node < b.node; });
    for (std::size_t i = 1; i < m.atoms_.size(); ++i) {
        if (m.atoms_[i].node == m.atoms_[i - 1].node) {
            throw InputError("duplicate support node " + std::to_string(m.atoms_[i].node.value));
        }
    }
    std::vector<NodeId> support;
    support.reserve(m.atoms_.size());
    for (const auto& a : m.atoms_) support.push_back(a.node);
    if (normalize_antichain(tree, support).size() != support.size()) {
        throw InputError("support not an antichain");
    }
    m.istar_.assign(tree.size(), 0.0);
    for (const auto& a : m.atoms_) m.istar_[a.node.value] += a.mass;
    for (std::uint32_t v = static_cast<std::uint32_t>(tree.size()); v-- > 1;) {
        m.istar_[tree.parent(NodeId{v})->value] += m.istar_[v];
    }
    return m;
}

}  // namespace captree
