#include "captree/dyadic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "captree/errors.hpp"

namespace captree {

namespace {

constexpr double kSnap = 1e-12;

__extension__ typedef __int128 wide_int;

std::uint64_t ipow(std::uint64_t base, std::size_t e) {
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < e; ++i) r *= base;
    return r;
}

std::vector<std::string_view> tokens(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ','; };
    while (i < text.size()) {
        while (i < text.size() && ws(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && !ws(text[j])) ++j;
        if (j > i) out.push_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

// Ternary digits of L (k of them) are all 0 or 2; returns the binary code.
std::optional<std::uint64_t> cantor_code(std::uint64_t L, std::size_t k) {
    std::uint64_t code = 0, bit = 1;
    for (std::size_t i = 0; i < k; ++i) {
        const std::uint64_t t = L % 3;
        if (t == 1) return std::nullopt;
        if (t == 2) code |= bit;
        bit <<= 1;
        L /= 3;
    }
    if (L != 0) return std::nullopt;
    return code;
}

// Integer positions of the closed level-k cells along one axis that contain
// the coordinate. `base` is 2 (dyadic) or 3 (triadic Cantor grid).
std::vector<std::int64_t> axis_candidates(const Coordinate& c, std::uint64_t base, std::size_t k, bool* snapped) {
    const auto n = static_cast<std::int64_t>(ipow(base, k));
    std::int64_t q = 0;
    bool on_grid = false;
    if (c.exact) {
        const wide_int num = static_cast<wide_int>(c.exact->num) * n;
        const wide_int den = c.exact->den;
        q = static_cast<std::int64_t>(num / den);
        on_grid = (num % den) == 0;
    } else {
        const double t = c.value * static_cast<double>(n);
        const double r = std::nearbyint(t);
        if (std::abs(c.value - r / static_cast<double>(n)) <= kSnap) {
            q = static_cast<std::int64_t>(r);
            on_grid = true;
            if (snapped && t != r) *snapped = true;
        } else {
            q = static_cast<std::int64_t>(std::floor(t));
        }
    }
    std::vector<std::int64_t> out;
    if (on_grid && q - 1 >= 0 && q - 1 < n) out.push_back(q - 1);
    if (q >= 0 && q < n) out.push_back(q);
    return out;
}

bool ifs_meets(const std::vector<SetDescriptor::Map>& maps, double a, double b) {
    double h0 = std::numeric_limits<double>::infinity(), h1 = -h0;
    for (const auto& m : maps) {
        const double f = m.shift / (1.0 - m.ratio);
        h0 = std::min(h0, f);
        h1 = std::max(h1, f);
    }
    struct Walker {
        const std::vector<SetDescriptor::Map>& maps;
        double h0, h1, a, b;
        bool run(double lo, double hi, int guard) const {
            if (hi < a - kSnap || lo > b + kSnap) return false;
            if ((lo >= a - kSnap && lo <= b + kSnap) || (hi >= a - kSnap && hi <= b + kSnap)) return true;
            if (guard > 400 || !(h1 > h0)) return false;
            const double scale = (hi - lo) / (h1 - h0);
            for (const auto& m : maps) {
                const double clo = lo + scale * (m.ratio * h0 + m.shift - h0);
                const double chi = lo + scale * (m.ratio * h1 + m.shift - h0);
                if (run(clo, chi, guard + 1)) return true;
            }
            return false;
        }
    };
    return Walker{maps, h0, h1, a, b}.run(h0, h1, 0);
}

const std::vector<SetDescriptor::Map>& cantor_maps() {
    static const std::vector<SetDescriptor::Map> maps{{1.0 / 3.0, 0.0}, {1.0 / 3.0, 2.0 / 3.0}};
    return maps;
}

double box_gap(const Cell& a, const Cell& b, std::size_t dim) {
    double g = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        g = std::max(g, std::max(b.lo[i] - a.hi[i], a.lo[i] - b.hi[i]));
    }
    return std::max(g, 0.0);
}

Point midpoint(const Cell& c, std::size_t dim) {
    Point x(dim);
    for (std::size_t i = 0; i < dim; ++i) x[i] = 0.5 * (c.lo[i] + c.hi[i]);
    return x;
}

// Geometry of the level-k cell with breadth-first index j, independent of any tree.
Cell cell_geometry(SpaceKind kind, std::size_t dim, std::size_t k, std::uint64_t j) {
    Cell c;
    if (kind == SpaceKind::Cantor) {
        std::uint64_t L = 0;
        for (std::size_t i = k; i-- > 0;) L = L * 3 + 2 * ((j >> i) & 1u);
        const double w = std::pow(3.0, -static_cast<double>(k));
        c.lo[0] = static_cast<double>(L) * w;
        c.hi[0] = static_cast<double>(L + 1) * w;
        return c;
    }
    const double w = std::ldexp(1.0, -static_cast<int>(k));
    std::array<std::uint64_t, 3> idx{};
    for (std::size_t i = k; i-- > 0;) {
        const std::uint64_t digit = (j >> (i * dim)) & ((std::uint64_t{1} << dim) - 1);
        for (std::size_t a = 0; a < dim; ++a) idx[a] = idx[a] * 2 + ((digit >> a) & 1u);
    }
    for (std::size_t a = 0; a < dim; ++a) {
        c.lo[a] = static_cast<double>(idx[a]) * w;
        c.hi[a] = static_cast<double>(idx[a] + 1) * w;
    }
    return c;
}

}  // namespace

std::string to_string(SpaceKind kind) {
    switch (kind) {
        case SpaceKind::Interval: return "interval";
        case SpaceKind::Cube: return "cube";
        case SpaceKind::Cantor: return "cantor";
    }
    return "?";
}

Coordinate Coordinate::parse(std::string_view text) {
    auto bad = [&] { return InputError("cannot parse number '" + std::string(text) + "'"); };
    if (text.empty()) throw bad();
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        std::int64_t n = 0, d = 0;
        auto num = text.substr(0, slash), den = text.substr(slash + 1);
        auto r1 = std::from_chars(num.data(), num.data() + num.size(), n);
        auto r2 = std::from_chars(den.data(), den.data() + den.size(), d);
        if (r1.ec != std::errc{} || r1.ptr != num.data() + num.size() || r2.ec != std::errc{} ||
            r2.ptr != den.data() + den.size() || d == 0) {
            throw bad();
        }
        if (d < 0) {
            n = -n;
            d = -d;
        }
        const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
        Rational q{n / g, d / g};
        return {q.value(), q};
    }
    double v = 0.0;
    auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc{} || r.ptr != text.data() + text.size() || !std::isfinite(v)) throw bad();
    Coordinate c{v, std::nullopt};
    // Terminating decimals with few digits are kept exactly.
    std::string_view body = text;
    bool neg = false;
    if (!body.empty() && (body[0] == '-' || body[0] == '+')) {
        neg = body[0] == '-';
        body.remove_prefix(1);
    }
    std::int64_t num = 0, den = 1;
    int digits = 0;
    bool dot = false, ok = !body.empty();
    for (char ch : body) {
        if (ch == '.' && !dot) {
            dot = true;
        } else if (ch >= '0' && ch <= '9') {
            if (++digits > 17) {
                ok = false;
                break;
            }
            num = num * 10 + (ch - '0');
            if (dot) den *= 10;
        } else {
            ok = false;
            break;
        }
    }
    if (ok && digits > 0) {
        const std::int64_t g = std::gcd(num, den);
        c.exact = Rational{(neg ? -num : num) / g, den / g};
    }
    return c;
}

std::uint64_t DyadicSpace::index_in_level(NodeId v) const {
    tree_.require_valid(v);
    return v.value - level_start_[tree_.depth(v)];
}

NodeId DyadicSpace::node_at(std::size_t level, std::uint64_t index) const {
    if (level > depth_ || index >= cells_at(level)) throw InputError("cell index out of range");
    return NodeId{static_cast<std::uint32_t>(level_start_[level] + index)};
}

std::uint64_t DyadicSpace::cells_at(std::size_t level) const { return ipow(branching_, level); }

Cell DyadicSpace::cell(NodeId v) const { return cell_geometry(kind_, dim_, level(v), index_in_level(v)); }

double DyadicSpace::cell_mass_at_level(std::size_t level) const {
    return std::pow(1.0 / static_cast<double>(branching_), static_cast<double>(level));
}

double DyadicSpace::cell_mass(NodeId v) const { return cell_mass_at_level(level(v)); }

double DyadicSpace::cell_width(std::size_t level) const {
    return std::pow(kind_ == SpaceKind::Cantor ? 1.0 / 3.0 : 0.5, static_cast<double>(level));
}

double DyadicSpace::diameter(NodeId v) const { return cell_width(level(v)); }

std::array<std::uint64_t, 3> DyadicSpace::axis_index(NodeId v) const {
    const std::size_t k = level(v);
    const std::uint64_t j = index_in_level(v);
    std::array<std::uint64_t, 3> idx{};
    if (kind_ != SpaceKind::Cube) {
        idx[0] = j;
        return idx;
    }
    for (std::size_t i = k; i-- > 0;) {
        const std::uint64_t digit = (j >> (i * dim_)) & ((std::uint64_t{1} << dim_) - 1);
        for (std::size_t a = 0; a < dim_; ++a) idx[a] = idx[a] * 2 + ((digit >> a) & 1u);
    }
    return idx;
}

NodeId DyadicSpace::node_from_axes(std::size_t level, const std::array<std::uint64_t, 3>& idx) const {
    if (kind_ != SpaceKind::Cube) return node_at(level, idx[0]);
    std::uint64_t j = 0;
    for (std::size_t i = level; i-- > 0;) {
        std::uint64_t digit = 0;
        for (std::size_t a = 0; a < dim_; ++a) digit |= ((idx[a] >> i) & 1u) << a;
        j = (j << dim_) | digit;
    }
    return node_at(level, j);
}

double DyadicSpace::distance(const Point& x, const Point& y) const {
    double d = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) d = std::max(d, std::abs(x[i] - y[i]));
    return d;
}

double DyadicSpace::ball_mass(const Point& x, double r) const {
    if (kind_ == SpaceKind::Cantor) {
        return cantor_function(std::min(1.0, x[0] + r)) - cantor_function(std::max(0.0, x[0] - r));
    }
    double m = 1.0;
    for (std::size_t i = 0; i < dim_; ++i) m *= std::min(1.0, x[i] + r) - std::max(0.0, x[i] - r);
    return m;
}

void DyadicSpace::require_point(const Point& x) const {
    if (x.size() != dim_) throw InputError("point has the wrong number of coordinates");
    for (double c : x) {
        if (!(c >= 0.0 && c <= 1.0)) throw InputError("point outside the space");
    }
    if (kind_ == SpaceKind::Cantor && cantor_distance(x[0]) > 1e-9) {
        throw InputError("point outside the space (not in the Cantor set)");
    }
}

double DyadicSpace::cell_gap(NodeId a, NodeId b) const { return box_gap(cell(a), cell(b), dim_); }

DyadicSpace make_space(SpaceKind kind, const SpaceParams& params) {
    DyadicSpace s;
    s.kind_ = kind;
    s.depth_ = params.depth;
    switch (kind) {
        case SpaceKind::Interval:
            s.dim_ = 1;
            s.Q_ = 1.0;
            s.delta_ = 0.5;
            s.branching_ = 2;
            break;
        case SpaceKind::Cube:
            if (params.Q < 1 || params.Q > 3) throw InputError("cube dimension must be 1, 2 or 3");
            s.dim_ = static_cast<std::size_t>(params.Q);
            s.Q_ = params.Q;
            s.delta_ = 0.5;
            s.branching_ = std::size_t{1} << params.Q;
            break;
        case SpaceKind::Cantor:
            s.dim_ = 1;
            s.Q_ = std::log(2.0) / std::log(3.0);
            s.delta_ = 1.0 / 3.0;
            s.branching_ = 2;
            break;
    }
    if (params.delta) {
        const double d = *params.delta;
        if (!(d > 0.0 && d < 1.0)) throw InputError("delta must lie in (0,1)");
        if (std::abs(d - s.delta_) > 1e-12) {
            throw InputError("delta " + std::to_string(d) + " does not match the " + to_string(kind) + " space");
        }
    }
    // Node-count guard before allocating anything.
    double nodes = 0.0;
    for (std::size_t k = 0; k <= params.depth; ++k) nodes += std::pow(static_cast<double>(s.branching_), k);
    if (nodes > static_cast<double>(WeightedTree::kMaxNodes)) {
        throw InputError("space depth " + std::to_string(params.depth) + " exceeds the node budget");
    }
    s.level_start_.assign(params.depth + 2, 0);
    for (std::size_t k = 1; k <= params.depth + 1; ++k) {
        s.level_start_[k] = s.level_start_[k - 1] + ipow(s.branching_, k - 1);
    }
    const double m1 = 1.0 / static_cast<double>(s.branching_);
    s.tree_ = WeightedTree::homogeneous(s.branching_, params.depth, WeightRule{1.0, m1})
                  .with_delta(s.delta_);
    return s;
}

DyadicSpace make_space(std::string_view kind, std::size_t depth) {
    SpaceParams params;
    params.depth = depth;
    if (kind == "interval") return make_space(SpaceKind::Interval, params);
    if (kind == "cantor") return make_space(SpaceKind::Cantor, params);
    if (kind == "cube") {
        params.Q = 2;
        return make_space(SpaceKind::Cube, params);
    }
    if (kind.starts_with("cube:")) {
        auto q = kind.substr(5);
        int Q = 0;
        auto r = std::from_chars(q.data(), q.data() + q.size(), Q);
        if (r.ec != std::errc{} || r.ptr != q.data() + q.size()) throw InputError("bad cube dimension");
        params.Q = Q;
        return make_space(SpaceKind::Cube, params);
    }
    throw InputError("unknown space kind '" + std::string(kind) + "'");
}

WeightedTree weight_pi_s(const DyadicSpace& space, double s, double p) {
    if (!(s > 0.0 && s < 1.0)) throw InputError("s must lie in (0,1)");
    const double q = conjugate_exponent(p);
    const double e = (s * q - 1.0) / (q - 1.0);
    const double m1 = space.cell_mass_at_level(1);
    const auto& t = space.tree();
    return t.with_weights([&](NodeId v) { return std::pow(m1, static_cast<double>(t.depth(v)) * e); });
}

double cantor_function(double x) {
    if (!(x > 0.0)) return 0.0;
    if (x >= 1.0) return 1.0;
    double result = 0.0, scale = 0.5;
    for (int i = 0; i < 64; ++i) {
        x *= 3.0;
        int d = static_cast<int>(x);
        if (d > 2) d = 2;
        x -= d;
        if (d == 1) return result + scale;
        if (d == 2) result += scale;
        scale *= 0.5;
    }
    return result;
}

double cantor_distance(double x) {
    if (x < 0.0) return -x;
    if (x > 1.0) return x - 1.0;
    double lo = 0.0, w = 1.0;
    for (int i = 0; i < 60; ++i) {
        const double a = lo + w / 3.0, b = lo + 2.0 * w / 3.0;
        if (x <= a) {
            w /= 3.0;
        } else if (x >= b) {
            lo = b;
            w /= 3.0;
        } else {
            return std::min(x - a, b - x);
        }
    }
    return 0.0;
}

SetDescriptor SetDescriptor::parse(std::string_view text, std::size_t dim) {
    auto tok = tokens(text);
    if (tok.empty()) throw InputError("empty set descriptor");
    const std::string_view head = tok.front();
    std::vector<Coordinate> nums;
    for (std::size_t i = 1; i < tok.size(); ++i) nums.push_back(Coordinate::parse(tok[i]));
    if (nums.empty()) throw InputError("empty set descriptor");
    SetDescriptor sd;
    if (head == "interval" || head == "box") {
        if (head == "interval" && dim != 1) throw InputError("'interval' needs a one-dimensional space; use 'box'");
        if (nums.size() % (2 * dim) != 0) throw InputError("box descriptor needs 2 numbers per axis");
        sd.kind = Kind::Boxes;
        for (std::size_t i = 0; i < nums.size(); i += 2 * dim) {
            Box b;
            for (std::size_t a = 0; a < dim; ++a) {
                b.lo[a] = nums[i + 2 * a].value;
                b.hi[a] = nums[i + 2 * a + 1].value;
                if (!(0.0 <= b.lo[a] && b.lo[a] <= b.hi[a] && b.hi[a] <= 1.0)) {
                    throw InputError("box must satisfy 0 <= lo <= hi <= 1 on every axis");
                }
            }
            sd.boxes.push_back(b);
        }
    } else if (head == "ifs") {
        if (dim != 1) throw InputError("'ifs' needs a one-dimensional space");
        if (nums.size() % 2 != 0) throw InputError("ifs descriptor needs ratio/translation pairs");
        sd.kind = Kind::Ifs;
        for (std::size_t i = 0; i < nums.size(); i += 2) {
            Map m{nums[i].value, nums[i + 1].value};
            if (!(m.ratio > 0.0 && m.ratio < 1.0)) throw InputError("ifs ratios must lie in (0,1)");
            const double f = m.shift / (1.0 - m.ratio);
            if (!(f >= -kSnap && f <= 1.0 + kSnap)) throw InputError("ifs attractor leaves the unit interval");
            sd.maps.push_back(m);
        }
    } else if (head == "points") {
        if (nums.size() % dim != 0) throw InputError("points descriptor needs dim coordinates per point");
        sd.kind = Kind::Points;
        for (std::size_t i = 0; i < nums.size(); i += dim) {
            sd.points.emplace_back(nums.begin() + static_cast<std::ptrdiff_t>(i),
                                   nums.begin() + static_cast<std::ptrdiff_t>(i + dim));
        }
    } else {
        throw InputError("unknown set descriptor '" + std::string(head) + "'");
    }
    return sd;
}

std::vector<NodeId> containing_cells(const DyadicSpace& space, const ExactPoint& x, std::size_t level,
                                     bool* snapped) {
    if (x.size() != space.dim()) throw InputError("point has the wrong number of coordinates");
    if (level > space.depth()) throw InputError("level exceeds the space depth");
    Point plain;
    for (const auto& c : x) plain.push_back(c.value);
    space.require_point(plain);
    std::vector<NodeId> out;
    if (space.kind() == SpaceKind::Cantor) {
        for (std::int64_t L : axis_candidates(x[0], 3, level, snapped)) {
            if (auto code = cantor_code(static_cast<std::uint64_t>(L), level)) {
                out.push_back(space.node_at(level, *code));
            }
        }
    } else {
        std::vector<std::vector<std::int64_t>> per_axis;
        for (std::size_t a = 0; a < space.dim(); ++a) per_axis.push_back(axis_candidates(x[a], 2, level, snapped));
        std::array<std::uint64_t, 3> idx{};
        auto rec = [&](auto&& self, std::size_t a) -> void {
            if (a == space.dim()) {
                out.push_back(space.node_from_axes(level, idx));
                return;
            }
            for (std::int64_t v : per_axis[a]) {
                idx[a] = static_cast<std::uint64_t>(v);
                self(self, a + 1);
            }
        };
        rec(rec, 0);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

BoundarySet discretize_set(const DyadicSpace& space, const SetDescriptor& sd, std::size_t depth) {
    if (depth > space.depth()) throw InputError("discretisation depth exceeds the space depth");
    const auto& tree = space.tree();
    if (sd.kind == SetDescriptor::Kind::Points) {
        if (sd.points.empty()) throw InputError("empty set descriptor");
        std::vector<NodeId> nodes;
        for (const auto& x : sd.points) {
            auto c = containing_cells(space, x, depth);
            if (c.empty()) throw InputError("point outside the space");
            nodes.insert(nodes.end(), c.begin(), c.end());
        }
        return normalize_antichain(tree, nodes);
    }
    if (sd.kind == SetDescriptor::Kind::Boxes && sd.boxes.empty()) throw InputError("empty set descriptor");
    if (sd.kind == SetDescriptor::Kind::Ifs) {
        if (sd.maps.empty()) throw InputError("empty set descriptor");
        if (space.kind() != SpaceKind::Interval) throw InputError("ifs descriptors need the interval space");
    }
    auto meets = [&](NodeId v) {
        const Cell c = space.cell(v);
        if (sd.kind == SetDescriptor::Kind::Ifs) return ifs_meets(sd.maps, c.lo[0], c.hi[0]);
        for (const auto& b : sd.boxes) {
            bool hit = true;
            std::array<double, 3> lo{}, hi{};
            for (std::size_t a = 0; a < space.dim() && hit; ++a) {
                lo[a] = std::max(c.lo[a], b.lo[a]);
                hi[a] = std::min(c.hi[a], b.hi[a]);
                // a box with extent along this axis must overlap the cell, not just touch a face
                hit = b.lo[a] < b.hi[a] ? lo[a] < hi[a] : lo[a] <= hi[a];
            }
            if (!hit) continue;
            if (space.kind() != SpaceKind::Cantor || ifs_meets(cantor_maps(), lo[0], hi[0])) return true;
        }
        return false;
    };
    std::vector<NodeId> out;
    std::vector<NodeId> stack{tree.root()};
    while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        if (!meets(v)) continue;
        if (tree.depth(v) == depth) {
            out.push_back(v);
            continue;
        }
        for (NodeId c : tree.children(v)) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return BoundarySet::from_antichain(tree, out);
}

double kernel_K(const DyadicSpace& space, const Point& x, const Point& y, double s) {
    space.require_point(x);
    space.require_point(y);
    if (!(s > 0.0 && s < 1.0)) throw InputError("s must lie in (0,1)");
    const double r = space.distance(x, y);
    if (r == 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(space.ball_mass(x, r) + space.ball_mass(y, r), -s);
}

double SpaceMeasure::total() const {
    double t = 0.0;
    for (const auto& c : cells) t += c.second;
    for (const auto& a : atoms) t += a.second;
    return t;
}

double closed_cell_mass(const DyadicSpace& space, const SpaceMeasure& omega, NodeId v) {
    const auto& tree = space.tree();
    double m = 0.0;
    for (const auto& [beta, w] : omega.cells) {
        if (tree.is_ancestor_or_self(v, beta)) {
            m += w;
        } else if (tree.is_ancestor_or_self(beta, v)) {
            m += w * space.cell_mass(v) / space.cell_mass(beta);
        }
    }
    if (!omega.atoms.empty()) {
        const Cell c = space.cell(v);
        for (const auto& [x, w] : omega.atoms) {
            bool in = true;
            for (std::size_t a = 0; a < space.dim(); ++a) {
                in = in && x[a] >= c.lo[a] - kSnap && x[a] <= c.hi[a] + kSnap;
            }
            if (in) m += w;
        }
    }
    return m;
}

double continuous_energy(const DyadicSpace& space, const SpaceMeasure& omega, double s, double p,
                         std::size_t resolution) {
    if (!(s > 0.0 && s < 1.0)) throw InputError("s must lie in (0,1)");
    const double q = conjugate_exponent(p);
    const auto& tree = space.tree();
    for (const auto& [beta, w] : omega.cells) {
        tree.require_valid(beta);
        if (w < 0.0) throw InputError("negative mass");
        if (tree.depth(beta) >= resolution) {
            throw InputError("resolution too coarse: quadrature level must exceed every cell depth");
        }
    }
    for (const auto& [x, w] : omega.atoms) {
        space.require_point(x);
        if (w < 0.0) throw InputError("negative mass");
    }
    const std::uint64_t b = space.branching();
    const std::uint64_t N = ipow(b, resolution);
    if (N > (std::uint64_t{1} << 14)) throw InputError("quadrature resolution exceeds 2^14 cells");
    if (omega.total() == 0.0) return 0.0;

    const std::size_t dim = space.dim();
    const SpaceKind kind = space.kind();
    auto K = [&](const Point& x, const Point& y) {
        const double r = space.distance(x, y);
        if (r == 0.0) return std::numeric_limits<double>::infinity();
        return std::pow(space.ball_mass(x, r) + space.ball_mass(y, r), -s);
    };

    std::vector<Cell> cells(N);
    std::vector<Point> mid(N);
    for (std::uint64_t i = 0; i < N; ++i) {
        cells[i] = cell_geometry(kind, dim, resolution, i);
        mid[i] = midpoint(cells[i], dim);
    }
    std::vector<double> w(N, 0.0);
    for (const auto& [beta, mass] : omega.cells) {
        const std::size_t kb = tree.depth(beta);
        const std::uint64_t span = ipow(b, resolution - kb);
        const std::uint64_t j = space.index_in_level(beta);
        for (std::uint64_t t = 0; t < span; ++t) w[j * span + t] += mass / static_cast<double>(span);
    }

    // Sub-cell refinement used on the diagonal and between touching cells.
    const std::size_t sub_levels = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(4.0 / std::log2(b))));
    const std::uint64_t nsub = ipow(b, sub_levels);
    auto subcells = [&](std::uint64_t i) {
        std::vector<Point> pts(nsub);
        for (std::uint64_t t = 0; t < nsub; ++t) {
            pts[t] = midpoint(cell_geometry(kind, dim, resolution + sub_levels, i * nsub + t), dim);
        }
        return pts;
    };
    const double width = space.cell_width(resolution);
    const double shrink = std::pow(static_cast<double>(nsub), s - 1.0);

    std::vector<double> Kw(N, 0.0);
    std::vector<std::vector<Point>> sub(N);
    for (std::uint64_t i = 0; i < N; ++i) {
        if (w[i] > 0.0) sub[i] = subcells(i);
    }
    for (std::uint64_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (std::uint64_t j = 0; j < N; ++j) {
            if (w[j] == 0.0) continue;
            if (i == j) {
                // Self-similar extrapolation: the diagonal block of the refined
                // average is a scaled copy of the whole average.
                double off = 0.0;
                for (std::uint64_t a = 0; a < nsub; ++a) {
                    for (std::uint64_t c = 0; c < nsub; ++c) {
                        if (a != c) off += K(sub[j][a], sub[j][c]);
                    }
                }
                off /= static_cast<double>(nsub * nsub);
                acc += w[j] * off / (1.0 - shrink);
            } else if (box_gap(cells[i], cells[j], dim) <= width * (1.0 + 1e-9)) {
                const auto si = sub[i].empty() ? subcells(i) : sub[i];
                double avg = 0.0;
                for (const auto& x : si) {
                    for (const auto& y : sub[j]) avg += K(x, y);
                }
                acc += w[j] * avg / static_cast<double>(nsub * nsub);
            } else {
                acc += w[j] * K(mid[i], mid[j]);
            }
        }
        for (const auto& [y, mass] : omega.atoms) acc += mass * K(mid[i], y);
        Kw[i] = acc;
    }
    const double mcell = space.cell_mass_at_level(resolution);
    double e = 0.0;
    for (double v : Kw) e += mcell * std::pow(v, q);
    return e;
}

Point lambda_map(const DyadicSpace& space, const Ray& ray) {
    space.tree().require_valid(ray.prefix);
    const Cell c = space.cell(ray.prefix);
    const std::size_t dim = space.dim();
    if (ray.rule == Ray::Rule::Toward) {
        if (ray.target.size() != dim) throw InputError("ray target has the wrong number of coordinates");
        for (std::size_t a = 0; a < dim; ++a) {
            if (ray.target[a] < c.lo[a] - kSnap || ray.target[a] > c.hi[a] + kSnap) {
                throw InputError("ray target lies outside the prefix cell");
            }
        }
        return ray.target;
    }
    std::vector<unsigned> digits;
    const unsigned b = static_cast<unsigned>(space.branching());
    switch (ray.rule) {
        case Ray::Rule::AllLeft: digits = {0}; break;
        case Ray::Rule::AllRight: digits = {b - 1}; break;
        default: digits = ray.period; break;
    }
    if (digits.empty()) throw InputError("periodic ray needs a nonempty period");
    for (unsigned d : digits) {
        if (d >= b) throw InputError("ray digit out of range");
    }
    const bool cantor = space.kind() == SpaceKind::Cantor;
    const double r = cantor ? 1.0 / 3.0 : 0.5;
    Point x(dim);
    for (std::size_t a = 0; a < dim; ++a) {
        // Compose the child maps, innermost (last digit) first.
        double A = 1.0, B = 0.0;
        for (std::size_t i = digits.size(); i-- > 0;) {
            const double shift = cantor ? 2.0 * digits[i] : static_cast<double>((digits[i] >> a) & 1u);
            A = r * A;
            B = r * (B + shift);
        }
        const double fix = B / (1.0 - A);
        x[a] = c.lo[a] + (c.hi[a] - c.lo[a]) * fix;
    }
    return x;
}

SpaceMeasure push_forward(const DyadicSpace& space, const TreeMeasure& nu) {
    if (nu.tree_size() != space.tree().size()) throw InputError("measure does not live on the space's tree");
    SpaceMeasure out;
    for (const auto& a : nu.atoms()) {
        if (a.mass > 0.0) out.cells.emplace_back(a.node, a.mass);
    }
    return out;
}

SpaceMeasure push_forward(const DyadicSpace& space, const std::vector<std::pair<Ray, double>>& rays) {
    std::map<Point, double> merged;
    std::vector<Point> order;
    for (const auto& [ray, mass] : rays) {
        Point x = lambda_map(space, ray);
        auto [it, fresh] = merged.emplace(x, 0.0);
        if (fresh) order.push_back(x);
        it->second += mass;
    }
    SpaceMeasure out;
    for (const auto& x : order) out.atoms.emplace_back(x, merged[x]);
    return out;
}

PullBack pull_back_atomic(const DyadicSpace& space, const std::vector<std::pair<ExactPoint, double>>& atoms,
                          std::size_t depth) {
    PullBack out;
    std::map<NodeId, double> acc;
    for (const auto& [x, mass] : atoms) {
        if (!(mass >= 0.0) || !std::isfinite(mass)) throw InputError("negative or non-finite mass");
        const auto cells = containing_cells(space, x, depth, &out.snapped);
        if (cells.empty()) throw InputError("point outside the space");
        out.multiplicity.push_back(cells.size());
        const double share = mass / static_cast<double>(cells.size());
        Point plain;
        for (const auto& c : x) plain.push_back(c.value);
        for (NodeId v : cells) {
            acc[v] += share;
            out.rays.push_back({Ray{v, Ray::Rule::Toward, {}, plain}, share});
        }
    }
    std::vector<std::pair<NodeId, double>> masses(acc.begin(), acc.end());
    out.measure = measure_from_masses(space.tree(), masses);
    return out;
}

std::vector<NodeId> graph_predecessor_set(const DyadicSpace& space, const ExactPoint& x, std::size_t depth) {
    if (depth > space.depth()) throw InputError("depth exceeds the space depth");
    std::set<NodeId> out;
    const std::size_t dim = space.dim();
    for (std::size_t k = 0; k <= depth; ++k) {
        const auto base = containing_cells(space, x, k);
        const double reach = std::pow(space.delta(), static_cast<double>(k)) * (1.0 + 1e-9);
        const std::int64_t n = std::int64_t{1} << k;  // cells per axis
        for (NodeId v : base) {
            out.insert(v);
            const auto idx = space.axis_index(v);
            std::array<std::int64_t, 3> off{-2, -2, -2};
            // Walk every offset in {-2..2}^dim.
            while (true) {
                std::array<std::uint64_t, 3> nb{};
                bool inside = true;
                for (std::size_t a = 0; a < dim; ++a) {
                    const std::int64_t t = static_cast<std::int64_t>(idx[a]) + off[a];
                    inside = inside && t >= 0 && t < n;
                    nb[a] = static_cast<std::uint64_t>(std::max<std::int64_t>(t, 0));
                }
                if (inside) {
                    const NodeId u = space.node_from_axes(k, nb);
                    if (space.cell_gap(v, u) <= reach) out.insert(u);
                }
                std::size_t a = 0;
                while (a < dim && off[a] == 2) off[a++] = -2;
                if (a == dim) break;
                ++off[a];
            }
        }
    }
    return {out.begin(), out.end()};
}

BallEstimate ball_capacity_estimate(const DyadicSpace& space, double r, double s, double p) {
    if (!(r > 0.0 && r <= 1.0)) throw InputError("radius must lie in (0,1]");
    if (!(s > 0.0 && s < 1.0)) throw InputError("s must lie in (0,1)");
    const double q = conjugate_exponent(p);
    BallEstimate out;
    out.level = std::lround(std::log(1.0 / r) / std::log(1.0 / space.delta()));
    const double gap = s - 1.0 / q;
    out.log_case = std::abs(gap) <= 1e-12;
    out.positive_point_regime = gap < -1e-12;
    if (out.log_case) {
        out.value = std::pow(static_cast<double>(std::max<long>(out.level, 1)), 1.0 - p);
    } else {
        out.value = std::pow(space.cell_mass_at_level(1), static_cast<double>(out.level) * p * gap);
    }
    return out;
}

}  // namespace captree
