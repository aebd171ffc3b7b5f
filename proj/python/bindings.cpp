#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "captree/acceptance.hpp"
#include "captree/capacity.hpp"
#include "captree/cli.hpp"
#include "captree/dyadic.hpp"
#include "captree/errors.hpp"
#include "captree/lab.hpp"
#include "captree/potential.hpp"
#include "captree/tree_io.hpp"

namespace py = pybind11;
using namespace captree;

namespace {

std::vector<NodeId> ids(const std::vector<std::uint32_t>& v) {
    std::vector<NodeId> out;
    out.reserve(v.size());
    for (auto x : v) out.push_back(NodeId{x});
    return out;
}

std::vector<std::uint32_t> raw(std::span<const NodeId> v) {
    std::vector<std::uint32_t> out;
    out.reserve(v.size());
    for (auto x : v) out.push_back(x.value);
    return out;
}

std::vector<double> values(const NodeFunction& f) { return {f.values().begin(), f.values().end()}; }

BoundarySet as_set(const WeightedTree& t, const std::vector<std::uint32_t>& nodes) {
    return BoundarySet::from_antichain(t, ids(nodes));
}

TreeMeasure as_measure(const WeightedTree& t, const std::map<std::uint32_t, double>& masses) {
    std::vector<std::pair<NodeId, double>> m;
    for (const auto& [v, w] : masses) m.emplace_back(NodeId{v}, w);
    return measure_from_masses(t, m);
}

py::dict report_dict(const CheckReport& r) {
    py::dict d;
    d["name"] = r.name;
    d["instance"] = r.instance;
    d["left"] = r.left;
    d["right"] = r.right;
    d["ratio"] = r.ratio;
    d["bound"] = r.bound ? py::cast(*r.bound) : py::none();
    d["empirical"] = r.empirical ? py::cast(*r.empirical) : py::none();
    d["pass"] = r.pass;
    d["note"] = r.note;
    d["seed"] = r.seed;
    py::dict details;
    for (const auto& [k, v] : r.details) details[py::str(k)] = v;
    d["details"] = details;
    d["series"] = r.series;
    return d;
}

py::dict oracle_dict(const OracleResult& r) {
    py::dict d;
    d["value"] = r.value;
    d["lower"] = r.lower;
    d["upper"] = r.upper;
    d["iterations"] = r.iterations;
    return d;
}

}  // namespace

PYBIND11_MODULE(_captree, m) {
    m.doc() = "Capacities of boundary sets of weighted trees";

    // InputError derives from std::invalid_argument, which pybind11 already maps to ValueError
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);

    py::class_<WeightedTree>(m, "Tree")
        .def_static(
            "homogeneous",
            [](std::size_t b, std::size_t h, double scale, double ratio) {
                return WeightedTree::homogeneous(b, h, WeightRule{scale, ratio});
            },
            py::arg("branching"), py::arg("height"), py::arg("scale") = 1.0, py::arg("ratio") = 1.0)
        .def_static(
            "chain", [](std::size_t h, double scale, double ratio) { return WeightedTree::chain(h, WeightRule{scale, ratio}); },
            py::arg("height"), py::arg("scale") = 1.0, py::arg("ratio") = 1.0)
        .def_static("from_spec", &tree_from_spec, py::arg("spec"), py::arg("p") = 2.0)
        .def_static("parse", &parse_tree, py::arg("text"))
        .def("serialize", &serialize_tree)
        .def_property_readonly("size", &WeightedTree::size)
        .def_property_readonly("height", &WeightedTree::height)
        .def_property_readonly("weights", [](const WeightedTree& t) {
            return std::vector<double>(t.weights().begin(), t.weights().end());
        })
        .def("depth", [](const WeightedTree& t, std::uint32_t v) {
            t.require_valid(NodeId{v});
            return t.depth(NodeId{v});
        })
        .def("parent", [](const WeightedTree& t, std::uint32_t v) -> std::optional<std::uint32_t> {
            t.require_valid(NodeId{v});
            const auto p = t.parent(NodeId{v});
            return p ? std::optional<std::uint32_t>(p->value) : std::nullopt;
        })
        .def("children", [](const WeightedTree& t, std::uint32_t v) {
            t.require_valid(NodeId{v});
            std::vector<std::uint32_t> out;
            for (NodeId c : t.children(NodeId{v})) out.push_back(c.value);
            return out;
        })
        .def("leaves", [](const WeightedTree& t) { return raw(t.leaves()); })
        .def("nodes_at_depth", [](const WeightedTree& t, std::size_t k) { return raw(t.nodes_at_depth(k)); })
        .def("__len__", &WeightedTree::size);

    m.def("conjugate_exponent", &conjugate_exponent, py::arg("p"));
    m.def(
        "d_pi", [](const WeightedTree& t, std::uint32_t v, double p) { return d_pi(t, NodeId{v}, p); }, py::arg("tree"),
        py::arg("node"), py::arg("p"));

    m.def(
        "capacity", [](const WeightedTree& t, const std::vector<std::uint32_t>& E, double p) { return capacity(t, as_set(t, E), p); },
        py::arg("tree"), py::arg("nodes"), py::arg("p") = 2.0, "Capacity of the boundary below an antichain of node ids.");
    m.def(
        "capacity_interior",
        [](const WeightedTree& t, const std::vector<std::uint32_t>& E, double p) { return capacity_interior(t, ids(E), p); },
        py::arg("tree"), py::arg("nodes"), py::arg("p") = 2.0);
    m.def(
        "capacity_point", [](const WeightedTree& t, std::uint32_t v, double p) { return capacity_point(t, NodeId{v}, p); },
        py::arg("tree"), py::arg("node"), py::arg("p") = 2.0);
    m.def(
        "equilibrium",
        [](const WeightedTree& t, const std::vector<std::uint32_t>& E, double p) {
            const auto r = equilibrium(t, as_set(t, E), p);
            py::dict d;
            d["capacity"] = r.capacity;
            d["phi"] = values(r.phi);
            d["measure"] = std::vector<double>(r.mu.istar_field().begin(), r.mu.istar_field().end());
            d["max_constraint_error"] = r.max_constraint_error;
            d["carleson_norm"] = r.carleson;
            return d;
        },
        py::arg("tree"), py::arg("nodes"), py::arg("p") = 2.0,
        "Extremal function phi and the subtree masses of the equilibrium measure, per node.");

    m.def(
        "primal_oracle",
        [](const WeightedTree& t, const std::vector<std::uint32_t>& E, double p, double tol, long max_iter) {
            return oracle_dict(capacity_primal_oracle(t, as_set(t, E), p, {tol, max_iter}));
        },
        py::arg("tree"), py::arg("nodes"), py::arg("p") = 2.0, py::arg("tol") = 1e-8, py::arg("max_iter") = 100000);
    m.def(
        "dual_oracle",
        [](const WeightedTree& t, const std::vector<std::uint32_t>& E, double p, double tol, long max_iter) {
            return oracle_dict(capacity_dual_oracle(t, as_set(t, E), p, {tol, max_iter}));
        },
        py::arg("tree"), py::arg("nodes"), py::arg("p") = 2.0, py::arg("tol") = 1e-8, py::arg("max_iter") = 100000);
    m.def(
        "quadratic_oracle",
        [](const WeightedTree& t, const std::vector<std::uint32_t>& E) { return capacity_quadratic_oracle(t, as_set(t, E)); },
        py::arg("tree"), py::arg("nodes"));

    m.def(
        "energy", [](const WeightedTree& t, const std::map<std::uint32_t, double>& mu, double p) { return energy(t, as_measure(t, mu), p); },
        py::arg("tree"), py::arg("masses"), py::arg("p") = 2.0, "Energy of a measure given as {node: mass} on an antichain.");
    m.def(
        "carleson_norm",
        [](const WeightedTree& t, const std::map<std::uint32_t, double>& mu, double p) { return carleson_norm(t, as_measure(t, mu), p); },
        py::arg("tree"), py::arg("masses"), py::arg("p") = 2.0);
    m.def(
        "hardy", [](const WeightedTree& t, const std::vector<double>& f) { return values(hardy_all(t, NodeFunction(f))); },
        py::arg("tree"), py::arg("f"), "Sums of f along each closed geodesic from the root.");

    py::class_<DyadicSpace>(m, "Space")
        .def_property_readonly("kind", [](const DyadicSpace& s) { return to_string(s.kind()); })
        .def_property_readonly("depth", &DyadicSpace::depth)
        .def_property_readonly("dim", &DyadicSpace::dim)
        .def_property_readonly("Q", &DyadicSpace::Q)
        .def_property_readonly("delta", &DyadicSpace::delta)
        .def_property_readonly("tree", &DyadicSpace::tree)
        .def("cell", [](const DyadicSpace& s, std::uint32_t v) {
            s.tree().require_valid(NodeId{v});
            const Cell c = s.cell(NodeId{v});
            return py::make_tuple(std::vector<double>(c.lo.begin(), c.lo.begin() + s.dim()),
                                  std::vector<double>(c.hi.begin(), c.hi.begin() + s.dim()));
        });
    m.def("make_space", py::overload_cast<std::string_view, std::size_t>(&make_space), py::arg("kind"),
          py::arg("depth"), "kind is interval, cantor, cube or cube:Q");
    m.def("weight_pi_s", &weight_pi_s, py::arg("space"), py::arg("s"), py::arg("p") = 2.0);
    m.def(
        "discretize",
        [](const DyadicSpace& s, const std::string& desc, std::size_t depth) {
            return raw(discretize_set(s, SetDescriptor::parse(desc, s.dim()), depth).nodes());
        },
        py::arg("space"), py::arg("descriptor"), py::arg("depth"), "Level-depth cells meeting the described set.");
    m.def(
        "ball_capacity_estimate",
        [](const DyadicSpace& s, double r, double sp, double p) {
            const auto e = ball_capacity_estimate(s, r, sp, p);
            py::dict d;
            d["value"] = e.value;
            d["level"] = e.level;
            d["log_case"] = e.log_case;
            d["positive_point_regime"] = e.positive_point_regime;
            return d;
        },
        py::arg("space"), py::arg("r"), py::arg("s"), py::arg("p") = 2.0);

    m.def(
        "check_cmcap",
        [](const WeightedTree& t, const std::vector<std::uint32_t>& E, double p, std::size_t n, std::uint64_t seed) {
            return report_dict(check_cmcap(t, as_set(t, E), p, n, seed));
        },
        py::arg("tree"), py::arg("nodes"), py::arg("p") = 2.0, py::arg("samples") = 50, py::arg("seed") = 1);
    m.def(
        "check_shadow",
        [](const WeightedTree& t, const std::vector<std::uint32_t>& E, double p) { return report_dict(check_shadow(t, as_set(t, E), p)); },
        py::arg("tree"), py::arg("nodes"), py::arg("p") = 2.0);
    m.def(
        "check_maximal",
        [](const WeightedTree& t, double p, std::size_t n, std::uint64_t seed) { return report_dict(check_maximal(t, p, n, seed)); },
        py::arg("tree"), py::arg("p") = 2.0, py::arg("samples") = 50, py::arg("seed") = 1);

    m.def(
        "selftest",
        [](const std::vector<int>& only) {
            py::list out;
            for (const auto& r : run_acceptance(only)) {
                py::dict d;
                d["id"] = r.id;
                d["title"] = r.title;
                d["pass"] = r.pass;
                d["detail"] = r.detail;
                out.append(d);
            }
            return out;
        },
        py::arg("only") = std::vector<int>{}, "Acceptance criteria; all of them when only is empty.");
    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::vector<const char*> argv{"captree"};
            for (const auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
