#include "captree/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "captree/acceptance.hpp"
#include "captree/capacity.hpp"
#include "captree/dyadic.hpp"
#include "captree/errors.hpp"
#include "captree/instances.hpp"
#include "captree/lab.hpp"
#include "captree/potential.hpp"
#include "captree/report.hpp"
#include "captree/tree_io.hpp"

namespace captree {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T number(std::string_view text, const char* what) {
    T v{};
    const auto* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, v);
    if (text.empty() || r.ec != std::errc{} || r.ptr != end) {
        throw InputError(std::string("bad ") + what + " '" + std::string(text) + "'");
    }
    return v;
}

std::pair<std::size_t, std::size_t> depth_range(std::string_view text) {
    const auto dots = text.find("..");
    if (dots == std::string_view::npos) {
        const auto d = number<std::size_t>(trim(text), "depth");
        return {d, d};
    }
    const auto a = number<std::size_t>(trim(text.substr(0, dots)), "depth");
    const auto b = number<std::size_t>(trim(text.substr(dots + 2)), "depth");
    if (a > b) throw InputError("empty depth range '" + std::string(text) + "'");
    return {a, b};
}

std::string real_text(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Descriptor of the closed ball of radius r around c, clipped to the unit cube.
std::string ball_descriptor(const DyadicSpace& space, const Point& c, double r) {
    std::string out = space.dim() == 1 ? "interval" : "box";
    for (double x : c) out += " " + real_text(std::max(0.0, x - r)) + " " + real_text(std::min(1.0, x + r));
    return out;
}

struct Settings {
    double p = 2.0;
    double s = 0.5;
    std::size_t depth = 8;
    double tol = 1e-8;
    long max_iter = 100000;
    std::uint64_t seed = 1;
    std::size_t samples = 50;
    std::string format = "table";
};

Settings settings_from(const CliConfig& cfg) {
    Settings st;
    for (const auto& [k, v] : cfg) {
        if (k == "p") st.p = number<double>(v, "p");
        else if (k == "s") st.s = number<double>(v, "s");
        else if (k == "depth") st.depth = number<std::size_t>(v, "depth");
        else if (k == "tol") st.tol = number<double>(v, "tol");
        else if (k == "max_iter") st.max_iter = number<long>(v, "max_iter");
        else if (k == "seed") st.seed = number<std::uint64_t>(v, "seed");
        else if (k == "samples") st.samples = number<std::size_t>(v, "samples");
        else if (k == "format") st.format = v;
        else if (k == "delta") {
            // only checked for validity; each space kind fixes its own ratio
            const double d = number<double>(v, "delta");
            if (!(d > 0.0 && d < 1.0)) throw InputError("config delta must lie in (0,1)");
        } else {
            throw InputError("unknown config key '" + k + "'");
        }
    }
    return st;
}

std::optional<std::string> config_path(int argc, const char* const* argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string_view a = argv[i];
        if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
        if (a.substr(0, 9) == "--config=") return std::string(a.substr(9));
    }
    if (const char* env = std::getenv("CAPTREE_CONFIG"); env && *env) return std::string(env);
    return std::nullopt;
}

TreeMeasure tree_measure(const WeightedTree& tree, std::string_view spec, const BoundarySet& E, double p,
                         std::mt19937_64& rng) {
    if (spec == "equilibrium") return equilibrium(tree, E, p).mu;
    if (spec == "random") return instances::random_leaf_measure(rng, tree, 0.3);
    std::vector<std::pair<NodeId, double>> m;
    if (spec == "uniform") {
        const auto leaves = tree.leaves();
        for (NodeId l : leaves) m.emplace_back(l, 1.0 / static_cast<double>(leaves.size()));
    } else if (spec.substr(0, 6) == "delta:") {
        const auto label = number<std::int64_t>(spec.substr(6), "node label");
        const auto v = tree.find_label(label);
        if (!v) throw InputError("no node with label " + std::to_string(label));
        m.emplace_back(*v, 1.0);
    } else {
        throw InputError("unknown measure '" + std::string(spec) + "' (equilibrium, random, uniform, delta:ID)");
    }
    return measure_from_masses(tree, m);
}

SpaceMeasure space_measure(const DyadicSpace& space, std::string_view spec) {
    if (spec == "lebesgue" || spec == "natural") return {{{space.tree().root(), 1.0}}, {}};
    if (spec.substr(0, 5) == "atom:") {
        Point x;
        for (const auto& c : split(spec.substr(5), ',')) x.push_back(Coordinate::parse(c).value);
        return {{}, {{x, 1.0}}};
    }
    if (spec.substr(0, 5) == "cell:") {
        const auto parts = split(spec.substr(5), ':');
        if (parts.size() != 2) throw InputError("cell measure needs cell:LEVEL:INDEX");
        return {{{space.node_at(number<std::size_t>(parts[0], "level"), number<std::uint64_t>(parts[1], "index")),
                  1.0}},
                {}};
    }
    throw InputError("unknown space measure '" + std::string(spec) + "' (lebesgue, atom:X, cell:K:J)");
}

}  // namespace

CliConfig parse_config(std::string_view text) {
    CliConfig cfg;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty() || value.empty()) throw InputError("config line " + std::to_string(line_no) + ": empty key or value");
        cfg[key] = value;
    }
    return cfg;
}

CliConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

WeightedTree tree_from_spec(std::string_view spec, double p) {
    const auto parts = split(spec, ':');
    const std::string& head = parts[0];
    auto arg = [&](std::size_t i, const char* what) { return number<std::size_t>(parts.at(i), what); };
    if (head == "binary" && (parts.size() == 2 || parts.size() == 3)) {
        if (parts.size() == 2) return build_tree(HomogeneousSpec{2, arg(1, "height"), {}});
        return build_tree(HomogeneousSpec{arg(1, "branching"), arg(2, "height"), {}});
    }
    if (head == "homogeneous" && (parts.size() == 3 || parts.size() == 5)) {
        WeightRule rule;
        if (parts.size() == 5) rule = {number<double>(parts[3], "scale"), number<double>(parts[4], "ratio")};
        return build_tree(HomogeneousSpec{arg(1, "branching"), arg(2, "height"), rule});
    }
    if (head == "chain" && parts.size() == 2) return build_tree(ChainSpec{arg(1, "height"), {}});
    if (head == "pis" && parts.size() == 4) {
        return weight_pi_s(make_space(parts[1], arg(2, "depth")), number<double>(parts[3], "s"), p);
    }
    if (head == "binary" || head == "homogeneous" || head == "chain" || head == "pis") {
        throw InputError("malformed tree generator '" + std::string(spec) + "'");
    }
    return build_tree(FileSpec{std::string(spec)});
}

BoundarySet set_from_spec(const WeightedTree& tree, std::string_view spec) {
    if (spec == "leaves") return BoundarySet::from_antichain(tree, tree.leaves());
    if (spec == "root") return BoundarySet::from_antichain(tree, {tree.root()});
    if (spec.substr(0, 6) == "depth:") {
        const auto k = number<std::size_t>(spec.substr(6), "depth");
        if (k > tree.height()) throw InputError("set depth exceeds the tree height");
        return BoundarySet::from_antichain(tree, tree.nodes_at_depth(k));
    }
    if (spec.substr(0, 6) == "nodes:") {
        std::vector<NodeId> nodes;
        for (const auto& item : split(spec.substr(6), ',')) {
            const auto label = number<std::int64_t>(item, "node label");
            const auto v = tree.find_label(label);
            if (!v) throw InputError("no node with label " + std::to_string(label));
            nodes.push_back(*v);
        }
        return BoundarySet::from_antichain(tree, nodes);
    }
    throw InputError("unknown set '" + std::string(spec) + "' (leaves, root, depth:K, nodes:ID,...)");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        Settings st;
        if (const auto path = config_path(argc, argv)) st = settings_from(load_config(*path));

        CLI::App app{"Capacities on weighted trees and dyadic spaces", "captree"};
        app.require_subcommand(1);
        app.fallthrough();
        std::string config_file;
        app.add_option("--config", config_file, "key = value defaults (else $CAPTREE_CONFIG)");
        app.add_option("--format", st.format, "table, csv or jsonl")->capture_default_str();

        std::string tree_spec, set_spec = "leaves", oracle = "none";
        auto* cap = app.add_subcommand("cap", "capacity of a union of cylinders");
        auto* eq = app.add_subcommand("equilibrium", "equilibrium function and measure");
        for (auto* sc : {cap, eq}) {
            sc->add_option("--tree", tree_spec, "generator or tree file")->required();
            sc->add_option("--set", set_spec, "leaves, root, depth:K or nodes:ID,...")->capture_default_str();
            sc->add_option("--p", st.p, "exponent p > 1")->capture_default_str();
        }
        cap->add_option("--oracle", oracle, "also run an oracle: none, primal, dual, quadratic, all")
            ->capture_default_str();

        std::string space_spec = "interval", set_desc, depths_spec, center;
        auto* est = app.add_subcommand("estimate", "tree capacities of a discretised set over a depth sweep");
        est->add_option("--space", space_spec, "interval, cantor, cube or cube:Q")->capture_default_str();
        est->add_option("--set", set_desc, "set descriptor, e.g. \"interval 0 0.25\"")->required();
        est->add_option("--s", st.s, "kernel parameter in (0,1)")->capture_default_str();
        est->add_option("--p", st.p, "exponent p > 1")->capture_default_str();
        est->add_option("--depths", depths_spec, "a..b")->required();

        auto* ball = app.add_subcommand("ball", "ball capacity estimate against the tree capacity, r = delta^k");
        ball->add_option("--space", space_spec, "interval, cantor, cube or cube:Q")->capture_default_str();
        ball->add_option("--s", st.s, "kernel parameter in (0,1)")->capture_default_str();
        ball->add_option("--p", st.p, "exponent p > 1")->capture_default_str();
        ball->add_option("--levels", depths_spec, "a..b")->required();
        ball->add_option("--center", center, "comma-separated centre (default: space midpoint, 0 for cantor)");

        std::string check_name, measure_spec;
        double q = 0.0;
        bool timing = false, series = false;
        auto* chk = app.add_subcommand("check", "run one inequality check");
        chk->add_option("name", check_name, "mww, cmcap, monotonicity, trace, shadow, energy, maximal")->required();
        chk->add_option("--tree", tree_spec, "generator or tree file");
        chk->add_option("--set", set_spec, "leaves, root, depth:K or nodes:ID,...")->capture_default_str();
        chk->add_option("--space", space_spec, "interval, cantor, cube or cube:Q")->capture_default_str();
        chk->add_option("--measure", measure_spec,
                        "tree: equilibrium, random, uniform, delta:ID; space: lebesgue, atom:X, cell:K:J");
        chk->add_option("--p", st.p, "exponent p > 1")->capture_default_str();
        chk->add_option("--q", q, "MWW exponent (default p')");
        chk->add_option("--s", st.s, "kernel parameter in (0,1)")->capture_default_str();
        chk->add_option("--depths", depths_spec, "a..b (mww, energy)");
        chk->add_option("--samples", st.samples, "random samples")->capture_default_str();
        chk->add_option("--seed", st.seed, "random seed")->capture_default_str();
        chk->add_flag("--timing", timing, "add a runtime column");
        chk->add_flag("--series", series, "print the plot series instead of the summary");

        std::string only;
        auto* self = app.add_subcommand("selftest", "run the acceptance suite");
        self->add_option("--only", only, "comma-separated criterion numbers");

        try {
            std::vector<std::string> args;
            for (int i = argc; i-- > 1;) args.emplace_back(argv[i]);
            app.parse(args);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? 0 : 1;
        }

        const ReportFormat fmt = parse_format(st.format);
        OracleOptions oopts{st.tol, st.max_iter};
        auto print = [&](const ResultTable& t) { out << emit_report(t, fmt); };

        if (*cap) {
            const auto tree = tree_from_spec(tree_spec, st.p);
            const auto E = set_from_spec(tree, set_spec);
            ResultTable t;
            t.columns = {"tree", "set", "p", "capacity"};
            std::vector<ReportValue> row{tree_spec, set_spec, st.p, capacity(tree, E, st.p)};
            const bool all = oracle == "all";
            if (oracle != "none" && oracle != "all" && oracle != "primal" && oracle != "dual" && oracle != "quadratic") {
                throw InputError("unknown oracle '" + oracle + "'");
            }
            if (all || oracle == "primal") {
                t.columns.push_back("primal_oracle");
                row.emplace_back(capacity_primal_oracle(tree, E, st.p, oopts).value);
            }
            if (all || oracle == "dual") {
                t.columns.push_back("dual_oracle");
                row.emplace_back(capacity_dual_oracle(tree, E, st.p, oopts).value);
            }
            if (all || oracle == "quadratic") {
                t.columns.push_back("quadratic_oracle");
                row.emplace_back(st.p == 2.0 ? ReportValue(capacity_quadratic_oracle(tree, E))
                                             : ReportValue(std::string("p != 2")));
            }
            t.add(std::move(row));
            print(t);
            return 0;
        }
        if (*eq) {
            const auto tree = tree_from_spec(tree_spec, st.p);
            const auto E = set_from_spec(tree, set_spec);
            const auto res = equilibrium(tree, E, st.p);
            ResultTable summary;
            summary.columns = {"capacity", "max_constraint_error", "carleson_norm", "root_formula"};
            summary.add({res.capacity, res.max_constraint_error, res.carleson, res.root_formula});
            print(summary);
            if (fmt == ReportFormat::Table) out << '\n';
            const NodeFunction If = hardy_all(tree, res.phi);
            ResultTable nodes;
            nodes.columns = {"node", "depth", "weight", "phi", "I_phi", "measure"};
            for (std::uint32_t v = 0; v < tree.size(); ++v) {
                const NodeId id{v};
                if (res.phi[id] == 0.0 && res.mu.istar(id) == 0.0) continue;
                nodes.add({tree.label(id), static_cast<std::int64_t>(tree.depth(id)), tree.weight(id), res.phi[id], If[id],
                           res.mu.istar(id)});
            }
            print(nodes);
            return 0;
        }
        if (*est) {
            const auto [a, b] = depth_range(depths_spec);
            const auto space = make_space(space_spec, b);
            const auto tree = weight_pi_s(space, st.s, st.p);
            const auto sd = SetDescriptor::parse(set_desc, space.dim());
            ResultTable t;
            t.columns = {"depth", "cells", "capacity", "ratio_to_previous"};
            double prev = NAN;
            for (std::size_t n = a; n <= b; ++n) {
                const auto E = discretize_set(space, sd, n);
                const double c = capacity(tree, E, st.p);
                t.add({static_cast<std::int64_t>(n), static_cast<std::int64_t>(E.size()), c,
                       std::isnan(prev) ? ReportValue(std::string()) : ReportValue(c / prev)});
                prev = c;
            }
            print(t);
            return 0;
        }
        if (*ball) {
            const auto [a, b] = depth_range(depths_spec);
            // Deepest space within the node budget, a few levels below the smallest ball.
            std::optional<DyadicSpace> space;
            for (std::size_t d = b + 4; !space && d + 1 > b; --d) {
                try {
                    space = make_space(space_spec, d);
                } catch (const InputError&) {
                    if (d == b) throw;
                }
            }
            Point c;
            if (center.empty()) {
                c.assign(space->dim(), space->kind() == SpaceKind::Cantor ? 0.0 : 0.5);
            } else {
                for (const auto& x : split(center, ',')) c.push_back(Coordinate::parse(x).value);
            }
            space->require_point(c);
            const auto tree = weight_pi_s(*space, st.s, st.p);
            ResultTable t;
            t.columns = {"level", "r", "estimate", "tree_capacity", "ratio", "regime"};
            for (std::size_t k = a; k <= b; ++k) {
                const double r = std::pow(space->delta(), static_cast<double>(k));
                const auto e = ball_capacity_estimate(*space, r, st.s, st.p);
                const auto sd = SetDescriptor::parse(ball_descriptor(*space, c, r), space->dim());
                const double tc = capacity(tree, discretize_set(*space, sd, space->depth()), st.p);
                const std::string regime = e.log_case ? "log" : (e.positive_point_regime ? "positive-point" : "power");
                t.add({static_cast<std::int64_t>(k), r, e.value, tc, e.value / tc, regime});
            }
            print(t);
            return 0;
        }
        if (*chk) {
            std::mt19937_64 rng(st.seed);
            CheckReport r;
            auto need_tree = [&] {
                if (tree_spec.empty()) throw InputError("check '" + check_name + "' needs --tree");
                return tree_from_spec(tree_spec, st.p);
            };
            auto depth_list = [&] {
                if (depths_spec.empty()) throw InputError("check '" + check_name + "' needs --depths");
                const auto [a, b] = depth_range(depths_spec);
                std::vector<std::size_t> out_depths;
                for (std::size_t n = a; n <= b; ++n) out_depths.push_back(n);
                return out_depths;
            };
            if (check_name == "cmcap") {
                const auto tree = need_tree();
                r = check_cmcap(tree, set_from_spec(tree, set_spec), st.p, st.samples, st.seed);
            } else if (check_name == "monotonicity") {
                const auto tree = need_tree();
                const auto E = set_from_spec(tree, set_spec);
                const auto mu = tree_measure(tree, measure_spec.empty() ? "equilibrium" : measure_spec, E, st.p, rng);
                std::uniform_real_distribution<double> u(0.0, 1.0);
                NodeFunction lambda(tree.size());
                for (std::uint32_t v = 0; v < tree.size(); ++v) lambda[NodeId{v}] = u(rng);
                r = check_monotonicity(tree, mu, lambda, st.p);
                r.seed = st.seed;
            } else if (check_name == "trace") {
                const auto tree = need_tree();
                const auto E = set_from_spec(tree, set_spec);
                const auto mu = tree_measure(tree, measure_spec.empty() ? "equilibrium" : measure_spec, E, st.p, rng);
                std::vector<BoundarySet> family{E};
                for (std::size_t d = 1; d <= std::min<std::size_t>(2, tree.height()); ++d) {
                    for (NodeId v : tree.nodes_at_depth(d)) family.push_back(BoundarySet::from_antichain(tree, {v}));
                }
                for (int i = 0; i < 5; ++i) family.push_back(instances::random_antichain(rng, tree));
                r = check_trace_conditions(tree, mu, st.p, family, st.samples, st.seed);
            } else if (check_name == "shadow") {
                const auto tree = need_tree();
                r = check_shadow(tree, set_from_spec(tree, set_spec), st.p);
            } else if (check_name == "maximal") {
                r = check_maximal(need_tree(), st.p, st.samples, st.seed);
            } else if (check_name == "mww" || check_name == "energy") {
                const auto list = depth_list();
                if (check_name == "energy") {
                    const auto space = make_space(space_spec, list.back());
                    r = check_energy_equivalence(space, space_measure(space, measure_spec.empty() ? "lebesgue" : measure_spec),
                                                 st.s, st.p, list);
                } else {
                    const auto space = make_space(space_spec, std::max<std::size_t>(list.back(), st.depth));
                    const auto omega = space_measure(space, measure_spec.empty() ? "lebesgue" : measure_spec);
                    const double qq = q > 0.0 ? q : conjugate_exponent(st.p);
                    bool ok = true;
                    for (std::size_t n : list) {
                        const auto one = check_mww(space, omega, qq, n, st.s);
                        ok = ok && one.pass;
                        r.series.emplace_back(static_cast<double>(n), one.ratio);
                        r.left = one.left;
                        r.right = one.right;
                        r.ratio = one.ratio;
                        r.details = one.details;
                        r.note = one.note;
                        r.instance = one.instance;
                    }
                    const double slope = log_slope(r.series);
                    r.name = "mww";
                    r.empirical = r.ratio;
                    r.details.emplace_back("log_slope", slope);
                    r.pass = ok;
                }
            } else {
                throw InputError("unknown check '" + check_name + "'");
            }
            if (series) {
                print(series_table(r, check_name == "shadow" ? "level" : "depth",
                                   check_name == "shadow" ? "hypothesis_constant" : "ratio"));
            } else {
                print(reports_table({r}, timing));
            }
            return r.pass ? 0 : 2;
        }
        if (*self) {
            std::vector<int> ids;
            if (!only.empty()) {
                for (const auto& item : split(only, ',')) ids.push_back(number<int>(item, "criterion"));
            }
            const auto results = run_acceptance(ids, [&](const CriterionResult& res) {
                out << format_criterion(res) << '\n';
                out.flush();
            });
            return acceptance_exit_code(results);
        }
        return 1;
    } catch (const ConvergenceError& e) {
        err << "captree: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "captree: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace captree
