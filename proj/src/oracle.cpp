#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "captree/capacity.hpp"
#include "captree/errors.hpp"

namespace captree {

namespace {

// The convex program restricted to the nodes that lie above some constraint
// node. Local indices follow increasing NodeId, so parents come first.
struct Program {
    std::vector<NodeId> node;         // local -> tree id
    std::vector<std::int32_t> up;     // local parent, -1 at the root
    std::vector<double> weight;
    std::vector<std::int32_t> terms;  // local index of each constraint node
    std::vector<NodeId> term_nodes;
    std::vector<std::size_t> term_depth;
};

Program build_program(const WeightedTree& tree, std::span<const NodeId> constraints) {
    Program P;
    std::vector<char> keep(tree.size(), 0);
    for (NodeId k : constraints) {
        std::optional<NodeId> cur = k;
        while (cur && !keep[cur->value]) {
            keep[cur->value] = 1;
            cur = tree.parent(*cur);
        }
    }
    std::vector<std::int32_t> local(tree.size(), -1);
    for (std::uint32_t v = 0; v < tree.size(); ++v) {
        if (!keep[v]) continue;
        const NodeId id{v};
        local[v] = static_cast<std::int32_t>(P.node.size());
        P.node.push_back(id);
        auto par = tree.parent(id);
        P.up.push_back(par ? local[par->value] : -1);
        P.weight.push_back(tree.weight(id));
    }
    for (NodeId k : constraints) {
        P.terms.push_back(local[k.value]);
        P.term_nodes.push_back(k);
        P.term_depth.push_back(tree.depth(k));
    }
    return P;
}

std::vector<double> path_sums(const Program& P, const std::vector<double>& f) {
    std::vector<double> s(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) s[i] = f[i] + (P.up[i] >= 0 ? s[P.up[i]] : 0.0);
    return s;
}

// Subtree sums of values placed on the constraint nodes.
std::vector<double> subtree_of_terms(const Program& P, const std::vector<double>& at_terms) {
    std::vector<double> s(P.node.size(), 0.0);
    for (std::size_t k = 0; k < P.terms.size(); ++k) s[P.terms[k]] += at_terms[k];
    for (std::size_t i = s.size(); i-- > 1;) s[P.up[i]] += s[i];
    return s;
}

double primal_objective(const Program& P, const std::vector<double>& phi, double p) {
    double f = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (phi[i] > 0.0) f += P.weight[i] * std::pow(phi[i], p);
    }
    return f;
}

// Energy of a measure living on the constraint nodes.
double program_energy(const Program& P, const std::vector<double>& mass, double q) {
    const auto up = subtree_of_terms(P, mass);
    double e = 0.0;
    for (std::size_t i = 0; i < up.size(); ++i) {
        if (up[i] > 0.0) e += std::pow(up[i], q) * std::pow(P.weight[i], 1.0 - q);
    }
    return e;
}

// mass(E)^p / energy^(p-1): a lower bound on the capacity for any measure on E.
double dual_bound(const Program& P, const std::vector<double>& mass, double p) {
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    if (!(total > 0.0)) return 0.0;
    const double e = program_energy(P, mass, conjugate_exponent(p));
    if (!(e > 0.0)) return 0.0;
    return std::pow(total, p) / std::pow(e, p - 1.0);
}

TreeMeasure measure_on_terms(const WeightedTree& tree, const Program& P, const std::vector<double>& mass) {
    std::vector<std::pair<NodeId, double>> m;
    for (std::size_t k = 0; k < mass.size(); ++k) m.emplace_back(P.term_nodes[k], std::max(mass[k], 0.0));
    return measure_from_masses(tree, m);
}

double rel_gap(double lower, double upper) {
    if (std::isinf(upper)) return upper;
    if (!(upper > 0.0)) return 0.0;
    return (upper - lower) / upper;
}

OracleResult run_primal(const WeightedTree& tree, std::span<const NodeId> constraints, double p,
                        const OracleOptions& opts) {
    conjugate_exponent(p);
    if (!(opts.tol > 0.0)) throw InputError("oracle tolerance must be positive");
    OracleResult res;
    res.certificate = TreeMeasure::zero(tree);
    if (constraints.empty()) return res;

    const Program P = build_program(tree, constraints);
    const std::size_t n = P.node.size();
    const std::size_t K = P.terms.size();

    // Uniform feasible start: every constraint path has at least min_len nodes.
    std::size_t min_len = std::numeric_limits<std::size_t>::max();
    for (std::size_t d : P.term_depth) min_len = std::min(min_len, d + 1);
    std::vector<double> phi(n, 1.0 / static_cast<double>(min_len));

    std::vector<double> lambda(K, 0.0);
    double rho = 10.0;
    double best_lower = 0.0;
    double best_upper = std::numeric_limits<double>::infinity();
    std::vector<double> best_mass(K, 0.0);
    long iters = 0;

    auto penalty_residual = [&](const std::vector<double>& x, std::vector<double>& r) {
        const auto I = path_sums(P, x);
        for (std::size_t k = 0; k < K; ++k) r[k] = std::max(0.0, lambda[k] + rho * (1.0 - I[P.terms[k]]));
    };
    auto lagrangian = [&](const std::vector<double>& x, std::vector<double>& r) {
        penalty_residual(x, r);
        double L = primal_objective(P, x, p);
        for (std::size_t k = 0; k < K; ++k) L += (r[k] * r[k] - lambda[k] * lambda[k]) / (2.0 * rho);
        return L;
    };
    auto gradient = [&](const std::vector<double>& x, const std::vector<double>& r, std::vector<double>& g) {
        const auto pulled = subtree_of_terms(P, r);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = (x[i] > 0.0 ? p * P.weight[i] * std::pow(x[i], p - 1.0) : 0.0) - pulled[i];
        }
    };
    auto certify = [&](const std::vector<double>& x) {
        const auto I = path_sums(P, x);
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) lo = std::min(lo, I[P.terms[k]]);
        if (lo > 0.0) best_upper = std::min(best_upper, primal_objective(P, x, p) / std::pow(lo, p));
        // Two candidate measures: the multipliers, and the stationarity masses
        // weight*phi^(p-1) at the constraint nodes.
        std::vector<double> m2(K);
        for (std::size_t k = 0; k < K; ++k) {
            const double xk = x[P.terms[k]];
            m2[k] = xk > 0.0 ? P.weight[P.terms[k]] * std::pow(xk, p - 1.0) : 0.0;
        }
        for (const auto* m : {&lambda, &m2}) {
            const double b = dual_bound(P, *m, p);
            if (b > best_lower) {
                best_lower = b;
                best_mass = *m;
            }
        }
    };

    std::vector<double> r(K), g(n), x_new(n), r_new(K), g_new(n);
    double prev_violation = std::numeric_limits<double>::infinity();
    while (true) {
        // Inner projected gradient with Barzilai-Borwein steps and Armijo backtracking.
        double L = lagrangian(phi, r);
        gradient(phi, r, g);
        double step = 1.0 / (rho * static_cast<double>(K) + p);
        const double inner_tol = std::max(opts.tol * 1e-2, 1e-14);
        for (int inner = 0; inner < 5000; ++inner) {
            if (++iters > opts.max_iter) {
                throw ConvergenceError("primal capacity oracle did not converge", rel_gap(best_lower, best_upper),
                                       iters - 1);
            }
            double pg = 0.0;
            for (std::size_t i = 0; i < n; ++i) pg = std::max(pg, std::abs(phi[i] - std::max(0.0, phi[i] - g[i])));
            if (pg <= inner_tol) break;
            double t = step;
            double L_new = 0.0;
            for (int ls = 0; ls < 60; ++ls) {
                double descent = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    x_new[i] = std::max(0.0, phi[i] - t * g[i]);
                    descent += g[i] * (x_new[i] - phi[i]);
                }
                L_new = lagrangian(x_new, r_new);
                if (L_new <= L + 1e-4 * descent + 4e-16 * std::abs(L)) break;
                t *= 0.5;
            }
            gradient(x_new, r_new, g_new);
            double ss = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double s = x_new[i] - phi[i];
                ss += s * s;
                sy += s * (g_new[i] - g[i]);
            }
            step = (sy > 0.0) ? std::clamp(ss / sy, 1e-12, 1e12) : t * 2.0;
            const bool stalled = ss == 0.0;
            phi.swap(x_new);
            r.swap(r_new);
            g.swap(g_new);
            L = L_new;
            if (stalled) break;
        }

        // Multiplier update.
        const auto I = path_sums(P, phi);
        double violation = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            violation = std::max(violation, 1.0 - I[P.terms[k]]);
            lambda[k] = std::max(0.0, lambda[k] + rho * (1.0 - I[P.terms[k]]));
        }
        certify(phi);
        res.iterations = iters;
        if (rel_gap(best_lower, best_upper) <= opts.tol) break;
        if (violation > 0.25 * prev_violation) rho = std::min(rho * 4.0, 1e10);
        prev_violation = violation;
    }
    res.value = best_upper;
    res.upper = best_upper;
    res.lower = best_lower;
    res.certificate = measure_on_terms(tree, P, best_mass);
    return res;
}

// Euclidean projection onto the probability simplex.
void project_simplex(std::vector<double>& x) {
    std::vector<double> u(x);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    for (double& v : x) v = std::max(0.0, v - theta);
}

OracleResult run_dual(const WeightedTree& tree, std::span<const NodeId> constraints, double p,
                      const OracleOptions& opts) {
    const double q = conjugate_exponent(p);
    if (!(opts.tol > 0.0)) throw InputError("oracle tolerance must be positive");
    OracleResult res;
    res.certificate = TreeMeasure::zero(tree);
    if (constraints.empty()) return res;

    const Program P = build_program(tree, constraints);
    const std::size_t K = P.terms.size();
    std::vector<double> mu(K, 1.0 / static_cast<double>(K));

    auto grad = [&](const std::vector<double>& m, std::vector<double>& g) {
        const auto up = subtree_of_terms(P, m);
        std::vector<double> term(up.size(), 0.0);
        for (std::size_t i = 0; i < up.size(); ++i) {
            if (up[i] > 0.0) term[i] = std::pow(P.weight[i], 1.0 - q) * std::pow(up[i], q - 1.0);
        }
        const auto V = path_sums(P, term);
        for (std::size_t k = 0; k < K; ++k) g[k] = q * V[P.terms[k]];
    };

    std::vector<double> g(K), x_new(K), g_new(K);
    double E = program_energy(P, mu, q);
    grad(mu, g);
    double step = 1.0 / std::max(1e-300, *std::max_element(g.begin(), g.end()));
    long iters = 0;
    double lower = 0.0, upper = std::numeric_limits<double>::infinity();
    while (true) {
        // Frank-Wolfe gap bounds the energy suboptimality.
        double inner = 0.0, gmin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            inner += g[k] * mu[k];
            gmin = std::min(gmin, g[k]);
        }
        const double gap = std::max(0.0, inner - gmin);
        lower = 1.0 / std::pow(E, p - 1.0);
        upper = (E - gap > 0.0) ? 1.0 / std::pow(E - gap, p - 1.0) : std::numeric_limits<double>::infinity();
        res.iterations = iters;
        if (rel_gap(lower, upper) <= opts.tol) break;
        if (++iters > opts.max_iter) {
            throw ConvergenceError("dual capacity oracle did not converge", rel_gap(lower, upper), iters - 1);
        }
        double t = step, E_new = 0.0;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t k = 0; k < K; ++k) x_new[k] = mu[k] - t * g[k];
            project_simplex(x_new);
            double descent = 0.0;
            for (std::size_t k = 0; k < K; ++k) descent += g[k] * (x_new[k] - mu[k]);
            E_new = program_energy(P, x_new, q);
            if (E_new <= E + 1e-4 * descent + 4e-16 * E) break;
            t *= 0.5;
        }
        grad(x_new, g_new);
        double ss = 0.0, sy = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double s = x_new[k] - mu[k];
            ss += s * s;
            sy += s * (g_new[k] - g[k]);
        }
        step = (sy > 0.0) ? std::clamp(ss / sy, 1e-12, 1e12) : t * 2.0;
        mu.swap(x_new);
        g.swap(g_new);
        E = E_new;
    }
    res.value = lower;
    res.lower = lower;
    res.upper = upper;
    res.certificate = measure_on_terms(tree, P, mu);
    return res;
}

double run_quadratic(const WeightedTree& tree, std::span<const NodeId> constraints) {
    if (constraints.empty()) return 0.0;
    const auto d = d_pi_all(tree, 2.0);
    const auto K = static_cast<Eigen::Index>(constraints.size());
    Eigen::MatrixXd G(K, K);
    for (Eigen::Index i = 0; i < K; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            G(i, j) = G(j, i) = d[confluent(tree, constraints[i], constraints[j]).value];
        }
    }
    const Eigen::VectorXd x = G.ldlt().solve(Eigen::VectorXd::Ones(K));
    return x.sum();
}

std::vector<NodeId> checked_nodes(const WeightedTree& tree, std::span<const NodeId> nodes) {
    const BoundarySet A = BoundarySet::from_antichain(tree, std::vector<NodeId>(nodes.begin(), nodes.end()));
    return std::vector<NodeId>(A.nodes().begin(), A.nodes().end());
}

}  // namespace

OracleResult capacity_primal_oracle(const WeightedTree& tree, const BoundarySet& E, double p, OracleOptions opts) {
    return run_primal(tree, covered_leaves(tree, E), p, opts);
}

OracleResult capacity_primal_oracle_nodes(const WeightedTree& tree, std::span<const NodeId> nodes, double p,
                                          OracleOptions opts) {
    return run_primal(tree, checked_nodes(tree, nodes), p, opts);
}

OracleResult capacity_dual_oracle(const WeightedTree& tree, const BoundarySet& E, double p, OracleOptions opts) {
    return run_dual(tree, covered_leaves(tree, E), p, opts);
}

OracleResult capacity_dual_oracle_nodes(const WeightedTree& tree, std::span<const NodeId> nodes, double p,
                                        OracleOptions opts) {
    return run_dual(tree, checked_nodes(tree, nodes), p, opts);
}

double capacity_quadratic_oracle(const WeightedTree& tree, const BoundarySet& E) {
    return run_quadratic(tree, covered_leaves(tree, E));
}

double capacity_quadratic_oracle_nodes(const WeightedTree& tree, std::span<const NodeId> nodes) {
    return run_quadratic(tree, checked_nodes(tree, nodes));
}

}  // namespace captree
