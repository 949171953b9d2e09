#pragma once

#include "cflow/admm.hpp"
#include "cflow/rng.hpp"

namespace cflow {

/// Row-stochastic transition matrix over the graph, with a designated
/// absorbing (exit) vertex set.
struct TransitionMatrix {
    Eigen::MatrixXd P;
    std::vector<int> absorbing;
};

/// Expected net passage counts W_ij, antisymmetric.
struct NetPassage {
    Current W;
};

/// P_ij = sigma_ij / sum_j sigma_ij. Scale-invariant in sigma.
inline TransitionMatrix transitions_from_conductivity(const Graph& g, const Conductivity& sigma) {
    if (!sigma.finite())
        throw DataError("transitions: perfect conductors have no transition matrix");
    TransitionMatrix t;
    t.P = Eigen::MatrixXd::Zero(g.n(), g.n());
    for (int i = 0; i < g.n(); ++i) {
        double row = 0.0;
        for (int j = 0; j < g.n(); ++j)
            if (g.has_edge(i, j)) row += sigma.base(i, j);
        if (!(row > 0.0))
            throw DataError("transitions: vertex with zero total conductivity");
        for (int j = 0; j < g.n(); ++j)
            if (g.has_edge(i, j)) t.P(i, j) = sigma.base(i, j) / row;
    }
    return t;
}

struct WalkDesign {
    TransitionMatrix P;
    Conductivity sigma;
    InverseSolution solution;
    double lambda = 0.0;  // recovered scale (relative-data mode)
};

/// Design transition probabilities realizing prescribed net passage counts:
/// solve the Neumann inverse problem with a = |W| and entry/exit flux data,
/// extract a finite conductivity, and row-normalize.
///
/// `entry` holds (vertex, probability) over Gamma_a with probabilities
/// summing to one; `exit` holds (vertex, probability) over Gamma_b. With
/// `relative_data` the overall scale of W is treated as unknown and reported
/// through `lambda` instead of being matched.
inline WalkDesign design_transitions(const Graph& g, const NetPassage& W,
                                     const std::vector<std::pair<int, double>>& entry,
                                     const std::vector<std::pair<int, double>>& exit,
                                     const AdmmConfig& cfg = {}, bool relative_data = false) {
    std::vector<int> boundary;
    Eigen::VectorXd gvec(entry.size() + exit.size());
    double sum_in = 0.0, sum_out = 0.0;
    int k = 0;
    for (auto [v, p] : entry) {
        boundary.push_back(v);
        gvec(k++) = p;
        sum_in += p;
    }
    for (auto [v, p] : exit) {
        for (auto [w, q] : entry)
            if (w == v) throw DataError("design: entry and exit sets overlap");
        boundary.push_back(v);
        gvec(k++) = -p;
        sum_out += p;
    }
    if (std::abs(sum_in - 1.0) > 1e-12 || std::abs(sum_out - 1.0) > 1e-12)
        throw DataError("design: entry/exit probabilities must each sum to one");

    Graph gb(g.n(), g.edges(), boundary);
    MeasurementMatrix a = EdgeFunction::zero(gb, EdgeKind::SymmetricNonneg);
    a.matrix() = W.W.matrix().cwiseAbs();

    auto sol = solve_inverse_neumann(gb, NeumannData{gvec}, a, cfg);
    if (sol.report.degenerate)
        throw DataError("design: degenerate data (zero prescribed flow)");
    if (!sol.report.converged)
        throw ConvergenceError("design: inverse solve did not converge");

    WalkDesign out;
    out.lambda = sol.report.lambda;
    out.solution = relative_data ? sol : rescale_to_unit_flux(sol);
    out.sigma = out.solution.sigma;
    if (!out.sigma.finite())
        throw DataError("design: no transition matrix exists for this W "
                        "(perfect conductor survives relabeling)");
    out.P = transitions_from_conductivity(gb, out.sigma);
    out.P.absorbing.assign(exit.size(), 0);
    for (size_t i = 0; i < exit.size(); ++i) out.P.absorbing[i] = exit[i].first;

    if (!relative_data) {
        // The designed conductivity must reproduce W under a forward solve.
        VertexFunction v = solve_neumann_forward(gb, out.sigma, NeumannData{gvec});
        Current j = current_from_potential(gb, out.sigma, v);
        const double rel = (j.matrix() - W.W.matrix()).norm() /
                           std::max(1e-300, W.W.matrix().norm());
        if (rel > 1e-6)
            throw ConvergenceError("design: forward verification residual too large");
    }
    return out;
}

struct PassageEstimate {
    NetPassage mean;
    Eigen::MatrixXd standard_error;
    long walkers = 0;
    std::uint64_t seed = 0;
};

/// Seeded Monte-Carlo estimate of the expected net passage counts. Walkers
/// enter by the given distribution and walk by P until absorbed at the exit
/// set; a walker returning to an entry vertex keeps walking.
inline PassageEstimate simulate_net_passages(const Graph& g, const TransitionMatrix& t,
                                             const std::vector<std::pair<int, double>>& entry,
                                             const std::vector<int>& exit_set, long walkers,
                                             std::uint64_t seed) {
    const int n = g.n();
    std::vector<char> absorbing(n, 0);
    for (int v : exit_set) absorbing[v] = 1;

    // Exit must be reachable from every entry vertex through positive P.
    {
        std::vector<char> reach_exit(n, 0);
        std::vector<int> stack = exit_set;
        for (int v : exit_set) reach_exit[v] = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w = 0; w < n; ++w)
                if (!reach_exit[w] && t.P(w, v) > 0.0) {
                    reach_exit[w] = 1;
                    stack.push_back(w);
                }
        }
        for (auto [v, p] : entry)
            if (p > 0.0 && !reach_exit[v])
                throw DataError("simulate: exit unreachable from entry vertex");
    }

    double entry_total = 0.0;
    for (auto [v, p] : entry) entry_total += p;
    if (std::abs(entry_total - 1.0) > 1e-12)
        throw DataError("simulate: entry probabilities must sum to one");

    constexpr long kStepCap = 10'000'000;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::pair<int, int>> touched;
    Eigen::MatrixXd walk = Eigen::MatrixXd::Zero(n, n);

    Rng root(seed);
    for (long wlk = 0; wlk < walkers; ++wlk) {
        Rng rng = root.child(static_cast<std::uint64_t>(wlk));
        double r = rng.uniform() * entry_total;
        int v = entry.back().first;
        for (auto [cand, p] : entry) {
            if (r < p) {
                v = cand;
                break;
            }
            r -= p;
        }
        touched.clear();
        long steps = 0;
        while (!absorbing[v]) {
            if (++steps > kStepCap)
                throw ConvergenceError("simulate: step cap exceeded, absorbing set unreachable");
            double x = rng.uniform();
            int next = v;
            for (int w = 0; w < n; ++w) {
                if (t.P(v, w) <= 0.0) continue;
                if (x < t.P(v, w)) {
                    next = w;
                    break;
                }
                x -= t.P(v, w);
            }
            const int lo = std::min(v, next), hi = std::max(v, next);
            if (walk(lo, hi) == 0.0 && walk(hi, lo) == 0.0) touched.emplace_back(lo, hi);
            walk(v, next) += 1.0;
            v = next;
        }
        for (auto [lo, hi] : touched) {
            const double net = walk(lo, hi) - walk(hi, lo);
            sum(lo, hi) += net;
            sumsq(lo, hi) += net * net;
            walk(lo, hi) = walk(hi, lo) = 0.0;
        }
    }

    PassageEstimate est;
    est.walkers = walkers;
    est.seed = seed;
    est.mean.W = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    est.standard_error = Eigen::MatrixXd::Zero(n, n);
    const double N = static_cast<double>(walkers);
    for (auto [i, j] : g.edges()) {
        const double m = sum(i, j) / N;
        est.mean.W.set(i, j, m);
        const double var = std::max(0.0, sumsq(i, j) / N - m * m);
        const double se = std::sqrt(var / N);
        est.standard_error(i, j) = se;
        est.standard_error(j, i) = se;
    }
    return est;
}

}  // namespace cflow
