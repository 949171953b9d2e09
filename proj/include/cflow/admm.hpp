#pragma once

#include "cflow/forward.hpp"
#include "cflow/operators.hpp"
#include "cflow/relabel.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <optional>

namespace cflow {

/// Penalty and stopping configuration shared by both inverse solvers.
struct AdmmConfig {
    double alpha = 1.0;
    double tol = 1e-6;
    int max_iter = 100000;
    std::optional<EdgeFunction> b0;
    std::optional<EdgeFunction> d0;
    bool relabel = true;  // try to remove perfect conductors before extraction

    void validate() const {
        if (!(alpha > 0.0)) throw DataError("admm: alpha must be positive");
        if (!(tol > 0.0)) throw DataError("admm: tol must be positive");
        if (max_iter < 1) throw DataError("admm: max_iter must be at least 1");
    }
};

struct SolveReport {
    int iterations = 0;
    std::vector<double> history;  // successive relative change in u
    double primal_energy = 0.0;
    double dual_value = 0.0;
    double duality_gap = 0.0;
    bool converged = false;
    double lambda = std::numeric_limits<double>::quiet_NaN();  // Neumann only
    bool degenerate = false;
};

struct InverseSolution {
    VertexFunction u;
    Current J;
    Conductivity sigma;
    SolveReport report;
};

/// Extend Dirichlet data by zero: u_f = f on the boundary, 0 inside.
inline VertexFunction lift_dirichlet(const Graph& g, const DirichletData& f) {
    if (f.f.size() != static_cast<Eigen::Index>(g.boundary().size()))
        throw DataError("lift_dirichlet: boundary data size mismatch");
    VertexFunction u = VertexFunction::Zero(g.n());
    for (size_t k = 0; k < g.boundary().size(); ++k) u(g.boundary()[k]) = f.f(k);
    return u;
}

/// Entrywise soft threshold of w at a/(2 alpha), shifted back by the lift
/// gradient.
inline EdgeFunction shrink_d(const Graph& g, const EdgeFunction& w, const MeasurementMatrix& a,
                             double alpha, const EdgeFunction& lift) {
    EdgeFunction d = EdgeFunction::zero(g, w.kind());
    for (auto [i, j] : g.edges()) {
        for (auto [p, q] : {std::pair{i, j}, std::pair{j, i}}) {
            const double wv = w(p, q);
            double s = 0.0;
            if (wv != 0.0)
                s = std::max(std::abs(wv) - a(p, q) / (2.0 * alpha), 0.0) * (wv > 0 ? 1.0 : -1.0);
            d.matrix()(p, q) = s - lift(p, q);
        }
    }
    return d;
}

namespace detail {

// Interior block of the unweighted Laplacian, factored once per solve.
struct DirichletOperator {
    explicit DirichletOperator(const Graph& g) : graph(&g) {
        const auto& interior = g.interior();
        Eigen::MatrixXd L = laplacian(g);
        const int m = static_cast<int>(interior.size());
        Eigen::MatrixXd Lii(m, m);
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < m; ++c) Lii(r, c) = L(interior[r], interior[c]);
        if (m > 0) ldlt.compute(Lii);
    }

    VertexFunction solve(const EdgeFunction& b, const EdgeFunction& d) const {
        const Graph& g = *graph;
        VertexFunction rhs_full = 0.5 * (divergence(g, b) - divergence(g, d));
        const auto& interior = g.interior();
        VertexFunction u = VertexFunction::Zero(g.n());
        if (interior.empty()) return u;
        Eigen::VectorXd rhs(interior.size());
        for (size_t r = 0; r < interior.size(); ++r) rhs(r) = rhs_full(interior[r]);
        Eigen::VectorXd x = ldlt.solve(rhs);
        for (size_t r = 0; r < interior.size(); ++r) u(interior[r]) = x(r);
        return u;
    }

    const Graph* graph;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
};

// Grounded unweighted Laplacian (vertex 1 deleted), factored once.
struct GroundedOperator {
    explicit GroundedOperator(const Graph& g) : graph(&g) {
        Eigen::MatrixXd L = laplacian(g);
        const int n = g.n();
        if (n > 1) ldlt.compute(L.bottomRightCorner(n - 1, n - 1));
    }

    VertexFunction solve(const VertexFunction& rhs) const {
        const int n = graph->n();
        VertexFunction u = VertexFunction::Zero(n);
        if (n > 1) u.tail(n - 1) = ldlt.solve(rhs.tail(n - 1));
        return u;
    }

    const Graph* graph;
    Eigen::LDLT<Eigen::MatrixXd> ldlt;
};

inline double boundary_sum(const Graph& g, const VertexFunction& u, const Eigen::VectorXd& gN) {
    double s = 0.0;
    for (size_t k = 0; k < g.boundary().size(); ++k) s += u(g.boundary()[k]) * gN(k);
    return s;
}

}  // namespace detail

/// One u-update of Algorithm 1: solve the unweighted interior Laplacian
/// system with right-hand side from the Bregman variables, u = 0 on the
/// boundary.
inline VertexFunction step_u_dirichlet(const Graph& g, const EdgeFunction& b,
                                       const EdgeFunction& d) {
    return detail::DirichletOperator(g).solve(b, d);
}

/// Algorithm 1: alternating split Bregman iteration for the Dirichlet
/// weighted l1 least-gradient problem.
inline InverseSolution solve_inverse_dirichlet(const Graph& g, const DirichletData& f,
                                               const MeasurementMatrix& a,
                                               const AdmmConfig& cfg = {}) {
    cfg.validate();
    if (g.boundary().empty()) throw DataError("inverse dirichlet: boundary is empty");
    if (a.kind() != EdgeKind::SymmetricNonneg)
        throw DataError("inverse dirichlet: measurement matrix must be symmetric nonnegative");

    const VertexFunction u_f = lift_dirichlet(g, f);
    const EdgeFunction lift = gradient(g, u_f);
    EdgeFunction b = cfg.b0.value_or(EdgeFunction::zero(g, EdgeKind::Antisymmetric));
    EdgeFunction d = cfg.d0.value_or(EdgeFunction::zero(g, EdgeKind::Antisymmetric));

    detail::DirichletOperator op(g);
    const double a_scale = std::max(1.0, a.matrix().norm());
    VertexFunction u_prev = VertexFunction::Zero(g.n());

    SolveReport report;
    VertexFunction u = u_prev;
    int quiet = 0;  // consecutive iterations below tolerance
    for (int k = 0; k < cfg.max_iter; ++k) {
        u = op.solve(b, d);
        EdgeFunction du = gradient(g, u);
        EdgeFunction w = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
        w.matrix() = du.matrix() + lift.matrix() + b.matrix();
        d = shrink_d(g, w, a, cfg.alpha, lift);
        b.matrix() += du.matrix() - d.matrix();

        const double change = (u - u_prev).norm() / std::max(1.0, u_prev.norm());
        const double constraint = (du.matrix() - d.matrix()).norm();
        report.history.push_back(change);
        ++report.iterations;
        u_prev = u;
        // Require two consecutive quiet iterations: a single below-tolerance
        // step can be a transient plateau while the dual variable still moves.
        quiet = (change < cfg.tol && constraint < cfg.tol * a_scale) ? quiet + 1 : 0;
        if (quiet >= 2) {
            report.converged = true;
            break;
        }
    }

    InverseSolution sol;
    sol.u = u + u_f;
    sol.J = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    sol.J.matrix() = 2.0 * cfg.alpha * b.matrix();
    report.primal_energy = energy(g, a, sol.u);
    report.dual_value = detail::boundary_sum(g, vertex_flux(g, sol.J), f.f);
    report.duality_gap = report.primal_energy - report.dual_value;

    VertexFunction u_final = sol.u;
    if (cfg.relabel) {
        Conductivity probe = conductivity_from_pair(g, sol.u, sol.J, 10.0 * cfg.tol);
        if (!probe.finite()) {
            auto better =
                attempt_monotone_relabel(g, sol.u, sol.J, a, g.boundary(), 10.0 * cfg.tol);
            if (better) u_final = *better;
        }
    }
    sol.sigma = conductivity_from_pair(g, u_final, sol.J, 10.0 * cfg.tol);
    sol.report = report;
    return sol;
}

/// Unit-flux lift data for the Neumann solver.
struct NeumannLift {
    VertexFunction v_g;  // satisfies sum_{boundary} v_g g = 1
    VertexFunction z;    // unweighted solution with boundary flux g, z_1 = 0
    double denom = 0.0;  // sum_{boundary} z_i g_i > 0
};

inline NeumannLift build_lift_neumann(const Graph& g, const NeumannData& gN) {
    check_neumann_data(g, gN);
    LinearSystemSpec spec;
    spec.role = SystemRole::GroundedLaplacian;
    spec.matrix = laplacian(g);
    spec.rhs = VertexFunction::Zero(g.n());
    for (size_t k = 0; k < g.boundary().size(); ++k) spec.rhs(g.boundary()[k]) = gN.g(k);

    NeumannLift lift;
    lift.z = solve_linear(spec);
    lift.denom = detail::boundary_sum(g, lift.z, gN.g);
    if (!(lift.denom > 0.0))
        throw DataError("neumann lift: nonpositive flux denominator");
    lift.v_g = VertexFunction::Zero(g.n());
    const double gg = gN.g.squaredNorm();
    for (size_t k = 0; k < g.boundary().size(); ++k) lift.v_g(g.boundary()[k]) = gN.g(k) / gg;
    return lift;
}

/// One u-update of Algorithm 2: grounded all-vertex solve followed by the
/// beta-correction back into the zero-flux constraint set.
inline VertexFunction step_u_neumann(const Graph& g, const EdgeFunction& b,
                                     const EdgeFunction& d, const NeumannLift& lift,
                                     const NeumannData& gN) {
    detail::GroundedOperator op(g);
    VertexFunction u = op.solve(0.5 * (divergence(g, b) - divergence(g, d)));
    const double beta = -detail::boundary_sum(g, u, gN.g) / lift.denom;
    return u + beta * lift.z;
}

/// Algorithm 2: alternating split Bregman iteration for the Neumann
/// weighted l1 least-gradient problem over the set sum_{boundary} u g = 1.
inline InverseSolution solve_inverse_neumann(const Graph& g, const NeumannData& gN,
                                             const MeasurementMatrix& a,
                                             const AdmmConfig& cfg = {}) {
    cfg.validate();
    if (a.kind() != EdgeKind::SymmetricNonneg)
        throw DataError("inverse neumann: measurement matrix must be symmetric nonnegative");
    const NeumannLift lift = build_lift_neumann(g, gN);
    const EdgeFunction dvg = gradient(g, lift.v_g);

    EdgeFunction b = cfg.b0.value_or(EdgeFunction::zero(g, EdgeKind::Antisymmetric));
    EdgeFunction d = cfg.d0.value_or(EdgeFunction::zero(g, EdgeKind::Antisymmetric));

    detail::GroundedOperator op(g);
    const double a_scale = std::max(1.0, a.matrix().norm());
    VertexFunction v_prev = VertexFunction::Zero(g.n());
    VertexFunction v = v_prev;

    SolveReport report;
    int quiet = 0;  // consecutive iterations below tolerance
    for (int k = 0; k < cfg.max_iter; ++k) {
        VertexFunction u = op.solve(0.5 * (divergence(g, b) - divergence(g, d)));
        const double beta = -detail::boundary_sum(g, u, gN.g) / lift.denom;
        v = u + beta * lift.z;

        EdgeFunction dv = gradient(g, v);
        EdgeFunction w = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
        w.matrix() = dv.matrix() + dvg.matrix() + b.matrix();
        d = shrink_d(g, w, a, cfg.alpha, dvg);
        b.matrix() += dv.matrix() - d.matrix();

        const double change = (v - v_prev).norm() / std::max(1.0, v_prev.norm());
        const double constraint = (dv.matrix() - d.matrix()).norm();
        report.history.push_back(change);
        ++report.iterations;
        v_prev = v;
        // Two consecutive quiet iterations, as in the Dirichlet solver:
        // a single quiet step can be a transient plateau.
        quiet = (change < cfg.tol && constraint < cfg.tol * a_scale) ? quiet + 1 : 0;
        if (quiet >= 2) {
            report.converged = true;
            break;
        }
    }

    InverseSolution sol;
    sol.u = v + lift.v_g;
    sol.J = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    sol.J.matrix() = 2.0 * cfg.alpha * b.matrix();
    report.primal_energy = energy(g, a, sol.u);
    report.lambda = report.primal_energy;
    report.dual_value = report.lambda;
    report.duality_gap = 0.0;

    // Cross-check lambda against the boundary-flux fit J_i ~ lambda g_i.
    const VertexFunction flux = vertex_flux(g, sol.J);
    const double lambda_fit = detail::boundary_sum(g, flux, gN.g) / gN.g.squaredNorm();
    report.duality_gap = report.lambda - lambda_fit;
    if (std::abs(report.duality_gap) > 10.0 * cfg.tol * std::max(1.0, report.lambda))
        report.converged = false;
    if (!(report.lambda > 10.0 * cfg.tol)) report.degenerate = true;

    VertexFunction u_final = sol.u;
    if (cfg.relabel && !report.degenerate) {
        Conductivity probe = conductivity_from_pair(g, sol.u, sol.J, 10.0 * cfg.tol);
        if (!probe.finite()) {
            auto better = attempt_monotone_relabel(g, sol.u, sol.J, a, {}, 10.0 * cfg.tol);
            if (better) {
                // Renormalize the relabeled potential back into M_g.
                const double s = detail::boundary_sum(g, *better, gN.g);
                if (s > 0.0) u_final = *better / s;
            }
        }
    }
    sol.sigma = conductivity_from_pair(g, u_final, sol.J, 10.0 * cfg.tol);
    sol.report = report;
    return sol;
}

/// Divide the recovered current (and conductivity) by lambda so the boundary
/// flux matches the injected g exactly.
inline InverseSolution rescale_to_unit_flux(const InverseSolution& sol) {
    const double lambda = sol.report.lambda;
    if (!(lambda > 0.0)) throw DataError("rescale: lambda must be positive");
    InverseSolution out = sol;
    out.J.matrix() /= lambda;
    out.sigma.base.matrix() /= lambda;
    return out;
}

}  // namespace cflow
