#pragma once

#include "cflow/linear.hpp"
#include "cflow/operators.hpp"

#include <set>

namespace cflow {

/// Edge conductivities. Finite values live in `base`; edges formally set to
/// infinity (perfect conductors) are listed in `perfect` as (min,max) pairs.
struct Conductivity {
    MeasurementMatrix base;
    std::set<std::pair<int, int>> perfect;

    bool finite() const { return perfect.empty(); }
    bool is_perfect(int i, int j) const {
        return perfect.count({std::min(i, j), std::max(i, j)}) != 0;
    }
};

inline Conductivity make_conductivity(const Graph& g, const Eigen::MatrixXd& sigma) {
    return Conductivity{make_measurement(g, sigma), {}};
}

/// Imposed boundary voltages, ordered as Graph::boundary().
struct DirichletData {
    Eigen::VectorXd f;
};

/// Injected boundary currents, ordered as Graph::boundary(). Entries must
/// sum to zero and not all vanish.
struct NeumannData {
    Eigen::VectorXd g;
};

inline void check_neumann_data(const Graph& g, const NeumannData& gN) {
    if (gN.g.size() != static_cast<Eigen::Index>(g.boundary().size()))
        throw DataError("neumann data: size does not match boundary");
    if (gN.g.isZero(0.0)) throw DataError("neumann data: g must be nonzero");
    if (std::abs(gN.g.sum()) > 1e-12 * gN.g.lpNorm<1>())
        throw DataError("neumann data: injected currents must sum to zero");
}

namespace detail {

// Solvability needs every interior vertex linked to the boundary through
// positive-conductivity edges.
inline void check_sigma_connectivity(const Graph& g, const Eigen::MatrixXd& sigma) {
    std::vector<char> seen(g.n(), 0);
    std::vector<int> stack;
    for (int v : g.boundary()) {
        seen[v] = 1;
        stack.push_back(v);
    }
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w = 0; w < g.n(); ++w) {
            if (g.has_edge(v, w) && sigma(v, w) > 0.0 && !seen[w]) {
                seen[w] = 1;
                stack.push_back(w);
            }
        }
    }
    for (int v : g.interior())
        if (!seen[v])
            throw DataError("forward solve: interior vertex isolated from boundary "
                            "through positive conductivities");
}

}  // namespace detail

/// Solve the Dirichlet forward problem: Kirchhoff balance at every interior
/// vertex with v = f on the boundary.
inline VertexFunction solve_dirichlet_forward(const Graph& g, const Conductivity& sigma,
                                              const DirichletData& f) {
    if (!sigma.finite())
        throw DataError("forward solve: perfect conductors are not supported");
    if (f.f.size() != static_cast<Eigen::Index>(g.boundary().size()))
        throw DataError("forward solve: boundary data size mismatch");
    if (g.boundary().empty()) throw DataError("forward solve: boundary is empty");
    detail::check_sigma_connectivity(g, sigma.base.matrix());

    VertexFunction v = VertexFunction::Zero(g.n());
    for (size_t k = 0; k < g.boundary().size(); ++k) v(g.boundary()[k]) = f.f(k);
    const auto& interior = g.interior();
    if (interior.empty()) return v;

    Eigen::MatrixXd L = laplacian(g, sigma.base.matrix());
    const int m = static_cast<int>(interior.size());
    LinearSystemSpec spec;
    spec.role = SystemRole::DirichletReduced;
    spec.matrix.resize(m, m);
    spec.rhs.resize(m);
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) spec.matrix(r, c) = L(interior[r], interior[c]);
        double b = 0.0;
        for (int w : g.boundary()) b -= L(interior[r], w) * v(w);
        spec.rhs(r) = b;
    }
    VertexFunction vi = solve_linear(spec);
    for (int r = 0; r < m; ++r) v(interior[r]) = vi(r);
    return v;
}

/// Solve the Neumann forward problem, grounded so that v_1 = 0.
inline VertexFunction solve_neumann_forward(const Graph& g, const Conductivity& sigma,
                                            const NeumannData& gN) {
    if (!sigma.finite())
        throw DataError("forward solve: perfect conductors are not supported");
    check_neumann_data(g, gN);
    detail::check_sigma_connectivity(g, sigma.base.matrix());

    LinearSystemSpec spec;
    spec.role = SystemRole::GroundedLaplacian;
    spec.matrix = laplacian(g, sigma.base.matrix());
    spec.rhs = VertexFunction::Zero(g.n());
    for (size_t k = 0; k < g.boundary().size(); ++k) spec.rhs(g.boundary()[k]) = gN.g(k);
    return solve_linear(spec);
}

/// Ohm's law: J_ij = sigma_ij (v_i - v_j).
inline Current current_from_potential(const Graph& g, const Conductivity& sigma,
                                      const VertexFunction& v) {
    if (v.size() != g.n()) throw DataError("current: dimension mismatch");
    Current j = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    for (auto [i, k] : g.edges()) {
        if (sigma.is_perfect(i, k))
            throw DataError("current: perfect conductor carries undetermined current");
        j.set(i, k, sigma.base(i, k) * (v(i) - v(k)));
    }
    return j;
}

/// Recover a conductivity from a compatible (potential, current) pair:
/// sigma_ij = J_ij / (v_i - v_j), with infinite flags where the potential is
/// flat but the current is not.
inline Conductivity conductivity_from_pair(const Graph& g, const VertexFunction& v,
                                           const Current& j, double tol_rel = 1e-9) {
    if (v.size() != g.n() || j.matrix().rows() != g.n())
        throw DataError("conductivity_from_pair: dimension mismatch");
    const double tol_v = tol_rel * std::max(1.0, v.cwiseAbs().maxCoeff());
    const double tol_j = tol_rel * std::max(1.0, j.matrix().cwiseAbs().maxCoeff());
    const double tol_sign = tol_rel * std::max(1.0, v.cwiseAbs().maxCoeff()) *
                            std::max(1.0, j.matrix().cwiseAbs().maxCoeff());

    Conductivity sigma;
    sigma.base = EdgeFunction::zero(g, EdgeKind::SymmetricNonneg);
    for (auto [i, k] : g.edges()) {
        const double dv = v(i) - v(k);
        const double jik = j(i, k);
        if (jik * dv < -tol_sign)
            throw DataError("conductivity_from_pair: current opposes potential drop");
        if (std::abs(dv) > tol_v) {
            sigma.base.set(i, k, std::max(0.0, jik / dv));
        } else if (std::abs(jik) > tol_j) {
            sigma.perfect.insert({i, k});
        }
        // both flat: sigma stays zero
    }
    return sigma;
}

}  // namespace cflow
