#pragma once

#include "cflow/graph.hpp"

namespace cflow {

/// Discrete gradient, (Du)_ij = u_i - u_j on edges, zero elsewhere.
inline EdgeFunction gradient(const Graph& g, const VertexFunction& u) {
    if (u.size() != g.n()) throw DataError("gradient: dimension mismatch");
    EdgeFunction out = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    for (auto [i, j] : g.edges()) out.set(i, j, u(i) - u(j));
    return out;
}

/// Discrete divergence, (div b)_i = sum_j (b_ji - b_ij).
inline VertexFunction divergence(const Graph& g, const EdgeFunction& b) {
    if (b.matrix().rows() != g.n()) throw DataError("divergence: dimension mismatch");
    return (b.matrix().colwise().sum() - b.matrix().rowwise().sum().transpose()).transpose();
}

inline double inner_v(const VertexFunction& u, const VertexFunction& v) {
    if (u.size() != v.size()) throw DataError("inner_v: dimension mismatch");
    return u.dot(v);
}

inline double inner_e(const EdgeFunction& b, const EdgeFunction& d) {
    if (b.matrix().rows() != d.matrix().rows())
        throw DataError("inner_e: dimension mismatch");
    return (b.matrix().array() * d.matrix().array()).sum();
}

/// Weighted l1 energy I(u) = 1/2 sum_ij a_ij |u_i - u_j|.
inline double energy(const Graph& g, const MeasurementMatrix& a, const VertexFunction& u) {
    if (u.size() != g.n() || a.matrix().rows() != g.n())
        throw DataError("energy: dimension mismatch");
    double sum = 0.0;
    for (auto [i, j] : g.edges()) sum += a(i, j) * std::abs(u(i) - u(j));
    return sum;  // both orientations of each edge, halved
}

/// Per-vertex flux J_i = sum_j J_ij. Zero flux marks an interior vertex.
inline VertexFunction vertex_flux(const Graph& g, const Current& j) {
    if (j.matrix().rows() != g.n()) throw DataError("vertex_flux: dimension mismatch");
    return j.matrix().rowwise().sum();
}

/// Flux-based interior/boundary classification threshold.
inline double flux_tolerance(const Current& j) {
    return 1e-9 * std::max(1.0, j.matrix().cwiseAbs().maxCoeff());
}

}  // namespace cflow
