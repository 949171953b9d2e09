#pragma once

#include "cflow/graph.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

namespace cflow {

enum class SystemRole {
    DirichletReduced,   // interior-interior block, nonsingular
    GroundedLaplacian,  // full Laplacian, solved with u_1 = 0
};

struct LinearSystemSpec {
    SystemRole role = SystemRole::DirichletReduced;
    Eigen::MatrixXd matrix;
    Eigen::VectorXd rhs;
};

namespace detail {

// Direct factorization up to this size, conjugate gradient beyond.
inline constexpr int kDenseSolveLimit = 2000;

inline Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs) {
    Eigen::VectorXd x;
    if (A.rows() <= kDenseSolveLimit) {
        x = A.ldlt().solve(rhs);
    } else {
        Eigen::SparseMatrix<double> As = A.sparseView();
        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(1e-14);
        cg.setMaxIterations(20 * A.rows());
        cg.compute(As);
        x = cg.solve(rhs);
    }
    const double res = (A * x - rhs).norm();
    if (!(res <= 1e-10 * std::max(1.0, rhs.norm())))
        throw ConvergenceError("solve_linear: residual above tolerance");
    return x;
}

}  // namespace detail

/// Solve the spec'd system. The grounded variant requires a compatible
/// right-hand side (entries summing to zero) and returns the representative
/// with u_1 = 0.
inline VertexFunction solve_linear(const LinearSystemSpec& spec) {
    if (spec.matrix.rows() != spec.matrix.cols() || spec.matrix.rows() != spec.rhs.size())
        throw DataError("solve_linear: dimension mismatch");
    if (spec.role == SystemRole::DirichletReduced)
        return detail::solve_spd(spec.matrix, spec.rhs);

    const double sum = spec.rhs.sum();
    if (std::abs(sum) > 1e-12 * std::max(1.0, spec.rhs.lpNorm<1>()))
        throw DataError("solve_linear: grounded system needs rhs summing to zero");
    const int n = static_cast<int>(spec.matrix.rows());
    if (n == 1) return VertexFunction::Zero(1);
    Eigen::MatrixXd A = spec.matrix.bottomRightCorner(n - 1, n - 1);
    Eigen::VectorXd x = detail::solve_spd(A, spec.rhs.tail(n - 1));
    VertexFunction u = VertexFunction::Zero(n);
    u.tail(n - 1) = x;
    return u;
}

/// Weighted graph Laplacian L_ii = sum_j w_ij, L_ij = -w_ij.
inline Eigen::MatrixXd laplacian(const Graph& g, const Eigen::MatrixXd& weights) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(g.n(), g.n());
    for (auto [i, j] : g.edges()) {
        const double w = weights(i, j);
        L(i, i) += w;
        L(j, j) += w;
        L(i, j) -= w;
        L(j, i) -= w;
    }
    return L;
}

/// Unweighted Laplacian (all edge weights one).
inline Eigen::MatrixXd laplacian(const Graph& g) {
    return laplacian(g, Eigen::MatrixXd::Ones(g.n(), g.n()));
}

}  // namespace cflow
