#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cflow {

/// Invalid or inconsistent input data (bad graph, malformed measurement, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A solver failed to reach its target accuracy within budget.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using VertexFunction = Eigen::VectorXd;

/// Undirected simple connected graph with a designated boundary vertex set.
/// Vertices are 0-based internally; 1-based labels appear only in file I/O.
class Graph {
public:
    Graph(int n, std::vector<std::pair<int, int>> edges, std::vector<int> boundary)
        : n_(n), boundary_(std::move(boundary)) {
        if (n < 1) throw DataError("graph: vertex count must be positive");
        adj_ = Eigen::MatrixXi::Zero(n, n);
        for (auto [i, j] : edges) {
            if (i < 0 || j < 0 || i >= n || j >= n)
                throw DataError("graph: edge endpoint out of range");
            if (i == j) throw DataError("graph: self-loop on vertex " + std::to_string(i + 1));
            if (adj_(i, j)) throw DataError("graph: duplicate edge");
            adj_(i, j) = adj_(j, i) = 1;
            edges_.emplace_back(std::min(i, j), std::max(i, j));
        }
        std::sort(edges_.begin(), edges_.end());
        if (!connected()) throw DataError("graph: not connected");

        std::vector<char> on_boundary(n, 0);
        for (int v : boundary_) {
            if (v < 0 || v >= n) throw DataError("graph: boundary vertex out of range");
            if (on_boundary[v]) throw DataError("graph: repeated boundary vertex");
            on_boundary[v] = 1;
        }
        for (int v = 0; v < n; ++v)
            if (!on_boundary[v]) interior_.push_back(v);
    }

    int n() const { return n_; }
    bool has_edge(int i, int j) const { return adj_(i, j) != 0; }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& boundary() const { return boundary_; }
    const std::vector<int>& interior() const { return interior_; }
    bool is_boundary(int v) const {
        return std::find(boundary_.begin(), boundary_.end(), v) != boundary_.end();
    }

    /// 0/1 adjacency matrix view.
    const Eigen::MatrixXi& adjacency() const { return adj_; }

private:
    bool connected() const {
        std::vector<char> seen(n_, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        int count = 1;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (int w = 0; w < n_; ++w) {
                if (adj_(v, w) && !seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        return count == n_;
    }

    int n_;
    Eigen::MatrixXi adj_;
    std::vector<std::pair<int, int>> edges_;
    std::vector<int> boundary_;
    std::vector<int> interior_;
};

enum class EdgeKind { General, SymmetricNonneg, Antisymmetric };

/// A function on the edge set, stored as an n-by-n matrix with structural
/// zeros off the edge set and on the diagonal.
class EdgeFunction {
public:
    EdgeFunction() = default;

    EdgeFunction(const Graph& g, Eigen::MatrixXd values, EdgeKind kind = EdgeKind::General)
        : m_(std::move(values)), kind_(kind) {
        if (m_.rows() != g.n() || m_.cols() != g.n())
            throw DataError("edge function: dimension mismatch");
        for (int i = 0; i < g.n(); ++i)
            for (int j = 0; j < g.n(); ++j)
                if ((i == j || !g.has_edge(i, j)) && m_(i, j) != 0.0)
                    throw DataError("edge function: nonzero entry off the edge set");
        check_kind();
    }

    static EdgeFunction zero(const Graph& g, EdgeKind kind = EdgeKind::General) {
        EdgeFunction b;
        b.m_ = Eigen::MatrixXd::Zero(g.n(), g.n());
        b.kind_ = kind;
        return b;
    }

    const Eigen::MatrixXd& matrix() const { return m_; }
    Eigen::MatrixXd& matrix() { return m_; }
    EdgeKind kind() const { return kind_; }
    double operator()(int i, int j) const { return m_(i, j); }

    /// Set the value on edge {i,j}; antisymmetric and symmetric kinds keep
    /// both orientations in sync.
    void set(int i, int j, double v) {
        m_(i, j) = v;
        if (kind_ == EdgeKind::Antisymmetric)
            m_(j, i) = -v;
        else if (kind_ == EdgeKind::SymmetricNonneg)
            m_(j, i) = v;
    }

private:
    void check_kind() const {
        const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
        if (kind_ == EdgeKind::SymmetricNonneg) {
            if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
                throw DataError("edge function: expected symmetric matrix");
            if (m_.minCoeff() < 0.0)
                throw DataError("edge function: expected nonnegative entries");
        } else if (kind_ == EdgeKind::Antisymmetric) {
            if ((m_ + m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
                throw DataError("edge function: expected antisymmetric matrix");
        }
    }

    Eigen::MatrixXd m_;
    EdgeKind kind_ = EdgeKind::General;
};

/// Symmetric nonnegative edge magnitudes a = |J|.
using MeasurementMatrix = EdgeFunction;

/// Antisymmetric edge current, J_ij = current from i to j.
using Current = EdgeFunction;

inline MeasurementMatrix make_measurement(const Graph& g, const Eigen::MatrixXd& a) {
    return EdgeFunction(g, a, EdgeKind::SymmetricNonneg);
}

inline Current make_current(const Graph& g, const Eigen::MatrixXd& j) {
    return EdgeFunction(g, j, EdgeKind::Antisymmetric);
}

}  // namespace cflow
