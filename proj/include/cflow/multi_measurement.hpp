#pragma once

#include "cflow/admm.hpp"

#include <Eigen/QR>
#include <Eigen/SparseCore>

#include <optional>
#include <variant>

namespace cflow {

/// One measurement: a boundary set with either imposed voltages (Dirichlet)
/// or injected currents (Neumann), and the current magnitudes it produced.
struct Measurement {
    std::vector<int> boundary;
    std::optional<Eigen::VectorXd> dirichlet;
    std::optional<Eigen::VectorXd> neumann;
    MeasurementMatrix a;
};

struct MeasurementSet {
    std::vector<Measurement> items;

    void validate() const {
        if (items.size() < 2) throw DataError("measurement set: need at least two datasets");
        for (const auto& m : items) {
            if (m.dirichlet.has_value() == m.neumann.has_value())
                throw DataError("measurement set: each dataset is Dirichlet xor Neumann");
            if (m.a.kind() != EdgeKind::SymmetricNonneg)
                throw DataError("measurement set: magnitudes must be symmetric nonnegative");
        }
    }
};

/// Coupling term of the multi-measurement functional: squared mismatch of
/// the resistivity estimates |du|/a across the shared edge support. The
/// magnitude of the gradient is compared (current directions are not part of
/// the data, so two experiments may legitimately drive an edge both ways).
inline double coupling_phi(const Graph& g, const std::vector<VertexFunction>& us,
                           const std::vector<const MeasurementMatrix*>& as) {
    if (us.size() != as.size() || us.size() < 2)
        throw DataError("coupling_phi: need k >= 2 conforming datasets");
    const double tol = 0.0;  // exact support test, entries are structural
    double phi = 0.0;
    for (size_t l = 1; l < us.size(); ++l) {
        for (auto [i, j] : g.edges()) {
            const double a1 = (*as[0])(i, j);
            const double al = (*as[l])(i, j);
            if (a1 <= tol || al <= tol) continue;
            const double r1 = std::abs(us[0](i) - us[0](j)) / a1;
            const double rl = std::abs(us[l](i) - us[l](j)) / al;
            phi += (r1 - rl) * (r1 - rl);
        }
    }
    return phi;
}

/// Sum of per-dataset energies plus the coupling term. Every potential must
/// be admissible for its dataset.
inline double total_functional(const Graph& g, const std::vector<VertexFunction>& us,
                               const MeasurementSet& set) {
    set.validate();
    if (us.size() != set.items.size())
        throw DataError("total_functional: potential count mismatch");
    double total = 0.0;
    std::vector<const MeasurementMatrix*> as;
    for (size_t l = 0; l < us.size(); ++l) {
        const auto& m = set.items[l];
        if (m.dirichlet) {
            for (size_t k = 0; k < m.boundary.size(); ++k)
                if (std::abs(us[l](m.boundary[k]) - (*m.dirichlet)(k)) > 1e-9)
                    throw DataError("total_functional: potential violates Dirichlet data");
        } else {
            double s = 0.0;
            for (size_t k = 0; k < m.boundary.size(); ++k)
                s += us[l](m.boundary[k]) * (*m.neumann)(k);
            if (std::abs(s - 1.0) > 1e-9)
                throw DataError("total_functional: potential violates flux normalization");
        }
        total += energy(g, m.a, us[l]);
        as.push_back(&m.a);
    }
    return total + coupling_phi(g, us, as);
}

struct ConsistencyResult {
    bool consistent = false;
    std::optional<Conductivity> sigma;
    double phi = 0.0;
    std::vector<SolveReport> reports;
};

/// Solve every dataset independently and test whether a single conductivity
/// explains them all.
///
/// The recovered current of each dataset is unique, but its potential is
/// not: any potential whose gradient is sign-aligned with the current is a
/// minimizer, and each choice determines a different conductivity.
/// Evaluating the coupling term on arbitrary minimizers therefore reports a
/// spurious mismatch even for perfectly consistent data. Instead we pick,
/// from each dataset's minimizer set, the potentials closest to sharing one
/// resistivity: with J^l the recovered currents, a common conductivity
/// sigma = 1/rho explains all datasets exactly when Du^l = rho .* J^l for
/// some rho >= 0 and feasible u^l — a linear least-squares problem in
/// (u^1..u^k, rho). The coupling term is then evaluated at that solution:
/// zero (up to solver noise) when a shared conductivity exists, bounded away
/// from zero when none does.
inline ConsistencyResult consistency_check(const Graph& g, const MeasurementSet& set,
                                           const AdmmConfig& cfg = {}) {
    set.validate();
    const double tol_phi = std::max(1e-8, 100.0 * cfg.tol * cfg.tol);
    const size_t k = set.items.size();
    const int n = g.n();
    const auto& edges = g.edges();

    // Per-dataset solves; currents rescaled to the physical injection scale.
    std::vector<Current> currents;
    std::vector<Graph> graphs;
    ConsistencyResult result;
    for (const auto& m : set.items) {
        Graph gl(g.n(), g.edges(), m.boundary);
        InverseSolution sol =
            m.dirichlet ? solve_inverse_dirichlet(gl, DirichletData{*m.dirichlet}, m.a, cfg)
                        : solve_inverse_neumann(gl, NeumannData{*m.neumann}, m.a, cfg);
        if (!sol.report.converged)
            throw ConvergenceError("consistency_check: dataset solve did not converge");
        Current J = sol.J;
        if (!m.dirichlet) J.matrix() /= sol.report.lambda;
        currents.push_back(std::move(J));
        graphs.push_back(std::move(gl));
        result.reports.push_back(sol.report);
    }

    // Currents at relative level <= 1e-9 are numerical zeros, not data.
    double jmax = 0.0;
    for (const auto& J : currents) jmax = std::max(jmax, J.matrix().cwiseAbs().maxCoeff());
    const double tau = 1e-9 * jmax;

    // Variable layout: free potentials per dataset, then one rho per edge
    // that carries current in at least one dataset.
    std::vector<std::vector<int>> ucol(k, std::vector<int>(n, -1));
    int cols = 0;
    std::vector<VertexFunction> us(k, VertexFunction::Zero(n));
    for (size_t l = 0; l < k; ++l) {
        const auto& m = set.items[l];
        std::vector<char> fixed(n, 0);
        if (m.dirichlet) {
            for (size_t r = 0; r < m.boundary.size(); ++r) {
                fixed[m.boundary[r]] = 1;
                us[l](m.boundary[r]) = (*m.dirichlet)(r);
            }
        } else {
            fixed[m.boundary.front()] = 1;  // Neumann: gradients only, ground one vertex
        }
        for (int i = 0; i < n; ++i)
            if (!fixed[i]) ucol[l][i] = cols++;
    }
    std::vector<int> rhocol(edges.size(), -1);
    for (size_t e = 0; e < edges.size(); ++e) {
        auto [i, j] = edges[e];
        for (size_t l = 0; l < k; ++l)
            if (std::abs(currents[l](i, j)) > tau) {
                rhocol[e] = cols++;
                break;
            }
    }

    // Rows in resistivity units: (u^l_i - u^l_j)/J^l_ij - rho_e = 0 on edges
    // the dataset drives, and du^l = 0 on edges it leaves quiet while another
    // dataset drives them.
    double jquiet = jmax;
    for (const auto& J : currents)
        for (auto [i, j] : edges) {
            const double v = std::abs(J(i, j));
            if (v > tau) jquiet = std::min(jquiet, v);
        }
    std::vector<Eigen::Triplet<double>> trips;
    std::vector<double> rhsv;
    int rows = 0;
    auto add = [&](int col, double c) {
        if (col >= 0) trips.emplace_back(rows, col, c);
    };
    for (size_t l = 0; l < k; ++l) {
        for (size_t e = 0; e < edges.size(); ++e) {
            if (rhocol[e] < 0) continue;
            auto [i, j] = edges[e];
            const double Jij = currents[l](i, j);
            const double w = std::abs(Jij) > tau ? 1.0 / Jij : 1.0 / jquiet;
            double rhs = 0.0;
            if (ucol[l][i] >= 0) add(ucol[l][i], w); else rhs -= w * us[l](i);
            if (ucol[l][j] >= 0) add(ucol[l][j], -w); else rhs += w * us[l](j);
            if (std::abs(Jij) > tau) add(rhocol[e], -1.0);
            rhsv.push_back(rhs);
            ++rows;
        }
    }
    // A weak pull toward unit resistivity picks a finite representative when
    // the data leaves directions of the solution manifold free; it biases
    // determined values only at the square of its weight.
    const double eps = 1e-6;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows + cols, cols);
    for (const auto& t : trips) A(t.row(), t.col()) = t.value();
    for (int c = 0; c < cols; ++c) A(rows + c, c) = eps;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows + cols);
    for (int r = 0; r < rows; ++r) rhs(r) = rhsv[r];
    for (size_t e = 0; e < edges.size(); ++e)
        if (rhocol[e] >= 0) rhs(rows + rhocol[e]) = eps;
    Eigen::VectorXd x =
        cols > 0 ? Eigen::VectorXd(A.colPivHouseholderQr().solve(rhs)) : Eigen::VectorXd();

    for (size_t l = 0; l < k; ++l)
        for (int i = 0; i < n; ++i)
            if (ucol[l][i] >= 0) us[l](i) = x(ucol[l][i]);

    // Coupling term at the reconciled potentials, over the numerically
    // meaningful support of the measured magnitudes.
    std::vector<MeasurementMatrix> clean;
    std::vector<const MeasurementMatrix*> as;
    for (const auto& m : set.items) {
        MeasurementMatrix a = m.a;
        for (auto [i, j] : edges)
            if (a(i, j) <= tau) a.set(i, j, 0.0);
        clean.push_back(std::move(a));
    }
    for (const auto& a : clean) as.push_back(&a);
    result.phi = coupling_phi(g, us, as);

    // Shared resistivity must be nonnegative: an anti-aligned gradient means
    // no conductivity can drive the recovered current.
    const double tol_flat = 10.0 * cfg.tol;
    bool rho_ok = true;
    Conductivity merged;
    merged.base = EdgeFunction::zero(g, EdgeKind::SymmetricNonneg);
    for (size_t e = 0; e < edges.size(); ++e) {
        if (rhocol[e] < 0) continue;
        auto [i, j] = edges[e];
        const double rho = x(rhocol[e]);
        if (rho < -tol_flat) rho_ok = false;
        if (rho > tol_flat)
            merged.base.set(i, j, 1.0 / rho);
        else
            merged.perfect.insert({std::min(i, j), std::max(i, j)});
    }

    result.consistent = (result.phi <= tol_phi) && rho_ok;
    if (result.consistent) result.sigma = merged;
    return result;
}

}  // namespace cflow
