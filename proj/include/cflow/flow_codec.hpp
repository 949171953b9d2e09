#pragma once

#include "cflow/admm.hpp"
#include "cflow/rng.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <numeric>

namespace cflow {

/// Antisymmetric {-1,0,1} flow matrix of odd dimension 2n+1 with even-weight
/// rows, mass conservation off the key set, and key-row sums f.
struct AdmissibleFlow {
    Eigen::MatrixXi A;
    std::vector<int> keys;  // I_n, 0-based, sorted, |keys| = n
    Eigen::VectorXi f;      // row sums at the key vertices
};

/// The transmitted pair (|A|, f).
struct Ciphertext {
    Eigen::MatrixXi magnitude;
    Eigen::VectorXi f;  // aligned with the (sorted) key set
};

/// Verify the four admissibility properties and extract f. All violations
/// are reported together.
inline AdmissibleFlow validate_admissible(const Eigen::MatrixXi& A, std::vector<int> keys) {
    const int dim = static_cast<int>(A.rows());
    std::string errs;
    if (A.cols() != dim || dim < 3 || dim % 2 == 0)
        throw DataError("admissible flow: dimension must be odd and at least 3");
    const int n = (dim - 1) / 2;
    std::sort(keys.begin(), keys.end());
    if (static_cast<int>(keys.size()) != n ||
        std::adjacent_find(keys.begin(), keys.end()) != keys.end() || keys.front() < 0 ||
        keys.back() >= dim)
        throw DataError("admissible flow: key set must be n distinct vertices");

    std::vector<char> is_key(dim, 0);
    for (int k : keys) is_key[k] = 1;
    for (int i = 0; i < dim; ++i) {
        int nonzero = 0, row_sum = 0;
        for (int j = 0; j < dim; ++j) {
            const int v = A(i, j);
            if (i == j && v != 0) errs += "nonzero diagonal entry; ";
            if (v < -1 || v > 1) errs += "entry outside {-1,0,1}; ";
            if (A(j, i) != -v) errs += "not antisymmetric; ";
            if (v != 0) ++nonzero;
            row_sum += v;
        }
        if (nonzero % 2 != 0)
            errs += "row " + std::to_string(i + 1) + " has odd nonzero count; ";
        if (!is_key[i] && row_sum != 0)
            errs += "non-key row " + std::to_string(i + 1) + " has nonzero sum; ";
        if (errs.size() > 400) break;
    }
    if (!errs.empty()) throw DataError("admissible flow: " + errs);

    AdmissibleFlow flow;
    flow.A = A;
    flow.keys = keys;
    flow.f.resize(n);
    for (int k = 0; k < n; ++k) flow.f(k) = A.row(keys[k]).sum();
    return flow;
}

namespace detail {

// Directed support must be acyclic: cyclic flows superpose circulations
// whose orientation is invisible in (|A|, f), so they are not decodable.
inline bool flow_is_acyclic(const Eigen::MatrixXi& A) {
    const int dim = static_cast<int>(A.rows());
    std::vector<int> indeg(dim, 0);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            if (A(i, j) > 0) ++indeg[j];
    std::vector<int> queue;
    for (int v = 0; v < dim; ++v)
        if (indeg[v] == 0) queue.push_back(v);
    int done = 0;
    while (!queue.empty()) {
        int v = queue.back();
        queue.pop_back();
        ++done;
        for (int w = 0; w < dim; ++w)
            if (A(v, w) > 0 && --indeg[w] == 0) queue.push_back(w);
    }
    return done == dim;
}

}  // namespace detail

/// Random admissible flow: superpose pairs of edge-disjoint unit paths
/// between key vertices and reject candidates that leave {-1,0,1}, violate
/// a property, or are not acyclic.
inline AdmissibleFlow sample_admissible(int n, std::uint64_t seed, int budget = 2000) {
    if (n < 1) throw DataError("sample_admissible: n must be at least 1");
    const int dim = 2 * n + 1;
    Rng rng(seed, 0x71c0deULL);

    for (int attempt = 0; attempt < budget; ++attempt) {
        std::vector<int> all(dim);
        std::iota(all.begin(), all.end(), 0);
        for (int i = dim - 1; i > 0; --i)
            std::swap(all[i], all[rng.uniform_int(i + 1)]);
        std::vector<int> keys(all.begin(), all.begin() + n);
        std::sort(keys.begin(), keys.end());

        Eigen::MatrixXi A = Eigen::MatrixXi::Zero(dim, dim);
        const int pairs = n >= 2 ? 1 + static_cast<int>(rng.uniform_int(n)) : 0;
        bool ok = true;
        for (int p = 0; p < pairs && ok; ++p) {
            const int s = keys[rng.uniform_int(n)];
            int t = keys[rng.uniform_int(n)];
            if (n >= 2)
                while (t == s) t = keys[rng.uniform_int(n)];
            if (t == s) {
                ok = false;
                break;
            }
            // two edge-disjoint simple paths s -> t
            for (int leg = 0; leg < 2 && ok; ++leg) {
                std::vector<int> mids;
                for (int v = 0; v < dim; ++v)
                    if (v != s && v != t && rng.uniform() < 0.35) mids.push_back(v);
                for (size_t i = mids.size(); i > 1; --i)
                    std::swap(mids[i - 1], mids[rng.uniform_int(i)]);
                std::vector<int> path{s};
                path.insert(path.end(), mids.begin(), mids.end());
                path.push_back(t);
                for (size_t i = 0; i + 1 < path.size(); ++i) {
                    int u = path[i], v = path[i + 1];
                    A(u, v) += 1;
                    A(v, u) -= 1;
                    if (std::abs(A(u, v)) > 1) ok = false;
                }
            }
        }
        if (!ok || !detail::flow_is_acyclic(A)) continue;
        try {
            return validate_admissible(A, keys);
        } catch (const DataError&) {
            continue;
        }
    }
    throw ConvergenceError("sample_admissible: sampling budget exhausted");
}

/// Encode as the transmitted pair (|A|, f). Flows whose support carries a
/// component with zero boundary flux are ambiguous and rejected.
inline Ciphertext encode(const AdmissibleFlow& flow) {
    const int dim = static_cast<int>(flow.A.rows());
    // component check on the support
    std::vector<int> comp(dim, -1);
    int ncomp = 0;
    for (int v = 0; v < dim; ++v) {
        if (comp[v] >= 0) continue;
        std::vector<int> stack{v};
        comp[v] = ncomp;
        while (!stack.empty()) {
            int x = stack.back();
            stack.pop_back();
            for (int w = 0; w < dim; ++w)
                if (flow.A(x, w) != 0 && comp[w] < 0) {
                    comp[w] = ncomp;
                    stack.push_back(w);
                }
        }
        ++ncomp;
    }
    std::vector<char> has_edges(ncomp, 0), has_flux(ncomp, 0);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            if (flow.A(i, j) != 0) has_edges[comp[i]] = 1;
    for (size_t k = 0; k < flow.keys.size(); ++k)
        if (flow.f(k) != 0) has_flux[comp[flow.keys[k]]] = 1;
    for (int c = 0; c < ncomp; ++c)
        if (has_edges[c] && !has_flux[c])
            throw DataError("encode: support component with zero boundary flux "
                            "(pure circulation, not decodable)");

    Ciphertext c;
    c.magnitude = flow.A.cwiseAbs();
    c.f = flow.f;
    return c;
}

/// Recover the signed flow from (|A|, f, I_n) by solving the Neumann inverse
/// problem on each support component and rounding to {-1,0,1}.
inline AdmissibleFlow decode(const Ciphertext& c, std::vector<int> keys,
                             const AdmmConfig& cfg_in = {}) {
    const int dim = static_cast<int>(c.magnitude.rows());
    std::sort(keys.begin(), keys.end());
    if (c.magnitude.cols() != dim || dim % 2 == 0 || dim < 3)
        throw DataError("decode: magnitude matrix must be square of odd dimension");
    if (static_cast<int>(keys.size()) != (dim - 1) / 2)
        throw DataError("decode: key set must have n elements");
    if ((c.magnitude - c.magnitude.transpose()).cwiseAbs().sum() != 0 ||
        c.magnitude.minCoeff() < 0 || c.magnitude.maxCoeff() > 1 ||
        c.magnitude.diagonal().cwiseAbs().sum() != 0)
        throw DataError("decode: magnitude matrix must be symmetric 0/1 with zero diagonal");

    AdmmConfig cfg = cfg_in;
    cfg.tol = std::min(cfg.tol, 1e-6);

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<int> key_of(dim, -1);
    for (size_t k = 0; k < keys.size(); ++k) key_of[keys[k]] = static_cast<int>(k);

    // connected components of the support
    std::vector<int> comp(dim, -1);
    int ncomp = 0;
    for (int v = 0; v < dim; ++v) {
        if (comp[v] >= 0) continue;
        std::vector<int> stack{v};
        comp[v] = ncomp;
        while (!stack.empty()) {
            int x = stack.back();
            stack.pop_back();
            for (int w = 0; w < dim; ++w)
                if (c.magnitude(x, w) != 0 && comp[w] < 0) {
                    comp[w] = ncomp;
                    stack.push_back(w);
                }
        }
        ++ncomp;
    }

    for (int cc = 0; cc < ncomp; ++cc) {
        std::vector<int> verts;
        for (int v = 0; v < dim; ++v)
            if (comp[v] == cc) verts.push_back(v);
        std::vector<std::pair<int, int>> edges;
        std::vector<int> local(dim, -1);
        for (size_t i = 0; i < verts.size(); ++i) local[verts[i]] = static_cast<int>(i);
        for (int v : verts)
            for (int w : verts)
                if (v < w && c.magnitude(v, w) != 0) edges.emplace_back(local[v], local[w]);
        if (edges.empty()) continue;

        std::vector<int> bverts;
        Eigen::VectorXd gvec;
        double flux_abs = 0.0;
        {
            std::vector<double> gs;
            for (int v : verts)
                if (key_of[v] >= 0) {
                    bverts.push_back(local[v]);
                    gs.push_back(static_cast<double>(c.f(key_of[v])));
                    flux_abs += std::abs(gs.back());
                }
            gvec = Eigen::Map<Eigen::VectorXd>(gs.data(), gs.size());
        }
        if (bverts.empty() || flux_abs == 0.0)
            throw DataError("decode: support component without boundary flux is ambiguous");
        if (std::abs(gvec.sum()) > 1e-12 * flux_abs)
            throw DataError("decode: key-row sums do not conserve mass");

        const double scale = flux_abs / 2.0;
        Graph gc(static_cast<int>(verts.size()), edges, bverts);
        MeasurementMatrix a = EdgeFunction::zero(gc, EdgeKind::SymmetricNonneg);
        for (auto [i, j] : edges) a.set(i, j, 1.0);

        auto sol = solve_inverse_neumann(gc, NeumannData{gvec / scale}, a, cfg);
        if (!sol.report.converged)
            throw ConvergenceError("decode: inverse solve did not converge");
        const double lambda = sol.report.lambda;
        if (!(lambda > 0.0)) throw DataError("decode: degenerate component");

        for (auto [i, j] : edges) {
            const double raw = sol.J(i, j) * scale / lambda;
            const double rounded = std::round(std::clamp(raw, -1.0, 1.0));
            if (std::abs(raw - rounded) > 0.25)
                throw ConvergenceError("decode: rounding residual above 0.25, "
                                       "inconsistent ciphertext or non-convergence");
            A(verts[i], verts[j]) = rounded;
            A(verts[j], verts[i]) = -rounded;
        }
    }

    AdmissibleFlow flow = validate_admissible(A.cast<int>(), keys);
    for (size_t k = 0; k < keys.size(); ++k)
        if (flow.f(k) != c.f(k)) throw DataError("decode: recovered flux mismatch");
    if ((flow.A.cwiseAbs() - c.magnitude).cwiseAbs().sum() != 0)
        throw DataError("decode: recovered magnitude mismatch");
    return flow;
}

struct KeyspaceSize {
    boost::multiprecision::cpp_int exact;  // n! * C(2n+1, n)
    double estimate = 0.0;                 // 2^(2n+1)/sqrt(pi n) * n!
    double relative_deviation = 0.0;
};

inline KeyspaceSize keyspace_size(int n) {
    if (n < 1) throw DataError("keyspace_size: n must be at least 1");
    using boost::multiprecision::cpp_int;
    cpp_int binom = 1;
    for (int k = 1; k <= n; ++k) binom = binom * (n + 1 + k) / k;  // C(2n+1, n)
    cpp_int fact = 1;
    for (int k = 2; k <= n; ++k) fact *= k;

    KeyspaceSize out;
    out.exact = fact * binom;
    out.estimate = std::exp((2.0 * n + 1.0) * std::log(2.0) + std::lgamma(n + 1.0) -
                            0.5 * std::log(M_PI * n));
    const double exact_d = static_cast<double>(out.exact);
    out.relative_deviation = (out.estimate - exact_d) / exact_d;
    return out;
}

}  // namespace cflow
