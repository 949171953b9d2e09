#pragma once

#include "cflow/forward.hpp"
#include "cflow/operators.hpp"

#include <numeric>
#include <optional>

namespace cflow {

namespace detail {

struct UnionFind {
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int v) {
        while (parent[v] != v) v = parent[v] = parent[parent[v]];
        return v;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
    std::vector<int> parent;
};

}  // namespace detail

/// Try to replace the potential u by another minimizer u' with u'_i != u'_j
/// on every edge carrying current, so that the extracted conductivity is
/// finite everywhere. Vertices in `pinned` keep their value (Dirichlet data);
/// pass an empty list for the Neumann case and renormalize afterwards.
///
/// Returns nullopt when no such minimizer exists (the edge set forces a
/// perfect conductor).
inline std::optional<VertexFunction> attempt_monotone_relabel(
    const Graph& g, const VertexFunction& u, const Current& j, const MeasurementMatrix& a,
    const std::vector<int>& pinned, double tol) {
    const int n = g.n();
    const double tol_j = tol * std::max(1.0, j.matrix().cwiseAbs().maxCoeff());

    // Vertices joined by an edge whose current magnitude falls short of a_ij
    // must stay at equal potential (separating them breaks |J| = a).
    detail::UnionFind uf(n);
    for (auto [p, q] : g.edges())
        if (a(p, q) > tol_j && std::abs(j(p, q)) < a(p, q) - tol_j) uf.unite(p, q);

    // Directed order between classes: current flows downhill.
    std::vector<std::vector<int>> succ(n);
    std::vector<int> indeg(n, 0);
    for (auto [p, q] : g.edges()) {
        if (std::abs(j(p, q)) <= tol_j) continue;
        int hi = j(p, q) > 0 ? uf.find(p) : uf.find(q);
        int lo = j(p, q) > 0 ? uf.find(q) : uf.find(p);
        if (hi == lo) return std::nullopt;  // current inside a must-equal class
        succ[hi].push_back(lo);
        ++indeg[lo];
    }

    // Longest-path levels over the class DAG, decreasing along the flow.
    std::vector<int> roots;
    for (int v = 0; v < n; ++v)
        if (uf.find(v) == v && indeg[v] == 0) roots.push_back(v);
    std::vector<int> depth(n, 0);
    std::vector<int> queue = roots;
    int processed = 0;
    std::vector<int> indeg_left = indeg;
    while (!queue.empty()) {
        int v = queue.back();
        queue.pop_back();
        ++processed;
        for (int w : succ[v]) {
            depth[w] = std::max(depth[w], depth[v] + 1);
            if (--indeg_left[w] == 0) queue.push_back(w);
        }
    }
    int classes = 0;
    for (int v = 0; v < n; ++v)
        if (uf.find(v) == v) ++classes;
    if (processed != classes) return std::nullopt;  // cycle in the flow order

    int max_depth = 0;
    for (int v = 0; v < n; ++v) max_depth = std::max(max_depth, depth[uf.find(v)]);
    VertexFunction levels(n);
    for (int v = 0; v < n; ++v) levels(v) = static_cast<double>(max_depth - depth[uf.find(v)]);

    VertexFunction out(n);
    if (pinned.empty()) {
        out = levels;
    } else {
        // Pinned vertices keep their value; each class takes the value of a
        // monotone interpolation between the pinned levels.
        std::vector<std::pair<double, double>> anchors;  // (level, value)
        for (int v : pinned) {
            for (auto& [lv, val] : anchors)
                if (lv == levels(v) && std::abs(val - u(v)) > tol) return std::nullopt;
            anchors.emplace_back(levels(v), u(v));
        }
        std::sort(anchors.begin(), anchors.end());
        for (size_t k = 1; k < anchors.size(); ++k)
            if (anchors[k].first > anchors[k - 1].first &&
                anchors[k].second <= anchors[k - 1].second + tol &&
                std::abs(anchors[k].second - anchors[k - 1].second) > tol)
                return std::nullopt;  // pinned values not increasing with level
        auto value_at = [&](double lv) {
            if (anchors.empty()) return lv;
            if (lv <= anchors.front().first)
                return anchors.front().second - (anchors.front().first - lv);
            if (lv >= anchors.back().first)
                return anchors.back().second + (lv - anchors.back().first);
            for (size_t k = 1; k < anchors.size(); ++k) {
                if (lv <= anchors[k].first) {
                    const auto& [l0, v0] = anchors[k - 1];
                    const auto& [l1, v1] = anchors[k];
                    if (l1 == l0) return v0;
                    double t = (lv - l0) / (l1 - l0);
                    double span = v1 - v0;
                    if (span <= 0.0) span = 1.0;  // flat pins, still need strictness
                    return v0 + t * span;
                }
            }
            return anchors.back().second;
        };
        for (int v = 0; v < n; ++v) out(v) = value_at(levels(v));
    }

    // The candidate must actually separate every current-carrying edge and
    // keep the flow aligned.
    for (auto [p, q] : g.edges()) {
        const double du = out(p) - out(q);
        if (std::abs(j(p, q)) > tol_j && j(p, q) * du <= 0.0) return std::nullopt;
        if (a(p, q) > tol_j && std::abs(j(p, q)) < a(p, q) - tol_j && std::abs(du) > tol)
            return std::nullopt;
    }
    return out;
}

}  // namespace cflow
