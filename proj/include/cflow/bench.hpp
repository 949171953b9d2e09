#pragma once

#include "cflow/admm.hpp"
#include "cflow/io.hpp"
#include "cflow/rng.hpp"

#include <chrono>

namespace cflow {

struct BenchConfig {
    int nodes = 100;
    double density = 0.125;            // over unordered vertex pairs
    std::optional<int> edge_count;     // pin the exact number of edges
    int boundary_count = 5;
    std::vector<double> tolerances = {1e-3, 1e-4, 1e-5, 1e-6};
    std::uint64_t seed = 1;
    int repetitions = 0;               // > 0: averaged-iterations comparison
    double alpha = 1.0;
    int max_iter = 200000;

    void validate() const {
        if (nodes < 2) throw DataError("bench: nodes must be at least 2");
        if (!(density > 0.0 && density <= 1.0)) throw DataError("bench: density in (0,1]");
        if (boundary_count < 2 || boundary_count >= nodes)
            throw DataError("bench: boundary count must be in [2, nodes)");
    }
};

struct BenchInstance {
    NetworkFile network;   // graph + sigma + dirichlet boundary values
    Conductivity sigma;    // ground truth
    DirichletData f;
    NeumannData g;         // boundary currents induced by f
    Current J;             // ground-truth current
    MeasurementMatrix a;   // |J|
};

namespace detail {

inline std::vector<std::pair<int, int>> sample_edges(int n, const BenchConfig& cfg, Rng& rng) {
    std::vector<std::pair<int, int>> all;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) all.emplace_back(i, j);
    if (cfg.edge_count) {
        for (size_t i = all.size(); i > 1; --i)
            std::swap(all[i - 1], all[rng.uniform_int(i)]);
        if (*cfg.edge_count > static_cast<int>(all.size()))
            throw DataError("bench: edge count exceeds complete graph");
        all.resize(*cfg.edge_count);
        std::sort(all.begin(), all.end());
        return all;
    }
    std::vector<std::pair<int, int>> picked;
    for (auto e : all)
        if (rng.uniform() < cfg.density) picked.push_back(e);
    return picked;
}

}  // namespace detail

/// Seeded random instance: Erdos-Renyi edges at the target density
/// (resampled until connected), uniform(0,1) conductivities and Dirichlet
/// values, Neumann data read off the forward current.
inline BenchInstance generate_bench_instance(const BenchConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    Rng rng_graph = root.child(1);
    Rng rng_sigma = root.child(2);
    Rng rng_boundary = root.child(3);
    Rng rng_f = root.child(4);

    std::optional<Graph> graph;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> boundary;
    for (int attempt = 0; attempt < 1000 && !graph; ++attempt) {
        edges = detail::sample_edges(cfg.nodes, cfg, rng_graph);
        boundary.clear();
        std::vector<int> verts(cfg.nodes);
        std::iota(verts.begin(), verts.end(), 0);
        for (size_t i = verts.size(); i > 1; --i)
            std::swap(verts[i - 1], verts[rng_boundary.uniform_int(i)]);
        boundary.assign(verts.begin(), verts.begin() + cfg.boundary_count);
        std::sort(boundary.begin(), boundary.end());
        try {
            graph.emplace(cfg.nodes, edges, boundary);
        } catch (const DataError&) {
            // disconnected draw, resample
        }
    }
    if (!graph) throw ConvergenceError("bench: failed to draw a connected graph");

    BenchInstance inst;
    Conductivity sigma;
    sigma.base = EdgeFunction::zero(*graph, EdgeKind::SymmetricNonneg);
    for (auto [i, j] : graph->edges()) sigma.base.set(i, j, rng_sigma.uniform());
    inst.sigma = sigma;

    Eigen::VectorXd f(cfg.boundary_count);
    for (int k = 0; k < cfg.boundary_count; ++k) f(k) = rng_f.uniform();
    inst.f = DirichletData{f};

    VertexFunction v = solve_dirichlet_forward(*graph, sigma, inst.f);
    inst.J = current_from_potential(*graph, sigma, v);
    inst.a = EdgeFunction::zero(*graph, EdgeKind::SymmetricNonneg);
    inst.a.matrix() = inst.J.matrix().cwiseAbs();

    VertexFunction flux = vertex_flux(*graph, inst.J);
    Eigen::VectorXd g(cfg.boundary_count);
    for (int k = 0; k < cfg.boundary_count; ++k) g(k) = flux(boundary[k]);
    inst.g = NeumannData{g};

    inst.network.nodes = cfg.nodes;
    inst.network.mode = BoundaryMode::Dirichlet;
    for (auto [i, j] : graph->edges())
        inst.network.edges.emplace_back(i, j, sigma.base(i, j));
    for (int k = 0; k < cfg.boundary_count; ++k)
        inst.network.boundary.emplace_back(boundary[k], f(k));
    return inst;
}

struct BenchRow {
    std::string algorithm;
    double tolerance = 0.0;
    double relative_error = 0.0;
    int iterations = 0;
    double wall_ms = 0.0;
    bool converged = false;
    std::string error;  // nonempty when the solve failed outright
};

struct BenchAverageRow {
    double tolerance = 0.0;
    double mean_iterations_dirichlet = 0.0;
    double mean_iterations_neumann = 0.0;
};

struct BenchReport {
    BenchInstance instance;
    std::vector<BenchRow> rows;
    std::vector<BenchAverageRow> averages;  // repetition mode
    int edge_count = 0;
};

/// Run both algorithms over the tolerance ladder on one instance; with
/// repetitions > 0 also average iteration counts over fresh Dirichlet draws.
inline BenchReport run_bench(const BenchConfig& cfg) {
    BenchReport report;
    report.instance = generate_bench_instance(cfg);
    const BenchInstance& inst = report.instance;
    Graph graph = inst.network.graph();
    report.edge_count = static_cast<int>(graph.edges().size());

    auto time_solve = [](auto&& fn, BenchRow& row) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn();
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        row.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
    };

    const double jnorm = inst.J.matrix().norm();
    for (double tol : cfg.tolerances) {
        AdmmConfig acfg;
        acfg.alpha = cfg.alpha;
        acfg.tol = tol;
        acfg.max_iter = cfg.max_iter;

        BenchRow r1{"dirichlet", tol};
        time_solve(
            [&] {
                auto sol = solve_inverse_dirichlet(graph, inst.f, inst.a, acfg);
                r1.relative_error = (sol.J.matrix() - inst.J.matrix()).norm() / jnorm;
                r1.iterations = sol.report.iterations;
                r1.converged = sol.report.converged;
            },
            r1);
        report.rows.push_back(r1);

        BenchRow r2{"neumann", tol};
        time_solve(
            [&] {
                auto sol = solve_inverse_neumann(graph, inst.g, inst.a, acfg);
                auto scaled = rescale_to_unit_flux(sol);
                r2.relative_error = (scaled.J.matrix() - inst.J.matrix()).norm() / jnorm;
                r2.iterations = sol.report.iterations;
                r2.converged = sol.report.converged;
            },
            r2);
        report.rows.push_back(r2);
    }

    if (cfg.repetitions > 0) {
        Rng rng_draws = Rng(cfg.seed).child(100);
        std::vector<BenchAverageRow> avg;
        for (double tol : cfg.tolerances) avg.push_back({tol, 0.0, 0.0});
        int counted = 0;
        for (int rep = 0; rep < cfg.repetitions; ++rep) {
            Eigen::VectorXd f(cfg.boundary_count);
            for (int k = 0; k < cfg.boundary_count; ++k) f(k) = rng_draws.uniform();
            DirichletData fd{f};
            VertexFunction v;
            try {
                v = solve_dirichlet_forward(graph, inst.sigma, fd);
            } catch (const std::exception&) {
                continue;
            }
            Current J = current_from_potential(graph, inst.sigma, v);
            MeasurementMatrix a = EdgeFunction::zero(graph, EdgeKind::SymmetricNonneg);
            a.matrix() = J.matrix().cwiseAbs();
            VertexFunction flux = vertex_flux(graph, J);
            Eigen::VectorXd g(cfg.boundary_count);
            for (int k = 0; k < cfg.boundary_count; ++k) g(k) = flux(graph.boundary()[k]);
            if (g.lpNorm<1>() < 1e-12) continue;

            ++counted;
            for (size_t t = 0; t < cfg.tolerances.size(); ++t) {
                AdmmConfig acfg;
                acfg.alpha = cfg.alpha;
                acfg.tol = cfg.tolerances[t];
                acfg.max_iter = cfg.max_iter;
                acfg.relabel = false;  // iteration counting only
                auto s1 = solve_inverse_dirichlet(graph, fd, a, acfg);
                auto s2 = solve_inverse_neumann(graph, NeumannData{g}, a, acfg);
                avg[t].mean_iterations_dirichlet += s1.report.iterations;
                avg[t].mean_iterations_neumann += s2.report.iterations;
            }
        }
        for (auto& row : avg) {
            row.mean_iterations_dirichlet /= std::max(1, counted);
            row.mean_iterations_neumann /= std::max(1, counted);
        }
        report.averages = avg;
    }
    return report;
}

}  // namespace cflow
