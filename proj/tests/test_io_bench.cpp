#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cflow/bench.hpp"
#include "cflow/io.hpp"

using namespace cflow;

TEST_CASE("network parsing") {
    const std::string text =
        "# three node path\n"
        "nodes 3\n"
        "mode dirichlet\n"
        "edge 1 2 1.0\n"
        "edge 2 3 1.0\n"
        "boundary 1 1.0\n"
        "boundary 3 0.0\n";
    NetworkFile nf = parse_network(text);
    CHECK(nf.nodes == 3);
    CHECK(nf.mode == BoundaryMode::Dirichlet);
    Graph g = nf.graph();
    CHECK(g.edges() == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
    CHECK(g.boundary() == std::vector<int>{0, 2});
    auto sigma = nf.conductivity(g);
    REQUIRE(sigma.has_value());
    CHECK(sigma->base(0, 1) == 1.0);

    // self-loop reported with its line number
    try {
        parse_network("nodes 3\nedge 2 2 1.0\n");
        FAIL("expected a parse error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    CHECK_THROWS_AS(parse_network("nodes 3\nedge 1 4\n"), DataError);
    CHECK_THROWS_AS(parse_network("edge 1 2\n"), DataError);
    CHECK_THROWS_AS(parse_network("nodes 3\nmode sideways\n"), DataError);
}

TEST_CASE("canonical round trip and json equivalence") {
    const std::string text =
        "nodes 3\n"
        "mode neumann\n"
        "edge 1 2 0.5\n"
        "edge 2 3 0.25\n"
        "boundary 1 1\n"
        "boundary 3 -1\n"
        "meas 1 2 0.125\n";
    NetworkFile nf = parse_network(text);
    const std::string canonical = write_network(nf);
    CHECK(write_network(parse_network(canonical)) == canonical);

    NetworkFile fromjson = parse_network(network_to_json(nf).dump());
    CHECK(write_network(fromjson) == canonical);
}

TEST_CASE("ciphertext and flow files") {
    AdmissibleFlow flow = sample_admissible(3, 5);
    const std::string ftext = write_flow(flow);
    AdmissibleFlow back = parse_flow(ftext);
    CHECK((back.A - flow.A).cwiseAbs().sum() == 0);
    CHECK(back.keys == flow.keys);

    Ciphertext c = encode(flow);
    const std::string ctext = write_ciphertext(c, flow.keys);
    CiphertextFile cf = parse_ciphertext(ctext);
    CHECK((cf.cipher.magnitude - c.magnitude).cwiseAbs().sum() == 0);
    CHECK((cf.cipher.f - c.f).cwiseAbs().sum() == 0);
    CHECK(cf.keys == flow.keys);

    CHECK_THROWS_AS(parse_ciphertext("dim 4\n"), DataError);
    CHECK_THROWS_AS(parse_flow("dim 3\nkey 1\nflow 1 9 1\n"), DataError);
}

TEST_CASE("bench instance generation") {
    BenchConfig cfg;
    cfg.nodes = 40;
    cfg.density = 0.2;
    cfg.boundary_count = 4;
    cfg.seed = 9;
    BenchInstance a = generate_bench_instance(cfg);
    BenchInstance b = generate_bench_instance(cfg);
    CHECK(write_network(a.network) == write_network(b.network));

    // a = |J| and the Neumann data is the boundary flux of J
    CHECK((a.a.matrix() - a.J.matrix().cwiseAbs()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(a.g.g.sum()) <= 1e-12 * std::max(1.0, a.g.g.lpNorm<1>()));

    // serialized instance survives a parse round trip byte-identically
    const std::string canonical = write_network(a.network);
    CHECK(write_network(parse_network(canonical)) == canonical);

    BenchConfig bad = cfg;
    bad.boundary_count = 40;
    CHECK_THROWS_AS(generate_bench_instance(bad), DataError);

    BenchConfig pinned = cfg;
    pinned.edge_count = 120;
    BenchInstance p = generate_bench_instance(pinned);
    CHECK(p.network.edges.size() == 120);
}

TEST_CASE("bench harness runs the tolerance ladder") {
    BenchConfig cfg;
    cfg.nodes = 20;
    cfg.density = 0.3;
    cfg.boundary_count = 4;
    cfg.seed = 3;
    cfg.tolerances = {1e-3, 1e-5};
    BenchReport rep = run_bench(cfg);
    REQUIRE(rep.rows.size() == 4);
    for (const auto& r : rep.rows) {
        CHECK(r.error.empty());
        CHECK(r.converged);
        CHECK(r.relative_error < 0.3);
    }
    // tighter tolerance does not increase the error, per algorithm
    CHECK(rep.rows[2].relative_error <= rep.rows[0].relative_error + 1e-12);
    CHECK(rep.rows[3].relative_error <= rep.rows[1].relative_error + 1e-12);

    // iteration cap of one produces an unconverged row, not a crash
    BenchConfig capped = cfg;
    capped.max_iter = 1;
    capped.tolerances = {1e-6};
    BenchReport crep = run_bench(capped);
    for (const auto& r : crep.rows) CHECK_FALSE(r.converged);

    // repetition mode emits averaged iteration counts
    BenchConfig avg = cfg;
    avg.tolerances = {1e-3, 1e-4};
    avg.repetitions = 5;
    BenchReport arep = run_bench(avg);
    REQUIRE(arep.averages.size() == 2);
    for (const auto& row : arep.averages) {
        CHECK(row.mean_iterations_dirichlet > 0.0);
        CHECK(row.mean_iterations_neumann > 0.0);
    }
}
