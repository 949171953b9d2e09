#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cflow/random_walk.hpp"
#include "test_support.hpp"

using namespace cflow;
using namespace cflow::testing;

namespace {

Conductivity unit_sigma(const Graph& g) {
    Conductivity s;
    s.base = EdgeFunction::zero(g, EdgeKind::SymmetricNonneg);
    for (auto [i, j] : g.edges()) s.base.set(i, j, 1.0);
    return s;
}

}  // namespace

TEST_CASE("transitions from conductivity") {
    Graph g = path3();
    Conductivity s = unit_sigma(g);
    TransitionMatrix t = transitions_from_conductivity(g, s);
    CHECK(t.P(1, 0) == doctest::Approx(0.5));
    CHECK(t.P(1, 2) == doctest::Approx(0.5));
    CHECK(t.P(0, 1) == doctest::Approx(1.0));
    CHECK(t.P(0, 2) == 0.0);

    // exact scale invariance under binary scaling
    Conductivity s2 = s;
    s2.base.matrix() *= 4.0;
    TransitionMatrix t2 = transitions_from_conductivity(g, s2);
    CHECK((t.P - t2.P).cwiseAbs().maxCoeff() == 0.0);

    Graph tri = triangle();
    TransitionMatrix tt = transitions_from_conductivity(tri, unit_sigma(tri));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j) CHECK(tt.P(i, j) == doctest::Approx(0.5));

    Conductivity p = s;
    p.perfect.insert({0, 1});
    CHECK_THROWS_AS(transitions_from_conductivity(g, p), DataError);
}

TEST_CASE("rows are stochastic on random conductivities") {
    Rng rng(111);
    for (int rep = 0; rep < 10; ++rep) {
        Graph g = random_graph(10, 0.4, 3, rng);
        Conductivity s = random_conductivity(g, rng);
        TransitionMatrix t = transitions_from_conductivity(g, s);
        for (int i = 0; i < g.n(); ++i) {
            CHECK(t.P.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(t.P.row(i).minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("design on the series path") {
    Graph g = path3();
    NetPassage W;
    W.W = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    W.W.set(0, 1, 1.0);
    W.W.set(1, 2, 1.0);
    AdmmConfig cfg;
    cfg.tol = 1e-8;
    WalkDesign d = design_transitions(g, W, {{0, 1.0}}, {{2, 1.0}}, cfg);
    CHECK(d.P.P(1, 0) == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(d.P.P(1, 2) == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(d.P.absorbing == std::vector<int>{2});

    // zero target is degenerate
    NetPassage zero;
    zero.W = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    CHECK_THROWS_AS(design_transitions(g, zero, {{0, 1.0}}, {{2, 1.0}}, cfg), DataError);
}

TEST_CASE("design on the triangle matches the unit-sigma walk") {
    Graph g = triangle();
    NetPassage W;
    W.W = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    W.W.set(0, 1, 1.0 / 3.0);
    W.W.set(1, 2, 1.0 / 3.0);
    W.W.set(0, 2, 2.0 / 3.0);
    AdmmConfig cfg;
    cfg.tol = 1e-8;
    WalkDesign d = design_transitions(g, W, {{0, 1.0}}, {{2, 1.0}}, cfg);
    TransitionMatrix expect = transitions_from_conductivity(g, unit_sigma(g));
    CHECK((d.P.P - expect.P).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("design from a forward-generated target realizes the prescribed passages") {
    // The conductivity realizing a given net-passage field is not unique, so
    // the designed chain need not match the generating one; the contract is
    // that its induced current reproduces W.
    Rng rng(121);
    AdmmConfig cfg;
    cfg.tol = 1e-8;
    cfg.max_iter = 400000;
    for (int rep = 0; rep < 3; ++rep) {
        Graph g = random_graph(9, 0.45, 2, rng);
        Conductivity s = random_conductivity(g, rng, 0.2);
        Eigen::VectorXd gn(2);
        gn << 1.0, -1.0;
        VertexFunction v = solve_neumann_forward(g, s, NeumannData{gn});
        NetPassage W;
        W.W = current_from_potential(g, s, v);

        const int a = g.boundary()[0], b = g.boundary()[1];
        WalkDesign d = design_transitions(g, W, {{a, 1.0}}, {{b, 1.0}}, cfg);

        // independent forward recomputation of the designed current
        Graph gb(g.n(), g.edges(), {a, b});
        VertexFunction vd = solve_neumann_forward(gb, d.sigma, NeumannData{gn});
        Current jd = current_from_potential(gb, d.sigma, vd);
        const double rel =
            (jd.matrix() - W.W.matrix()).norm() / W.W.matrix().norm();
        CHECK(rel < 1e-6);

        // designed rows are stochastic
        for (int i = 0; i < g.n(); ++i) {
            CHECK(d.P.P.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(d.P.P.row(i).minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("deterministic chain is reproduced exactly") {
    Graph g = path3();
    TransitionMatrix t;
    t.P = Eigen::MatrixXd::Zero(3, 3);
    t.P(0, 1) = 1.0;
    t.P(1, 2) = 1.0;
    t.absorbing = {2};
    PassageEstimate est = simulate_net_passages(g, t, {{0, 1.0}}, {2}, 10, 7);
    CHECK(est.mean.W(0, 1) == doctest::Approx(1.0));
    CHECK(est.mean.W(1, 2) == doctest::Approx(1.0));
    CHECK(est.standard_error(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("monte carlo agrees with the designed passages") {
    Graph g = path3();
    NetPassage W;
    W.W = EdgeFunction::zero(g, EdgeKind::Antisymmetric);
    W.W.set(0, 1, 1.0);
    W.W.set(1, 2, 1.0);
    AdmmConfig cfg;
    cfg.tol = 1e-8;
    WalkDesign d = design_transitions(g, W, {{0, 1.0}}, {{2, 1.0}}, cfg);
    PassageEstimate est = simulate_net_passages(g, d.P, {{0, 1.0}}, {2}, 20000, 42);
    for (auto [i, j] : g.edges()) {
        const double se = std::max(est.standard_error(i, j), 1e-9);
        CHECK(std::abs(est.mean.W(i, j) - W.W(i, j)) <= 4.0 * se);
    }

    // determinism with a fixed seed
    PassageEstimate est2 = simulate_net_passages(g, d.P, {{0, 1.0}}, {2}, 20000, 42);
    CHECK((est.mean.W.matrix() - est2.mean.W.matrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulation input validation") {
    Graph g = path3();
    TransitionMatrix t;
    t.P = Eigen::MatrixXd::Zero(3, 3);
    t.P(0, 1) = 1.0;
    t.P(1, 0) = 1.0;  // never reaches vertex 3
    t.P(2, 1) = 1.0;
    CHECK_THROWS_AS(simulate_net_passages(g, t, {{0, 1.0}}, {2}, 10, 1), DataError);
    t.P(1, 0) = 0.5;
    t.P(1, 2) = 0.5;
    CHECK_THROWS_AS(simulate_net_passages(g, t, {{0, 0.5}}, {2}, 10, 1), DataError);
}
