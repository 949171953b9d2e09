#include "cflow/bench.hpp"
#include "cflow/io.hpp"
#include "cflow/multi_measurement.hpp"
#include "cflow/random_walk.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace cflow;
using nlohmann::json;

struct CommonOpts {
    double alpha = 1.0;
    double tol = 1e-6;
    int max_iter = 100000;
    std::uint64_t seed = 1;
    std::vector<std::string> inputs;
    std::string output;
    std::string format = "text";
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_input = true) {
    cmd->add_option("--alpha", o.alpha, "penalty parameter");
    cmd->add_option("--tol", o.tol, "stopping tolerance");
    cmd->add_option("--max-iter", o.max_iter, "iteration cap");
    cmd->add_option("--seed", o.seed, "random seed");
    auto* in = cmd->add_option("--input", o.inputs, "input file (repeatable)");
    if (needs_input) in->required();
    cmd->add_option("--output", o.output, "output file (default stdout)");
    cmd->add_option("--format", o.format, "text or json")
        ->check(CLI::IsMember({"text", "json"}));
}

AdmmConfig admm_config(const CommonOpts& o) {
    AdmmConfig cfg;
    cfg.alpha = o.alpha;
    cfg.tol = o.tol;
    cfg.max_iter = o.max_iter;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const CommonOpts& o, const std::string& text) {
    if (o.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(o.output, std::ios::binary);
    if (!out) throw DataError("cannot open output file: " + o.output);
    out << text;
}

std::string fmt(double v) { return detail::fmt_double(v); }

json edge_json(const Graph& g, const Eigen::MatrixXd& m) {
    json arr = json::array();
    for (auto [i, j] : g.edges()) arr.push_back({i + 1, j + 1, m(i, j)});
    return arr;
}

std::string edge_text(const std::string& tag, const Graph& g, const Eigen::MatrixXd& m) {
    std::string out;
    for (auto [i, j] : g.edges())
        out += tag + " " + std::to_string(i + 1) + " " + std::to_string(j + 1) + " " +
               fmt(m(i, j)) + "\n";
    return out;
}

std::string vertex_text(const std::string& tag, const VertexFunction& v) {
    std::string out;
    for (int i = 0; i < v.size(); ++i)
        out += tag + " " + std::to_string(i + 1) + " " + fmt(v(i)) + "\n";
    return out;
}

json report_json(const SolveReport& r) {
    json j;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["primal_energy"] = r.primal_energy;
    j["dual_value"] = r.dual_value;
    j["duality_gap"] = r.duality_gap;
    if (std::isfinite(r.lambda)) j["lambda"] = r.lambda;
    return j;
}

std::string report_text(const SolveReport& r) {
    std::string out;
    out += "iterations " + std::to_string(r.iterations) + "\n";
    out += std::string("converged ") + (r.converged ? "yes" : "no") + "\n";
    out += "energy " + fmt(r.primal_energy) + "\n";
    out += "dual " + fmt(r.dual_value) + "\n";
    out += "gap " + fmt(r.duality_gap) + "\n";
    if (std::isfinite(r.lambda)) out += "lambda " + fmt(r.lambda) + "\n";
    return out;
}

std::string render_solution(const CommonOpts& o, const Graph& g, const InverseSolution& sol) {
    if (o.format == "json") {
        json j;
        j["potential"] = std::vector<double>(sol.u.data(), sol.u.data() + sol.u.size());
        j["current"] = edge_json(g, sol.J.matrix());
        j["sigma"] = edge_json(g, sol.sigma.base.matrix());
        json perfect = json::array();
        for (auto [a, b] : sol.sigma.perfect) perfect.push_back({a + 1, b + 1});
        j["perfect"] = perfect;
        j["report"] = report_json(sol.report);
        return j.dump(2) + "\n";
    }
    std::string out = vertex_text("potential", sol.u);
    out += edge_text("current", g, sol.J.matrix());
    out += edge_text("sigma", g, sol.sigma.base.matrix());
    for (auto [a, b] : sol.sigma.perfect)
        out += "perfect " + std::to_string(a + 1) + " " + std::to_string(b + 1) + "\n";
    out += report_text(sol.report);
    return out;
}

int cmd_forward(const CommonOpts& o) {
    NetworkFile nf = parse_network(slurp(o.inputs.front()));
    Graph g = nf.graph();
    auto sigma = nf.conductivity(g);
    if (!sigma) throw DataError("forward: network file carries no conductivities");
    VertexFunction v = nf.mode == BoundaryMode::Dirichlet
                           ? solve_dirichlet_forward(g, *sigma, DirichletData{nf.boundary_values()})
                           : solve_neumann_forward(g, *sigma, NeumannData{nf.boundary_values()});
    Current j = current_from_potential(g, *sigma, v);
    if (o.format == "json") {
        json out;
        out["potential"] = std::vector<double>(v.data(), v.data() + v.size());
        out["current"] = edge_json(g, j.matrix());
        emit(o, out.dump(2) + "\n");
    } else {
        emit(o, vertex_text("potential", v) + edge_text("current", g, j.matrix()));
    }
    return 0;
}

int cmd_invert(const CommonOpts& o, BoundaryMode mode) {
    NetworkFile nf = parse_network(slurp(o.inputs.front()));
    Graph g = nf.graph();
    auto a = nf.measurement(g);
    if (!a) throw DataError("invert: network file carries no 'meas' magnitudes");
    InverseSolution sol =
        mode == BoundaryMode::Dirichlet
            ? solve_inverse_dirichlet(g, DirichletData{nf.boundary_values()}, *a, admm_config(o))
            : solve_inverse_neumann(g, NeumannData{nf.boundary_values()}, *a, admm_config(o));
    emit(o, render_solution(o, g, sol));
    return sol.report.converged ? 0 : 3;
}

int cmd_multi_check(const CommonOpts& o) {
    if (o.inputs.size() < 2)
        throw DataError("multi-check: need at least two --input network files");
    std::optional<Graph> g;
    MeasurementSet set;
    for (const auto& path : o.inputs) {
        NetworkFile nf = parse_network(slurp(path));
        Graph gl = nf.graph();
        if (!g) {
            g = Graph(gl.n(), gl.edges(), gl.boundary());
        } else if (g->n() != gl.n() || g->edges() != gl.edges()) {
            throw DataError("multi-check: all datasets must share one graph");
        }
        Measurement m;
        m.boundary = gl.boundary();
        if (nf.mode == BoundaryMode::Dirichlet)
            m.dirichlet = nf.boundary_values();
        else
            m.neumann = nf.boundary_values();
        auto a = nf.measurement(gl);
        if (!a) throw DataError("multi-check: dataset without 'meas' magnitudes: " + path);
        m.a = *a;
        set.items.push_back(std::move(m));
    }
    ConsistencyResult res = consistency_check(*g, set, admm_config(o));
    if (o.format == "json") {
        json j;
        j["consistent"] = res.consistent;
        j["phi"] = res.phi;
        if (res.sigma) {
            j["sigma"] = edge_json(*g, res.sigma->base.matrix());
            json perfect = json::array();
            for (auto [a, b] : res.sigma->perfect) perfect.push_back({a + 1, b + 1});
            j["perfect"] = perfect;
        }
        emit(o, j.dump(2) + "\n");
    } else {
        std::string out = std::string("consistent ") + (res.consistent ? "yes" : "no") + "\n";
        out += "phi " + fmt(res.phi) + "\n";
        if (res.sigma) {
            out += edge_text("sigma", *g, res.sigma->base.matrix());
            for (auto [a, b] : res.sigma->perfect)
                out += "perfect " + std::to_string(a + 1) + " " + std::to_string(b + 1) + "\n";
        }
        emit(o, out);
    }
    return 0;
}

// Walk input: neumann network whose boundary rows are entry (positive) and
// exit (negative) probabilities and whose `meas i j w` rows give the signed
// prescribed net passage W_ij.
struct WalkInput {
    Graph g;
    NetPassage W;
    std::vector<std::pair<int, double>> entry, exit;
};

WalkInput parse_walk_input(const std::string& path) {
    NetworkFile nf = parse_network(slurp(path));
    if (nf.mode != BoundaryMode::Neumann)
        throw DataError("walk: input must be a neumann-mode network");
    Graph g = nf.graph();
    WalkInput in{std::move(g), {}, {}, {}};
    in.W.W = EdgeFunction::zero(in.g, EdgeKind::Antisymmetric);
    for (auto& [i, j, w] : nf.measurements) {
        if (!in.g.has_edge(i, j)) throw DataError("walk: meas entry off the edge set");
        in.W.W.set(i, j, w);
    }
    for (auto& [v, p] : nf.boundary) {
        if (p > 0)
            in.entry.emplace_back(v, p);
        else if (p < 0)
            in.exit.emplace_back(v, -p);
        else
            throw DataError("walk: boundary probability must be nonzero");
    }
    return in;
}

int cmd_design_walk(const CommonOpts& o) {
    WalkInput in = parse_walk_input(o.inputs.front());
    WalkDesign d = design_transitions(in.g, in.W, in.entry, in.exit, admm_config(o));
    if (o.format == "json") {
        json j;
        json rows = json::array();
        for (int i = 0; i < in.g.n(); ++i)
            for (int k = 0; k < in.g.n(); ++k)
                if (d.P.P(i, k) > 0) rows.push_back({i + 1, k + 1, d.P.P(i, k)});
        j["transitions"] = rows;
        j["sigma"] = edge_json(in.g, d.sigma.base.matrix());
        j["absorbing"] = json::array();
        for (int v : d.P.absorbing) j["absorbing"].push_back(v + 1);
        j["report"] = report_json(d.solution.report);
        emit(o, j.dump(2) + "\n");
    } else {
        std::string out;
        for (int i = 0; i < in.g.n(); ++i)
            for (int k = 0; k < in.g.n(); ++k)
                if (d.P.P(i, k) > 0)
                    out += "transition " + std::to_string(i + 1) + " " + std::to_string(k + 1) +
                           " " + fmt(d.P.P(i, k)) + "\n";
        out += edge_text("sigma", in.g, d.sigma.base.matrix());
        for (int v : d.P.absorbing) out += "absorbing " + std::to_string(v + 1) + "\n";
        out += report_text(d.solution.report);
        emit(o, out);
    }
    return 0;
}

int cmd_simulate_walk(const CommonOpts& o, long walkers) {
    WalkInput in = parse_walk_input(o.inputs.front());
    WalkDesign d = design_transitions(in.g, in.W, in.entry, in.exit, admm_config(o));
    std::vector<int> exit_set;
    for (auto [v, p] : in.exit) exit_set.push_back(v);
    PassageEstimate est = simulate_net_passages(in.g, d.P, in.entry, exit_set, walkers, o.seed);
    if (o.format == "json") {
        json j;
        json rows = json::array();
        for (auto [i, k] : in.g.edges())
            rows.push_back({i + 1, k + 1, est.mean.W(i, k), est.standard_error(i, k),
                            in.W.W(i, k)});
        j["edges"] = rows;  // [i, j, estimate, standard_error, prescribed]
        j["walkers"] = est.walkers;
        j["seed"] = est.seed;
        emit(o, j.dump(2) + "\n");
    } else {
        std::string out;
        for (auto [i, k] : in.g.edges())
            out += "passage " + std::to_string(i + 1) + " " + std::to_string(k + 1) + " " +
                   fmt(est.mean.W(i, k)) + " se " + fmt(est.standard_error(i, k)) +
                   " prescribed " + fmt(in.W.W(i, k)) + "\n";
        out += "walkers " + std::to_string(est.walkers) + "\n";
        emit(o, out);
    }
    return 0;
}

int cmd_encode(const CommonOpts& o) {
    AdmissibleFlow flow = parse_flow(slurp(o.inputs.front()));
    Ciphertext c = encode(flow);
    if (o.format == "json") {
        json j;
        j["dim"] = c.magnitude.rows();
        json mags = json::array();
        for (int i = 0; i < c.magnitude.rows(); ++i)
            for (int k = i + 1; k < c.magnitude.cols(); ++k)
                if (c.magnitude(i, k) != 0) mags.push_back({i + 1, k + 1});
        j["mag"] = mags;
        json fl = json::array();
        for (size_t k = 0; k < flow.keys.size(); ++k)
            fl.push_back({flow.keys[k] + 1, c.f(k)});
        j["flux"] = fl;
        emit(o, j.dump(2) + "\n");
    } else {
        emit(o, write_ciphertext(c, flow.keys));
    }
    return 0;
}

int cmd_decode(const CommonOpts& o) {
    CiphertextFile cf = parse_ciphertext(slurp(o.inputs.front()));
    AdmissibleFlow flow = decode(cf.cipher, cf.keys, admm_config(o));
    if (o.format == "json") {
        json j;
        j["dim"] = flow.A.rows();
        j["key"] = json::array();
        for (int k : flow.keys) j["key"].push_back(k + 1);
        json rows = json::array();
        for (int i = 0; i < flow.A.rows(); ++i)
            for (int k = i + 1; k < flow.A.cols(); ++k)
                if (flow.A(i, k) != 0) rows.push_back({i + 1, k + 1, flow.A(i, k)});
        j["flow"] = rows;
        emit(o, j.dump(2) + "\n");
    } else {
        emit(o, write_flow(flow));
    }
    return 0;
}

int cmd_bench(const CommonOpts& o, BenchConfig cfg) {
    cfg.alpha = o.alpha;
    cfg.seed = o.seed;
    cfg.max_iter = o.max_iter;
    BenchReport rep = run_bench(cfg);
    bool all_ok = true;
    for (const auto& r : rep.rows)
        if (!r.converged || !r.error.empty()) all_ok = false;
    if (o.format == "json") {
        json j;
        j["nodes"] = cfg.nodes;
        j["edges"] = rep.edge_count;
        j["seed"] = cfg.seed;
        json rows = json::array();
        for (const auto& r : rep.rows) {
            json row;
            row["algorithm"] = r.algorithm;
            row["tolerance"] = r.tolerance;
            row["relative_error"] = r.relative_error;
            row["iterations"] = r.iterations;
            row["wall_ms"] = r.wall_ms;
            row["converged"] = r.converged;
            if (!r.error.empty()) row["error"] = r.error;
            rows.push_back(row);
        }
        j["rows"] = rows;
        if (!rep.averages.empty()) {
            json avgs = json::array();
            for (const auto& a : rep.averages)
                avgs.push_back({{"tolerance", a.tolerance},
                                {"mean_iterations_dirichlet", a.mean_iterations_dirichlet},
                                {"mean_iterations_neumann", a.mean_iterations_neumann}});
            j["averages"] = avgs;
        }
        emit(o, j.dump(2) + "\n");
    } else {
        std::string out = "nodes " + std::to_string(cfg.nodes) + " edges " +
                          std::to_string(rep.edge_count) + " seed " + std::to_string(cfg.seed) +
                          "\n";
        out += "algorithm\ttolerance\trelative_error\titerations\twall_ms\tconverged\n";
        for (const auto& r : rep.rows) {
            out += r.algorithm + "\t" + fmt(r.tolerance) + "\t" + fmt(r.relative_error) + "\t" +
                   std::to_string(r.iterations) + "\t" + fmt(r.wall_ms) + "\t" +
                   (r.converged ? "yes" : "no");
            if (!r.error.empty()) out += "\t" + r.error;
            out += "\n";
        }
        if (!rep.averages.empty()) {
            out += "tolerance\tmean_iter_dirichlet\tmean_iter_neumann\n";
            for (const auto& a : rep.averages)
                out += fmt(a.tolerance) + "\t" + fmt(a.mean_iterations_dirichlet) + "\t" +
                       fmt(a.mean_iterations_neumann) + "\n";
        }
        emit(o, out);
    }
    return all_ok ? 0 : 3;
}

int cmd_keyspace(const CommonOpts& o, int n) {
    KeyspaceSize ks = keyspace_size(n);
    if (o.format == "json") {
        json j;
        j["n"] = n;
        j["exact"] = ks.exact.str();
        j["estimate"] = ks.estimate;
        j["relative_deviation"] = ks.relative_deviation;
        emit(o, j.dump(2) + "\n");
    } else {
        emit(o, "n " + std::to_string(n) + "\nexact " + ks.exact.str() + "\nestimate " +
                    fmt(ks.estimate) + "\ndeviation " + fmt(ks.relative_deviation) + "\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"electrical network flow toolkit"};
    app.require_subcommand(1);

    CommonOpts o;
    long walkers = 100000;
    int keyspace_n = 1;
    BenchConfig bcfg;

    auto* c_forward = app.add_subcommand("forward", "solve the forward network problem");
    add_common(c_forward, o);
    auto* c_invd = app.add_subcommand("invert-dirichlet",
                                      "recover current from magnitudes and boundary voltages");
    add_common(c_invd, o);
    auto* c_invn = app.add_subcommand("invert-neumann",
                                      "recover current from magnitudes and boundary currents");
    add_common(c_invn, o);
    auto* c_multi = app.add_subcommand("multi-check",
                                       "test several datasets for a common conductivity");
    add_common(c_multi, o);
    auto* c_design = app.add_subcommand("design-walk",
                                        "transition matrix realizing prescribed net passages");
    add_common(c_design, o);
    auto* c_sim = app.add_subcommand("simulate-walk",
                                     "Monte-Carlo check of a designed random walk");
    add_common(c_sim, o);
    c_sim->add_option("--walkers", walkers, "number of walkers");
    auto* c_enc = app.add_subcommand("encode", "flow matrix to ciphertext");
    add_common(c_enc, o);
    auto* c_dec = app.add_subcommand("decode", "ciphertext plus key back to the flow matrix");
    add_common(c_dec, o);
    auto* c_bench = app.add_subcommand("bench", "seeded benchmark over a tolerance ladder");
    add_common(c_bench, o, false);
    c_bench->add_option("--nodes", bcfg.nodes, "vertex count");
    c_bench->add_option("--density", bcfg.density, "edge density over unordered pairs");
    c_bench->add_option("--edges", bcfg.edge_count, "pin the exact edge count");
    c_bench->add_option("--boundary", bcfg.boundary_count, "boundary vertex count");
    c_bench->add_option("--tolerances", bcfg.tolerances, "tolerance ladder");
    c_bench->add_option("--repetitions", bcfg.repetitions,
                        "averaged-iterations mode over this many data draws");
    auto* c_key = app.add_subcommand("keyspace", "key-set count, exact and asymptotic");
    add_common(c_key, o, false);
    c_key->add_option("n", keyspace_n, "codec size parameter")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (c_forward->parsed()) return cmd_forward(o);
        if (c_invd->parsed()) return cmd_invert(o, BoundaryMode::Dirichlet);
        if (c_invn->parsed()) return cmd_invert(o, BoundaryMode::Neumann);
        if (c_multi->parsed()) return cmd_multi_check(o);
        if (c_design->parsed()) return cmd_design_walk(o);
        if (c_sim->parsed()) return cmd_simulate_walk(o, walkers);
        if (c_enc->parsed()) return cmd_encode(o);
        if (c_dec->parsed()) return cmd_decode(o);
        if (c_bench->parsed()) return cmd_bench(o, bcfg);
        if (c_key->parsed()) return cmd_keyspace(o, keyspace_n);
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
