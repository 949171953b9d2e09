#pragma once

#include "cflow/flow_codec.hpp"
#include "cflow/forward.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>

namespace cflow {

enum class BoundaryMode { Dirichlet, Neumann };

/// Parsed network description. Vertices are 1-based on disk, 0-based here.
struct NetworkFile {
    int nodes = 0;
    std::vector<std::tuple<int, int, std::optional<double>>> edges;  // (i, j, sigma)
    std::vector<std::pair<int, double>> boundary;                    // (vertex, value)
    BoundaryMode mode = BoundaryMode::Dirichlet;
    std::vector<std::tuple<int, int, double>> measurements;          // optional a entries

    Graph graph() const {
        std::vector<std::pair<int, int>> es;
        for (auto& [i, j, s] : edges) es.emplace_back(i, j);
        std::vector<int> bs;
        for (auto& [v, val] : boundary) bs.push_back(v);
        return Graph(nodes, es, bs);
    }

    std::optional<Conductivity> conductivity(const Graph& g) const {
        bool any = false, all = true;
        for (auto& [i, j, s] : edges) {
            if (s)
                any = true;
            else
                all = false;
        }
        if (!any) return std::nullopt;
        if (!all) throw DataError("network: either all edges carry sigma or none");
        Conductivity sigma;
        sigma.base = EdgeFunction::zero(g, EdgeKind::SymmetricNonneg);
        for (auto& [i, j, s] : edges) sigma.base.set(i, j, *s);
        return sigma;
    }

    Eigen::VectorXd boundary_values() const {
        Eigen::VectorXd v(boundary.size());
        for (size_t k = 0; k < boundary.size(); ++k) v(k) = boundary[k].second;
        return v;
    }

    std::optional<MeasurementMatrix> measurement(const Graph& g) const {
        if (measurements.empty()) return std::nullopt;
        MeasurementMatrix a = EdgeFunction::zero(g, EdgeKind::SymmetricNonneg);
        for (auto& [i, j, v] : measurements) {
            if (!g.has_edge(i, j)) throw DataError("network: measurement off the edge set");
            if (v < 0) throw DataError("network: measurement entries must be nonnegative");
            a.set(i, j, v);
        }
        return a;
    }
};

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct LineParser {
    std::istringstream in;
    int lineno;
    explicit LineParser(const std::string& line, int no) : in(line), lineno(no) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw DataError("line " + std::to_string(lineno) + ": " + what);
    }
    std::string word() {
        std::string w;
        if (!(in >> w)) fail("unexpected end of line");
        return w;
    }
    int integer() {
        int v;
        if (!(in >> v)) fail("expected integer");
        return v;
    }
    double real() {
        double v;
        if (!(in >> v)) fail("expected number");
        return v;
    }
    bool more() {
        in >> std::ws;
        return in.peek() != EOF;
    }
};

}  // namespace detail

inline NetworkFile parse_network(const std::string& text) {
    if (!text.empty() && text.front() == '{') {
        // JSON variant of the same schema
        nlohmann::json j = nlohmann::json::parse(text);
        NetworkFile nf;
        nf.nodes = j.at("nodes").get<int>();
        std::string mode = j.at("mode").get<std::string>();
        if (mode != "dirichlet" && mode != "neumann") throw DataError("network: bad mode");
        nf.mode = mode == "dirichlet" ? BoundaryMode::Dirichlet : BoundaryMode::Neumann;
        for (const auto& e : j.at("edges")) {
            std::optional<double> s;
            if (e.size() > 2) s = e[2].get<double>();
            nf.edges.emplace_back(e[0].get<int>() - 1, e[1].get<int>() - 1, s);
        }
        for (const auto& b : j.at("boundary"))
            nf.boundary.emplace_back(b[0].get<int>() - 1, b[1].get<double>());
        if (j.contains("measurements"))
            for (const auto& m : j.at("measurements"))
                nf.measurements.emplace_back(m[0].get<int>() - 1, m[1].get<int>() - 1,
                                             m[2].get<double>());
        return nf;
    }

    NetworkFile nf;
    bool saw_nodes = false;
    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        detail::LineParser p(line, lineno);
        if (!p.more()) continue;
        const std::string kw = p.word();
        if (kw == "nodes") {
            nf.nodes = p.integer();
            saw_nodes = true;
        } else if (kw == "mode") {
            const std::string m = p.word();
            if (m == "dirichlet")
                nf.mode = BoundaryMode::Dirichlet;
            else if (m == "neumann")
                nf.mode = BoundaryMode::Neumann;
            else
                p.fail("mode must be dirichlet or neumann");
        } else if (kw == "edge") {
            const int i = p.integer(), j = p.integer();
            std::optional<double> s;
            if (p.more()) s = p.real();
            if (s && (*s < 0 || !std::isfinite(*s)))
                p.fail("sigma must be finite and nonnegative");
            if (i == j) p.fail("self-loop");
            nf.edges.emplace_back(i - 1, j - 1, s);
        } else if (kw == "boundary") {
            const int i = p.integer();
            nf.boundary.emplace_back(i - 1, p.real());
        } else if (kw == "meas") {
            const int i = p.integer(), j = p.integer();
            nf.measurements.emplace_back(i - 1, j - 1, p.real());
        } else {
            p.fail("unknown directive '" + kw + "'");
        }
        if (p.more()) p.fail("trailing tokens");
    }
    if (!saw_nodes) throw DataError("network: missing 'nodes' line");
    for (auto& [i, j, s] : nf.edges)
        if (i < 0 || j < 0 || i >= nf.nodes || j >= nf.nodes)
            throw DataError("network: edge vertex out of range");
    for (auto& [v, val] : nf.boundary)
        if (v < 0 || v >= nf.nodes) throw DataError("network: boundary vertex out of range");
    return nf;
}

/// Canonical text form: sorted edges (i < j), sorted measurement entries,
/// boundary lines in file order.
inline std::string write_network(const NetworkFile& nf) {
    std::string out = "nodes " + std::to_string(nf.nodes) + "\n";
    out += nf.mode == BoundaryMode::Dirichlet ? "mode dirichlet\n" : "mode neumann\n";
    auto edges = nf.edges;
    for (auto& [i, j, s] : edges)
        if (i > j) std::swap(i, j);
    std::sort(edges.begin(), edges.end(),
              [](const auto& a, const auto& b) {
                  return std::pair{std::get<0>(a), std::get<1>(a)} <
                         std::pair{std::get<0>(b), std::get<1>(b)};
              });
    for (auto& [i, j, s] : edges) {
        out += "edge " + std::to_string(i + 1) + " " + std::to_string(j + 1);
        if (s) out += " " + detail::fmt_double(*s);
        out += "\n";
    }
    for (auto& [v, val] : nf.boundary)
        out += "boundary " + std::to_string(v + 1) + " " + detail::fmt_double(val) + "\n";
    auto meas = nf.measurements;
    for (auto& [i, j, v] : meas)
        if (i > j) std::swap(i, j);
    std::sort(meas.begin(), meas.end());
    for (auto& [i, j, v] : meas)
        out += "meas " + std::to_string(i + 1) + " " + std::to_string(j + 1) + " " +
               detail::fmt_double(v) + "\n";
    return out;
}

inline nlohmann::json network_to_json(const NetworkFile& nf) {
    nlohmann::json j;
    j["nodes"] = nf.nodes;
    j["mode"] = nf.mode == BoundaryMode::Dirichlet ? "dirichlet" : "neumann";
    j["edges"] = nlohmann::json::array();
    for (auto& [a, b, s] : nf.edges) {
        nlohmann::json e = {a + 1, b + 1};
        if (s) e.push_back(*s);
        j["edges"].push_back(e);
    }
    j["boundary"] = nlohmann::json::array();
    for (auto& [v, val] : nf.boundary) j["boundary"].push_back({v + 1, val});
    if (!nf.measurements.empty()) {
        j["measurements"] = nlohmann::json::array();
        for (auto& [a, b, v] : nf.measurements) j["measurements"].push_back({a + 1, b + 1, v});
    }
    return j;
}

/// Ciphertext wire format: `dim`, one `mag i j` per unit entry (i < j), one
/// `flux i f_i` per key row; a decoder additionally reads `key i1 ... in`.
inline std::string write_ciphertext(const Ciphertext& c, const std::vector<int>& keys) {
    const int dim = static_cast<int>(c.magnitude.rows());
    std::string out = "dim " + std::to_string(dim) + "\n";
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            if (c.magnitude(i, j) != 0)
                out += "mag " + std::to_string(i + 1) + " " + std::to_string(j + 1) + "\n";
    for (size_t k = 0; k < keys.size(); ++k)
        out += "flux " + std::to_string(keys[k] + 1) + " " + std::to_string(c.f(k)) + "\n";
    return out;
}

struct CiphertextFile {
    Ciphertext cipher;
    std::vector<int> keys;  // from `flux` rows, or explicit `key` line
};

inline CiphertextFile parse_ciphertext(const std::string& text) {
    std::istringstream stream(text);
    std::string line;
    int lineno = 0, dim = -1;
    std::vector<std::pair<int, int>> mags;
    std::vector<std::pair<int, long>> fluxes;
    std::vector<int> keys;
    while (std::getline(stream, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        detail::LineParser p(line, lineno);
        if (!p.more()) continue;
        const std::string kw = p.word();
        if (kw == "dim") {
            dim = p.integer();
        } else if (kw == "mag") {
            const int i = p.integer(), j = p.integer();
            mags.emplace_back(i - 1, j - 1);
        } else if (kw == "flux") {
            const int i = p.integer();
            fluxes.emplace_back(i - 1, p.integer());
        } else if (kw == "key") {
            while (p.more()) keys.push_back(p.integer() - 1);
        } else {
            p.fail("unknown directive '" + kw + "'");
        }
    }
    if (dim < 3 || dim % 2 == 0) throw DataError("ciphertext: bad or missing dim");
    CiphertextFile out;
    out.cipher.magnitude = Eigen::MatrixXi::Zero(dim, dim);
    for (auto [i, j] : mags) {
        if (i < 0 || j < 0 || i >= dim || j >= dim || i == j)
            throw DataError("ciphertext: mag entry out of range");
        out.cipher.magnitude(i, j) = out.cipher.magnitude(j, i) = 1;
    }
    if (!keys.empty()) {
        out.keys = keys;
    } else {
        for (auto [i, f] : fluxes) out.keys.push_back(i);
    }
    std::sort(out.keys.begin(), out.keys.end());
    out.cipher.f = Eigen::VectorXi::Zero(out.keys.size());
    for (auto [i, f] : fluxes) {
        auto it = std::find(out.keys.begin(), out.keys.end(), i);
        if (it == out.keys.end()) throw DataError("ciphertext: flux row outside key set");
        out.cipher.f(it - out.keys.begin()) = static_cast<int>(f);
    }
    return out;
}

/// Flow file for the encoder: `dim`, `key i1 ... in`, one `flow i j v` per
/// nonzero upper-triangle entry.
inline AdmissibleFlow parse_flow(const std::string& text) {
    std::istringstream stream(text);
    std::string line;
    int lineno = 0, dim = -1;
    std::vector<int> keys;
    std::vector<std::tuple<int, int, int>> entries;
    while (std::getline(stream, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        detail::LineParser p(line, lineno);
        if (!p.more()) continue;
        const std::string kw = p.word();
        if (kw == "dim")
            dim = p.integer();
        else if (kw == "key")
            while (p.more()) keys.push_back(p.integer() - 1);
        else if (kw == "flow") {
            const int i = p.integer(), j = p.integer(), v = p.integer();
            entries.emplace_back(i - 1, j - 1, v);
        } else
            p.fail("unknown directive '" + kw + "'");
    }
    if (dim < 3 || dim % 2 == 0) throw DataError("flow: bad or missing dim");
    Eigen::MatrixXi A = Eigen::MatrixXi::Zero(dim, dim);
    for (auto [i, j, v] : entries) {
        if (i < 0 || j < 0 || i >= dim || j >= dim)
            throw DataError("flow: entry out of range");
        A(i, j) = v;
        A(j, i) = -v;
    }
    return validate_admissible(A, keys);
}

inline std::string write_flow(const AdmissibleFlow& flow) {
    const int dim = static_cast<int>(flow.A.rows());
    std::string out = "dim " + std::to_string(dim) + "\nkey";
    for (int k : flow.keys) out += " " + std::to_string(k + 1);
    out += "\n";
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            if (flow.A(i, j) != 0)
                out += "flow " + std::to_string(i + 1) + " " + std::to_string(j + 1) + " " +
                       std::to_string(flow.A(i, j)) + "\n";
    return out;
}

}  // namespace cflow
