#include "graphbm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace graphbm {

namespace {

using nlohmann::ordered_json;

[[noreturn]] void parse_fail(const std::string& msg) { throw ParseError(msg); }

double require_number(const ordered_json& j, const char* what)
{
    if (!j.is_number()) parse_fail(std::string(what) + " must be a number");
    return j.get<double>();
}

std::string require_string(const ordered_json& j, const char* what)
{
    if (!j.is_string()) parse_fail(std::string(what) + " must be a string");
    return j.get<std::string>();
}

// Shortest representation that parses back to the same double.
std::string format_double(double v)
{
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

} // namespace

GraphBundle parse_graph_json(const std::string& text)
{
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        parse_fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) parse_fail("top level must be an object");

    std::vector<std::string> vertices;
    for (const auto& v : j.value("vertices", ordered_json::array()))
        vertices.push_back(require_string(v, "vertex name"));

    std::vector<InternalEdgeSpec> internal;
    for (const auto& e : j.value("internal", ordered_json::array())) {
        InternalEdgeSpec spec;
        spec.name = require_string(e.at("id"), "internal edge id");
        spec.from = require_string(e.at("from"), "internal edge from");
        spec.to = require_string(e.at("to"), "internal edge to");
        spec.length = require_number(e.at("length"), "internal edge length");
        internal.push_back(std::move(spec));
    }
    std::vector<ExternalEdgeSpec> external;
    for (const auto& e : j.value("external", ordered_json::array())) {
        ExternalEdgeSpec spec;
        spec.name = require_string(e.at("id"), "external edge id");
        spec.at = require_string(e.at("at"), "external edge anchor");
        external.push_back(std::move(spec));
    }

    GraphBundle bundle;
    bundle.graph = MetricGraph::build(std::move(vertices), internal, external);
    const MetricGraph& g = bundle.graph;

    std::vector<VertexData> raw(g.vertex_count());
    std::vector<bool> seen(g.vertex_count(), false);
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        raw[v].b.assign(g.incident(v).size(), 0.0);

    for (const auto& w : j.value("wentzell", ordered_json::array())) {
        const std::string vname = require_string(w.at("vertex"), "wentzell vertex");
        const auto vid = g.find_vertex(vname);
        if (!vid) parse_fail("wentzell entry for unknown vertex: " + vname);
        if (seen[*vid]) parse_fail("duplicate wentzell entry for vertex: " + vname);
        seen[*vid] = true;
        VertexData& d = raw[*vid];
        d.a = require_number(w.value("a", ordered_json(0.0)), "a");
        d.c = require_number(w.value("c", ordered_json(0.0)), "c");
        const auto& inc = g.incident(*vid);
        if (w.contains("b")) {
            if (!w.at("b").is_object()) parse_fail("b must be an object");
            for (const auto& [ename, bval] : w.at("b").items()) {
                const auto eid = g.find_edge(ename);
                if (!eid) parse_fail("b entry for unknown edge: " + ename);
                // A tadpole carries two incidences of the same edge; the JSON
                // value is then the pair [start end, terminal end].
                std::vector<double> vals;
                if (bval.is_array()) {
                    for (const auto& x : bval)
                        vals.push_back(require_number(x, "b value"));
                } else {
                    vals.push_back(require_number(bval, "b value"));
                }
                std::size_t used = 0;
                for (std::size_t k = 0; k < inc.size(); ++k) {
                    if (inc[k].edge != *eid) continue;
                    if (used >= vals.size())
                        parse_fail("edge " + ename + " needs " +
                                   std::to_string(used + 1) + " b values at vertex " +
                                   vname);
                    d.b[k] = vals[used++];
                }
                if (used == 0)
                    parse_fail("edge " + ename + " is not incident with vertex " + vname);
                if (used != vals.size())
                    parse_fail("too many b values for edge " + ename);
            }
        }
    }
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        if (!seen[v])
            parse_fail("missing wentzell entry for vertex: " + g.vertex_name(v));

    bundle.wentzell = WentzellData::validate_and_normalize(g, std::move(raw));
    return bundle;
}

GraphBundle load_graph_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) parse_fail("cannot open graph file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_graph_json(ss.str());
}

std::string serialize_graph(const MetricGraph& g, const WentzellData& data)
{
    std::ostringstream out;
    out << "{\n  \"vertices\": [";
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        out << (v ? ", " : "") << '"' << g.vertex_name(v) << '"';
    out << "],\n  \"external\": [";
    for (EdgeId e = 0; e < g.external_count(); ++e) {
        out << (e ? "," : "") << "\n    {\"id\": \"" << g.edge_name(e) << "\", \"at\": \""
            << g.vertex_name(g.initial_vertex(e)) << "\"}";
    }
    out << (g.external_count() ? "\n  " : "") << "],\n  \"internal\": [";
    for (EdgeId e = static_cast<EdgeId>(g.external_count()); e < g.edge_count(); ++e) {
        out << (e > g.external_count() ? "," : "") << "\n    {\"id\": \""
            << g.edge_name(e) << "\", \"from\": \"" << g.vertex_name(g.initial_vertex(e))
            << "\", \"to\": \"" << g.vertex_name(g.terminal_vertex(e))
            << "\", \"length\": " << format_double(g.length(e)) << "}";
    }
    out << (g.internal_count() ? "\n  " : "") << "],\n  \"wentzell\": [";
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        const VertexData& d = data.at(v);
        out << (v ? "," : "") << "\n    {\"vertex\": \"" << g.vertex_name(v)
            << "\", \"a\": " << format_double(d.a) << ", \"c\": " << format_double(d.c)
            << ", \"b\": {";
        const auto& inc = g.incident(v);
        bool first = true;
        for (std::size_t k = 0; k < inc.size(); ++k) {
            const EdgeId e = inc[k].edge;
            if (k > 0 && inc[k - 1].edge == e) continue; // tadpole pair handled below
            out << (first ? "" : ", ") << '"' << g.edge_name(e) << "\": ";
            first = false;
            if (k + 1 < inc.size() && inc[k + 1].edge == e)
                out << '[' << format_double(d.b[k]) << ", " << format_double(d.b[k + 1])
                    << ']';
            else
                out << format_double(d.b[k]);
        }
        out << "}}";
    }
    out << (g.vertex_count() ? "\n  " : "") << "]\n}\n";
    return out.str();
}

void save_graph_file(const std::string& path, const MetricGraph& g,
                     const WentzellData& data)
{
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write graph file: " + path);
    out << serialize_graph(g, data);
}

std::uint64_t graph_hash(const MetricGraph& g, const WentzellData& data)
{
    const std::string canon = serialize_graph(g, data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = s.find(sep, pos);
        out.push_back(s.substr(pos, next - pos));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

double to_double(const std::string& s, const char* what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        parse_fail(std::string("bad number for ") + what + ": " + s);
    }
}

EdgeFunction parse_f_csv(const MetricGraph& g, const std::string& path)
{
    std::ifstream in(path);
    if (!in) parse_fail("cannot open f samples file: " + path);
    std::map<EdgeId, std::vector<std::pair<double, double>>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto cols = split(line, ',');
        if (cols.size() != 3) parse_fail("expected edge,x,value rows: " + line);
        if (cols[0] == "edge") continue; // header
        const auto eid = g.find_edge(cols[0]);
        if (!eid) parse_fail("unknown edge in samples: " + cols[0]);
        rows[*eid].push_back({to_double(cols[1], "x"), to_double(cols[2], "value")});
    }
    std::vector<EdgeProfile> profiles(g.edge_count());
    for (auto& [eid, pts] : rows) {
        std::sort(pts.begin(), pts.end());
        if (pts.size() < 2) parse_fail("need at least two samples per edge");
        const double step = pts[1].first - pts[0].first;
        if (!(step > 0)) parse_fail("sample grid must be strictly increasing");
        std::vector<double> values;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (std::abs(pts[i].first - static_cast<double>(i) * step) > 1e-9 * (1 + step))
                parse_fail("samples must sit on a uniform grid from x = 0");
            values.push_back(pts[i].second);
        }
        profiles[eid] = EdgeProfile::samples(step, std::move(values));
    }
    return EdgeFunction(g, std::move(profiles));
}

} // namespace

EdgeFunction parse_f_spec(const MetricGraph& g, const std::string& spec)
{
    const auto parts = split(spec, ':');
    const std::string& kind = parts[0];
    if (kind == "zero") return EdgeFunction::zero(g);
    if (kind == "one") return EdgeFunction(g, EdgeProfile::constant(1.0));
    if (kind == "const") {
        if (parts.size() != 2) parse_fail("const:<value>");
        return EdgeFunction(g, EdgeProfile::constant(to_double(parts[1], "const")));
    }
    if (kind == "exp") {
        if (parts.size() != 3) parse_fail("exp:<amp>:<rate>");
        return EdgeFunction(g, EdgeProfile::exp_decay(to_double(parts[1], "amp"),
                                                      to_double(parts[2], "rate")));
    }
    if (kind == "sin") {
        if (parts.size() != 3 && parts.size() != 4) parse_fail("sin:<amp>:<freq>[:<phase>]");
        return EdgeFunction(
            g, EdgeProfile::sine(to_double(parts[1], "amp"), to_double(parts[2], "freq"),
                                 parts.size() == 4 ? to_double(parts[3], "phase") : 0.0));
    }
    if (kind == "indicator") {
        if (parts.size() != 4) parse_fail("indicator:<edge>:<x0>:<x1>");
        const auto eid = g.find_edge(parts[1]);
        if (!eid) parse_fail("unknown edge: " + parts[1]);
        EdgeFunction f = EdgeFunction::zero(g);
        f.profile(*eid) = EdgeProfile::indicator(to_double(parts[2], "x0"),
                                                 to_double(parts[3], "x1"));
        return f;
    }
    if (kind == "csv") {
        if (parts.size() != 2) parse_fail("csv:<path>");
        return parse_f_csv(g, parts[1]);
    }
    parse_fail("unknown f spec: " + spec);
}

GraphPoint parse_point(const MetricGraph& g, const std::string& spec)
{
    const auto sep = spec.rfind(':');
    if (sep != std::string::npos) {
        const std::string ename = spec.substr(0, sep);
        const auto eid = g.find_edge(ename);
        if (eid) {
            const double x = to_double(spec.substr(sep + 1), "x");
            return g.canonical(GraphPoint::interior(*eid, x));
        }
    }
    const auto vid = g.find_vertex(spec);
    if (!vid) parse_fail("unknown point spec: " + spec);
    return GraphPoint::at_vertex(*vid);
}

std::string format_point(const MetricGraph& g, const GraphPoint& p)
{
    switch (p.kind) {
    case GraphPoint::Kind::Cemetery:
        return "<cemetery>";
    case GraphPoint::Kind::Vertex:
        return g.vertex_name(p.vertex);
    case GraphPoint::Kind::Interior: {
        std::ostringstream out;
        out << g.edge_name(p.edge) << ':' << format_double(p.x);
        return out.str();
    }
    }
    return "?";
}

} // namespace graphbm
