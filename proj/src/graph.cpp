#include "graphbm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace graphbm {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw InvariantError(msg); }

} // namespace

MetricGraph MetricGraph::build(std::vector<std::string> vertices,
                               std::vector<InternalEdgeSpec> internal,
                               std::vector<ExternalEdgeSpec> external)
{
    MetricGraph g;
    g.vertex_names_ = std::move(vertices);

    if (g.vertex_names_.empty()) fail("graph has no vertices");
    {
        std::set<std::string> seen;
        for (const auto& name : g.vertex_names_)
            if (!seen.insert(name).second) fail("duplicate vertex id: " + name);
    }

    auto vertex_index = [&](const std::string& name) -> VertexId {
        for (std::size_t i = 0; i < g.vertex_names_.size(); ++i)
            if (g.vertex_names_[i] == name) return static_cast<VertexId>(i);
        fail("edge references undeclared vertex: " + name);
    };

    std::set<std::string> edge_seen;
    auto check_edge_name = [&](const std::string& name) {
        if (name.empty()) fail("empty edge id");
        if (!edge_seen.insert(name).second) fail("duplicate edge id: " + name);
    };

    g.n_external_ = external.size();
    for (const auto& spec : external) {
        check_edge_name(spec.name);
        g.edge_names_.push_back(spec.name);
        g.lengths_.push_back(kInfinity);
        g.initial_.push_back(vertex_index(spec.at));
        g.terminal_.push_back(kNoVertex);
    }
    for (const auto& spec : internal) {
        check_edge_name(spec.name);
        if (!(spec.length > 0.0) || !std::isfinite(spec.length))
            fail("internal edge " + spec.name + " has nonpositive length");
        g.edge_names_.push_back(spec.name);
        g.lengths_.push_back(spec.length);
        g.initial_.push_back(vertex_index(spec.from));
        g.terminal_.push_back(vertex_index(spec.to));
    }

    g.incident_.resize(g.vertex_names_.size());
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        g.incident_[g.initial_[e]].push_back({e, EdgeEnd::Start});
        if (g.is_internal(e)) g.incident_[g.terminal_[e]].push_back({e, EdgeEnd::End});
    }
    for (auto& list : g.incident_) {
        std::sort(list.begin(), list.end(), [](const Incidence& a, const Incidence& b) {
            if (a.edge != b.edge) return a.edge < b.edge;
            return a.end < b.end;
        });
    }
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        if (g.incident_[v].empty())
            fail("isolated vertex: " + g.vertex_names_[v]);

    return g;
}

bool MetricGraph::has_tadpole() const
{
    for (EdgeId e = static_cast<EdgeId>(n_external_); e < edge_count(); ++e)
        if (initial_[e] == terminal_[e]) return true;
    return false;
}

std::optional<VertexId> MetricGraph::find_vertex(const std::string& name) const
{
    for (std::size_t i = 0; i < vertex_names_.size(); ++i)
        if (vertex_names_[i] == name) return static_cast<VertexId>(i);
    return std::nullopt;
}

std::optional<EdgeId> MetricGraph::find_edge(const std::string& name) const
{
    for (std::size_t i = 0; i < edge_names_.size(); ++i)
        if (edge_names_[i] == name) return static_cast<EdgeId>(i);
    return std::nullopt;
}

Incidence MetricGraph::incidence_of_slot(std::size_t slot) const
{
    const std::size_t ni = internal_count();
    if (slot < n_external_) return {static_cast<EdgeId>(slot), EdgeEnd::Start};
    if (slot < n_external_ + ni)
        return {static_cast<EdgeId>(slot), EdgeEnd::Start}; // internal initial end
    return {static_cast<EdgeId>(slot - ni), EdgeEnd::End};
}

GraphPoint MetricGraph::canonical(const GraphPoint& p) const
{
    switch (p.kind) {
    case GraphPoint::Kind::Cemetery:
    case GraphPoint::Kind::Vertex:
        return p;
    case GraphPoint::Kind::Interior:
        break;
    }
    if (p.edge >= edge_count()) fail("graph point on unknown edge");
    if (p.x < 0.0) fail("negative local coordinate");
    if (p.x == 0.0) return GraphPoint::at_vertex(initial_[p.edge]);
    if (is_internal(p.edge)) {
        const double len = lengths_[p.edge];
        if (p.x > len) fail("local coordinate beyond edge length");
        if (p.x == len) return GraphPoint::at_vertex(terminal_[p.edge]);
    }
    return p;
}

double MetricGraph::distance(const GraphPoint& a_raw, const GraphPoint& b_raw) const
{
    if (a_raw.is_cemetery() || b_raw.is_cemetery())
        fail("distance undefined for cemetery points");
    const GraphPoint a = canonical(a_raw);
    const GraphPoint b = canonical(b_raw);

    // Dijkstra over vertices plus up to two query nodes. External edges only
    // connect a query point to its anchor.
    const std::size_t nv = vertex_count();
    const std::size_t n_nodes = nv + 2;
    const std::size_t qa = nv, qb = nv + 1;

    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n_nodes);
    auto add = [&](std::size_t u, std::size_t v, double w) {
        adj[u].push_back({v, w});
        adj[v].push_back({u, w});
    };
    for (EdgeId e = static_cast<EdgeId>(n_external_); e < edge_count(); ++e)
        add(initial_[e], terminal_[e], lengths_[e]);

    auto attach = [&](const GraphPoint& p, std::size_t node) {
        if (p.is_vertex()) {
            add(node, p.vertex, 0.0);
            return;
        }
        add(node, initial_[p.edge], p.x);
        if (is_internal(p.edge)) add(node, terminal_[p.edge], lengths_[p.edge] - p.x);
    };
    attach(a, qa);
    attach(b, qb);
    if (a.is_interior() && b.is_interior() && a.edge == b.edge)
        add(qa, qb, std::abs(a.x - b.x));

    std::vector<double> dist(n_nodes, kInfinity);
    dist[qa] = 0.0;
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, qa});
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        if (u == qb) break;
        for (auto [v, w] : adj[u]) {
            if (d + w < dist[v]) {
                dist[v] = d + w;
                heap.push({dist[v], v});
            }
        }
    }
    return dist[qb];
}

bool ShadowMap::is_connected_vertex(VertexId v) const
{
    return std::find(connected_vertices.begin(), connected_vertices.end(), v)
           != connected_vertices.end();
}

std::optional<std::size_t> ShadowMap::pair_of_component_edge(int comp, EdgeId e) const
{
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (comp == 1 && pairs[k].in_g1 == e) return k;
        if (comp == 2 && pairs[k].in_g2 == e) return k;
    }
    return std::nullopt;
}

std::pair<MetricGraph, ShadowMap> join_graphs(const MetricGraph& g1,
                                              const MetricGraph& g2,
                                              std::span<const JoinPairSpec> pairs)
{
    if (pairs.size() > std::min(g1.external_count(), g2.external_count()))
        fail("more pairs than external edges available");

    std::set<EdgeId> used1, used2;
    for (const auto& p : pairs) {
        if (p.in_g1 >= g1.edge_count() || !g1.is_external(p.in_g1))
            fail("pairing a non-external edge of the first graph");
        if (p.in_g2 >= g2.edge_count() || !g2.is_external(p.in_g2))
            fail("pairing a non-external edge of the second graph");
        if (!used1.insert(p.in_g1).second)
            fail("edge " + g1.edge_name(p.in_g1) + " paired twice");
        if (!used2.insert(p.in_g2).second)
            fail("edge " + g2.edge_name(p.in_g2) + " paired twice");
        if (!(p.length > 0.0)) fail("nonpositive connecting length");
        if (p.orientation != 1 && p.orientation != -1) fail("orientation must be +1 or -1");
    }

    std::vector<std::string> vertices;
    for (VertexId v = 0; v < g1.vertex_count(); ++v) vertices.push_back(g1.vertex_name(v));
    for (VertexId v = 0; v < g2.vertex_count(); ++v) {
        if (g1.find_vertex(g2.vertex_name(v)))
            fail("vertex name collision between graphs: " + g2.vertex_name(v));
        vertices.push_back(g2.vertex_name(v));
    }
    const VertexId off2 = static_cast<VertexId>(g1.vertex_count());

    auto edge_name_of = [&](const MetricGraph& g, EdgeId e, int comp) {
        std::string name = g.edge_name(e);
        // Disambiguate only on collision so typical joins keep their names.
        const MetricGraph& other = comp == 1 ? g2 : g1;
        if (other.find_edge(name)) name += comp == 1 ? "#1" : "#2";
        return name;
    };

    std::vector<ExternalEdgeSpec> external;
    std::vector<InternalEdgeSpec> internal;
    ShadowMap sm;
    sm.vertex_from_g1.resize(g1.vertex_count());
    sm.vertex_from_g2.resize(g2.vertex_count());
    for (VertexId v = 0; v < g1.vertex_count(); ++v) sm.vertex_from_g1[v] = v;
    for (VertexId v = 0; v < g2.vertex_count(); ++v) sm.vertex_from_g2[v] = off2 + v;
    sm.edge_from_g1.assign(g1.edge_count(), kNoEdge);
    sm.edge_from_g2.assign(g2.edge_count(), kNoEdge);

    std::vector<std::pair<int, EdgeId>> external_src, internal_src;
    for (EdgeId e = 0; e < g1.external_count(); ++e) {
        if (used1.count(e)) continue;
        external.push_back({edge_name_of(g1, e, 1), g1.vertex_name(g1.initial_vertex(e))});
        external_src.push_back({1, e});
    }
    for (EdgeId e = 0; e < g2.external_count(); ++e) {
        if (used2.count(e)) continue;
        external.push_back({edge_name_of(g2, e, 2), g2.vertex_name(g2.initial_vertex(e))});
        external_src.push_back({2, e});
    }
    for (EdgeId e = static_cast<EdgeId>(g1.external_count()); e < g1.edge_count(); ++e) {
        internal.push_back({edge_name_of(g1, e, 1), g1.vertex_name(g1.initial_vertex(e)),
                            g1.vertex_name(g1.terminal_vertex(e)), g1.length(e)});
        internal_src.push_back({1, e});
    }
    for (EdgeId e = static_cast<EdgeId>(g2.external_count()); e < g2.edge_count(); ++e) {
        internal.push_back({edge_name_of(g2, e, 2), g2.vertex_name(g2.initial_vertex(e)),
                            g2.vertex_name(g2.terminal_vertex(e)), g2.length(e)});
        internal_src.push_back({2, e});
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& p = pairs[k];
        std::string name = p.name.empty()
                               ? "i(" + g1.edge_name(p.in_g1) + "," + g2.edge_name(p.in_g2) + ")"
                               : p.name;
        const std::string v1 = g1.vertex_name(g1.initial_vertex(p.in_g1));
        const std::string v2 = g2.vertex_name(g2.initial_vertex(p.in_g2));
        if (p.orientation == 1)
            internal.push_back({name, v1, v2, p.length});
        else
            internal.push_back({name, v2, v1, p.length});
        internal_src.push_back({0, static_cast<EdgeId>(k)});
    }

    MetricGraph joined = MetricGraph::build(std::move(vertices), internal, external);

    for (std::size_t j = 0; j < external_src.size(); ++j) {
        auto [comp, e] = external_src[j];
        (comp == 1 ? sm.edge_from_g1 : sm.edge_from_g2)[e] = static_cast<EdgeId>(j);
    }
    for (std::size_t j = 0; j < internal_src.size(); ++j) {
        const EdgeId id = static_cast<EdgeId>(joined.external_count() + j);
        auto [comp, e] = internal_src[j];
        if (comp == 1) sm.edge_from_g1[e] = id;
        else if (comp == 2) sm.edge_from_g2[e] = id;
        else {
            const auto& p = pairs[e];
            sm.pairs.push_back({p.in_g1, p.in_g2, id, p.length, p.orientation});
        }
    }

    std::set<VertexId> vc;
    for (const auto& jp : sm.pairs) {
        const VertexId a = joined.initial_vertex(jp.new_edge);
        const VertexId b = joined.terminal_vertex(jp.new_edge);
        vc.insert(a);
        vc.insert(b);
        // Shadow of the g1-side vertex sits on the partner's edge in g2 and
        // vice versa.
        const VertexId v_in_1 = sm.vertex_from_g1[g1.initial_vertex(jp.in_g1)];
        const VertexId v_in_2 = sm.vertex_from_g2[g2.initial_vertex(jp.in_g2)];
        sm.shadows.push_back({2, jp.in_g2, jp.length, v_in_1});
        sm.shadows.push_back({1, jp.in_g1, jp.length, v_in_2});
    }
    sm.connected_vertices.assign(vc.begin(), vc.end());

    return {std::move(joined), std::move(sm)};
}

TadpoleResult eliminate_tadpole_graph(const MetricGraph& g, EdgeId tadpole)
{
    if (tadpole >= g.edge_count() || !g.is_tadpole(tadpole))
        fail("edge is not a tadpole");

    const VertexId v = g.initial_vertex(tadpole);
    const double half = g.length(tadpole) / 2.0;

    std::vector<std::string> vertices;
    for (VertexId w = 0; w < g.vertex_count(); ++w) vertices.push_back(g.vertex_name(w));
    std::string aux = g.vertex_name(v) + "*";
    while (g.find_vertex(aux)) aux += "*";
    vertices.push_back(aux);

    std::vector<ExternalEdgeSpec> external;
    std::vector<InternalEdgeSpec> internal;
    TadpoleResult out;
    out.edge_map.assign(g.edge_count(), kNoEdge);

    std::vector<EdgeId> external_src, internal_src;
    for (EdgeId e = 0; e < g.external_count(); ++e) {
        external.push_back({g.edge_name(e), g.vertex_name(g.initial_vertex(e))});
        external_src.push_back(e);
    }
    for (EdgeId e = static_cast<EdgeId>(g.external_count()); e < g.edge_count(); ++e) {
        if (e == tadpole) continue;
        internal.push_back({g.edge_name(e), g.vertex_name(g.initial_vertex(e)),
                            g.vertex_name(g.terminal_vertex(e)), g.length(e)});
        internal_src.push_back(e);
    }
    internal.push_back({g.edge_name(tadpole) + ".a", g.vertex_name(v), aux, half});
    internal.push_back({g.edge_name(tadpole) + ".b", g.vertex_name(v), aux, half});

    out.graph = MetricGraph::build(std::move(vertices), internal, external);
    out.auxiliary_vertex = static_cast<VertexId>(g.vertex_count());
    for (std::size_t j = 0; j < external_src.size(); ++j)
        out.edge_map[external_src[j]] = static_cast<EdgeId>(j);
    for (std::size_t j = 0; j < internal_src.size(); ++j)
        out.edge_map[internal_src[j]] = static_cast<EdgeId>(out.graph.external_count() + j);
    out.half_a = static_cast<EdgeId>(out.graph.edge_count() - 2);
    out.half_b = static_cast<EdgeId>(out.graph.edge_count() - 1);
    return out;
}

} // namespace graphbm
