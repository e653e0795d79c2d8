#include <doctest.h>

#include <map>
#include <queue>
#include <random>

#include "helpers.hpp"

using namespace graphbm;

TEST_CASE("build_graph accepts the smallest graphs")
{
    const MetricGraph star = MetricGraph::build(
        {"v"}, {}, {{"e1", "v"}, {"e2", "v"}, {"e3", "v"}});
    CHECK(star.vertex_count() == 1);
    CHECK(star.external_count() == 3);
    CHECK(star.incident(0).size() == 3);

    const MetricGraph interval =
        MetricGraph::build({"u", "w"}, {{"i", "u", "w", 1.0}}, {});
    CHECK(interval.internal_count() == 1);
    CHECK(interval.external_count() == 0);
    CHECK(interval.trace_size() == 2);
}

TEST_CASE("build_graph rejects invalid specs")
{
    CHECK_THROWS_AS(MetricGraph::build({"v"}, {{"i", "v", "v", 0.0}}, {}),
                    InvariantError);
    CHECK_THROWS_AS(MetricGraph::build({"v"}, {{"i", "v", "nope", 1.0}}, {}),
                    InvariantError);
    CHECK_THROWS_AS(
        MetricGraph::build({"v"}, {}, {{"e", "v"}, {"e", "v"}}), InvariantError);
    CHECK_THROWS_AS(MetricGraph::build({"v", "v"}, {}, {{"e", "v"}}), InvariantError);
    // Isolated vertex.
    CHECK_THROWS_AS(MetricGraph::build({"v", "w"}, {}, {{"e", "v"}}), InvariantError);
}

TEST_CASE("canonical snaps endpoints to vertices")
{
    const MetricGraph g = MetricGraph::build({"u", "w"}, {{"i", "u", "w", 2.0}}, {});
    CHECK(g.canonical(GraphPoint::interior(0, 0.0)).is_vertex());
    CHECK(g.canonical(GraphPoint::interior(0, 2.0)).vertex == 1);
    CHECK(g.canonical(GraphPoint::interior(0, 0.7)).is_interior());
    CHECK_THROWS_AS(g.canonical(GraphPoint::interior(0, 2.5)), InvariantError);
}

TEST_CASE("distance on one edge and across a star")
{
    const MetricGraph star = MetricGraph::build(
        {"v"}, {}, {{"e1", "v"}, {"e2", "v"}, {"e3", "v"}});
    const GraphPoint a = GraphPoint::interior(0, 0.2);
    const GraphPoint b = GraphPoint::interior(0, 0.7);
    CHECK(star.distance(a, b) == doctest::Approx(0.5));
    CHECK(star.distance(a, a) == doctest::Approx(0.0));
    CHECK(star.distance(GraphPoint::interior(0, 1.0), GraphPoint::interior(1, 2.0))
          == doctest::Approx(3.0));
    CHECK_THROWS_AS(star.distance(a, GraphPoint::cemetery()), InvariantError);
}

namespace {

// Independent distance oracle: Dijkstra over an edge-subdivided lattice.
double subdivision_distance(const MetricGraph& g, const GraphPoint& a,
                            const GraphPoint& b, int segments_per_unit)
{
    struct Node {
        std::vector<std::pair<int, double>> adj;
    };
    std::vector<Node> nodes(g.vertex_count());
    auto add_edge = [&](int u, int v, double w) {
        nodes[u].adj.push_back({v, w});
        nodes[v].adj.push_back({u, w});
    };
    auto add_node = [&]() {
        nodes.push_back({});
        return static_cast<int>(nodes.size() - 1);
    };

    // Subdivide internal edges; remember the chains to splice query points.
    std::map<EdgeId, std::vector<std::pair<double, int>>> chain;
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        if (!g.is_internal(e)) continue;
        const double len = g.length(e);
        const int n = std::max(1, static_cast<int>(len * segments_per_unit));
        int prev = static_cast<int>(g.initial_vertex(e));
        chain[e].push_back({0.0, prev});
        for (int i = 1; i < n; ++i) {
            const int id = add_node();
            const double x = len * i / n;
            add_edge(prev, id, x - chain[e].back().first);
            chain[e].push_back({x, id});
            prev = id;
        }
        add_edge(prev, static_cast<int>(g.terminal_vertex(e)),
                 len - chain[e].back().first);
        chain[e].push_back({len, static_cast<int>(g.terminal_vertex(e))});
    }

    auto splice = [&](const GraphPoint& p) {
        if (p.is_vertex()) return static_cast<int>(p.vertex);
        const int id = add_node();
        if (g.is_external(p.edge)) {
            add_edge(id, static_cast<int>(g.initial_vertex(p.edge)), p.x);
            return id;
        }
        const auto& ch = chain[p.edge];
        for (std::size_t i = 0; i + 1 < ch.size(); ++i) {
            if (p.x >= ch[i].first && p.x <= ch[i + 1].first) {
                add_edge(id, ch[i].second, p.x - ch[i].first);
                add_edge(id, ch[i + 1].second, ch[i + 1].first - p.x);
                break;
            }
        }
        return id;
    };
    const int sa = splice(g.canonical(a));
    const int sb = splice(g.canonical(b));
    if (g.canonical(a).is_interior() && g.canonical(b).is_interior()
        && g.canonical(a).edge == g.canonical(b).edge)
        add_edge(sa, sb, std::abs(g.canonical(a).x - g.canonical(b).x));

    std::vector<double> dist(nodes.size(), kInfinity);
    dist[sa] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, sa});
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u]) continue;
        for (auto [v, w] : nodes[u].adj)
            if (d + w < dist[v]) {
                dist[v] = d + w;
                heap.push({dist[v], v});
            }
    }
    return dist[sb];
}

MetricGraph two_loop_graph()
{
    return MetricGraph::build({"a", "b", "c"},
                              {{"i1", "a", "b", 1.0},
                               {"i2", "b", "c", 0.5},
                               {"i3", "a", "c", 2.0},
                               {"i4", "b", "c", 1.5}},
                              {{"e1", "a"}, {"e2", "c"}});
}

} // namespace

TEST_CASE("distance agrees with a subdivision oracle and is a metric")
{
    const MetricGraph g = two_loop_graph();
    std::mt19937 gen(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    auto random_point = [&]() {
        const EdgeId e = static_cast<EdgeId>(gen() % g.edge_count());
        const double len = g.is_internal(e) ? g.length(e) : 3.0;
        return g.canonical(GraphPoint::interior(e, uni(gen) * len));
    };
    for (int it = 0; it < 40; ++it) {
        const GraphPoint p = random_point(), q = random_point(), r = random_point();
        const double dpq = g.distance(p, q);
        CHECK(dpq == doctest::Approx(g.distance(q, p)));
        CHECK(dpq <= g.distance(p, r) + g.distance(r, q) + 1e-12);
        CHECK(dpq == doctest::Approx(subdivision_distance(g, p, q, 64)).epsilon(1e-9));
    }
    const MetricGraph h = MetricGraph::build({"a", "b"}, {}, {{"e1", "a"}, {"e2", "b"}});
    CHECK(h.distance(GraphPoint::interior(0, 1.0), GraphPoint::interior(1, 1.0))
          == kInfinity);
}

TEST_CASE("join of two one-edge stars is an interval")
{
    const MetricGraph s1 = MetricGraph::build({"u"}, {}, {{"ea", "u"}});
    const MetricGraph s2 = MetricGraph::build({"w"}, {}, {{"eb", "w"}});
    const std::vector<JoinPairSpec> pairs{{0, 0, 1.0, 1, "i"}};
    const auto [g, sm] = join_graphs(s1, s2, pairs);
    CHECK(g.vertex_count() == 2);
    CHECK(g.external_count() == 0);
    CHECK(g.internal_count() == 1);
    CHECK(g.length(0) == doctest::Approx(1.0));
    CHECK(g.initial_vertex(0) == sm.vertex_from_g1[0]);
    CHECK(g.terminal_vertex(0) == sm.vertex_from_g2[0]);
    CHECK(sm.connected_vertices.size() == 2);
    REQUIRE(sm.shadows.size() == 2);
    for (const auto& sh : sm.shadows) {
        CHECK(sh.x == doctest::Approx(1.0));
        if (sh.component == 2) CHECK(sh.connected == sm.vertex_from_g1[0]);
        if (sh.component == 1) CHECK(sh.connected == sm.vertex_from_g2[0]);
    }
}

TEST_CASE("join reproduces the figure-scale counts")
{
    // Components sized so that joining 3 pairs yields 5 vertices, 9 external
    // and 11 internal edges.
    std::vector<ExternalEdgeSpec> ext1, ext2;
    for (int i = 0; i < 7; ++i)
        ext1.push_back({"a" + std::to_string(i),
                        i % 3 == 0 ? "v1" : (i % 3 == 1 ? "v2" : "v3")});
    for (int i = 0; i < 8; ++i)
        ext2.push_back({"b" + std::to_string(i), i % 2 ? "w1" : "w2"});
    const MetricGraph g1 = MetricGraph::build(
        {"v1", "v2", "v3"},
        {{"i1", "v1", "v2", 1.0}, {"i2", "v2", "v3", 1.0}, {"i3", "v1", "v3", 2.0},
         {"i4", "v2", "v3", 1.5}},
        ext1);
    const MetricGraph g2 = MetricGraph::build(
        {"w1", "w2"},
        {{"j1", "w1", "w2", 1.0}, {"j2", "w1", "w2", 2.0}, {"j3", "w1", "w2", 0.5},
         {"j4", "w1", "w2", 1.0}},
        ext2);
    const std::vector<JoinPairSpec> pairs{
        {*g1.find_edge("a0"), *g2.find_edge("b0"), 1.0, 1, ""},
        {*g1.find_edge("a1"), *g2.find_edge("b1"), std::sqrt(2.0), 1, ""},
        {*g1.find_edge("a2"), *g2.find_edge("b2"), 1.0, -1, ""},
    };
    const auto [g, sm] = join_graphs(g1, g2, pairs);
    CHECK(g.vertex_count() == 5);
    CHECK(g.external_count() == 9);
    CHECK(g.internal_count() == 11);

    // sigma = -1 puts the g2 anchor first.
    const EdgeId rev = sm.pairs[2].new_edge;
    CHECK(g.initial_vertex(rev)
          == sm.vertex_from_g2[g2.initial_vertex(*g2.find_edge("b2"))]);
    CHECK(g.terminal_vertex(rev)
          == sm.vertex_from_g1[g1.initial_vertex(*g1.find_edge("a2"))]);

    // Round trip: surviving edges keep their names, lengths and endpoints.
    for (const auto& p : sm.pairs)
        CHECK(g.length(p.new_edge) == doctest::Approx(p.length));
    std::size_t surviving1 = 0;
    for (EdgeId e = 0; e < g1.edge_count(); ++e)
        if (sm.edge_from_g1[e] != kNoEdge) {
            ++surviving1;
            CHECK(g.edge_name(sm.edge_from_g1[e]) == g1.edge_name(e));
            if (g1.is_internal(e))
                CHECK(g.length(sm.edge_from_g1[e]) == doctest::Approx(g1.length(e)));
        }
    CHECK(surviving1 == g1.edge_count() - pairs.size());
}

TEST_CASE("join rejects bad pairings")
{
    const MetricGraph s1 = MetricGraph::build({"u"}, {}, {{"ea", "u"}, {"eb", "u"}});
    const MetricGraph s2 =
        MetricGraph::build({"w"}, {{"j", "w", "w", 1.0}}, {{"ec", "w"}});
    {
        const std::vector<JoinPairSpec> pairs{{0, 1, 1.0, 1, ""}};
        CHECK_THROWS_AS(join_graphs(s1, s2, pairs), InvariantError);
    }
    {
        const std::vector<JoinPairSpec> pairs{{0, 0, 1.0, 1, ""}, {0, 0, 1.0, 1, ""}};
        CHECK_THROWS_AS(join_graphs(s1, s2, pairs), InvariantError);
    }
    {
        const std::vector<JoinPairSpec> pairs{{0, 0, -1.0, 1, ""}};
        CHECK_THROWS_AS(join_graphs(s1, s2, pairs), InvariantError);
    }
}

TEST_CASE("eliminate_tadpole splits the loop and preserves everything else")
{
    const MetricGraph g =
        MetricGraph::build({"v"}, {{"loop", "v", "v", 2.0}}, {{"e", "v"}});
    std::vector<VertexData> raw(1);
    raw[0] = {0.0, 0.0, {0.5, 0.25, 0.25}}; // L(v): e, loop-start, loop-end
    const WentzellData data = WentzellData::validate_and_normalize(g, std::move(raw));

    TadpoleResult detail;
    const auto [h, hdata] = eliminate_tadpole(g, data, *g.find_edge("loop"), &detail);
    CHECK(h.vertex_count() == 2);
    CHECK(h.internal_count() == 2);
    CHECK(!h.has_tadpole());
    CHECK(h.length(detail.half_a) == doctest::Approx(1.0));
    CHECK(h.length(detail.half_b) == doctest::Approx(1.0));

    auto total = [](const MetricGraph& mg) {
        double s = 0.0;
        for (EdgeId e = 0; e < mg.edge_count(); ++e)
            if (mg.is_internal(e)) s += mg.length(e);
        return s;
    };
    CHECK(total(h) == doctest::Approx(total(g)));

    const VertexData& aux = hdata.at(detail.auxiliary_vertex);
    CHECK(aux.a == doctest::Approx(0.0));
    CHECK(aux.c == doctest::Approx(0.0));
    REQUIRE(aux.b.size() == 2);
    CHECK(aux.b[0] == doctest::Approx(0.5));
    CHECK(aux.b[1] == doctest::Approx(0.5));

    const VertexData& dv = hdata.at(0);
    const auto& inc = h.incident(0);
    for (std::size_t j = 0; j < inc.size(); ++j) {
        if (inc[j].edge == detail.half_a) CHECK(dv.b[j] == doctest::Approx(0.25));
        if (inc[j].edge == detail.half_b) CHECK(dv.b[j] == doctest::Approx(0.25));
        if (h.is_external(inc[j].edge)) CHECK(dv.b[j] == doctest::Approx(0.5));
    }

    CHECK_THROWS_AS(eliminate_tadpole(g, data, *g.find_edge("e")), InvariantError);
    CHECK_THROWS_AS(eliminate_tadpole_graph(h, detail.half_a), InvariantError);
}
