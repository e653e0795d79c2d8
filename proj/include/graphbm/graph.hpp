#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "graphbm/errors.hpp"

namespace graphbm {

using VertexId = std::uint32_t;
using EdgeId = std::uint32_t;

inline constexpr VertexId kNoVertex = std::numeric_limits<VertexId>::max();
inline constexpr EdgeId kNoEdge = std::numeric_limits<EdgeId>::max();
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Which end of an edge an incidence refers to. External edges only have
// a Start end (their anchor vertex).
enum class EdgeEnd : std::uint8_t { Start = 0, End = 1 };

// One (vertex, edge-end) pair. A tadpole contributes two incidences at the
// same vertex, distinguished by the end.
struct Incidence {
    EdgeId edge = kNoEdge;
    EdgeEnd end = EdgeEnd::Start;

    bool operator==(const Incidence&) const = default;
};

struct InternalEdgeSpec {
    std::string name;
    std::string from;
    std::string to;
    double length = 0.0;
};

struct ExternalEdgeSpec {
    std::string name;
    std::string at;
};

// A point of the graph: interior of an edge (local coordinate measured from
// the edge's initial vertex), a vertex, or the cemetery.
struct GraphPoint {
    enum class Kind : std::uint8_t { Interior, Vertex, Cemetery };

    Kind kind = Kind::Cemetery;
    EdgeId edge = kNoEdge;
    double x = 0.0;
    VertexId vertex = kNoVertex;

    static GraphPoint interior(EdgeId e, double x)
    {
        GraphPoint p;
        p.kind = Kind::Interior;
        p.edge = e;
        p.x = x;
        return p;
    }
    static GraphPoint at_vertex(VertexId v)
    {
        GraphPoint p;
        p.kind = Kind::Vertex;
        p.vertex = v;
        return p;
    }
    static GraphPoint cemetery() { return GraphPoint{}; }

    bool is_interior() const { return kind == Kind::Interior; }
    bool is_vertex() const { return kind == Kind::Vertex; }
    bool is_cemetery() const { return kind == Kind::Cemetery; }

    bool operator==(const GraphPoint&) const = default;
};

// Finite metric graph. Edge ids index a single array in which all external
// edges come before all internal ones; that order, together with the vertex
// order, is fixed at construction and defines the trace-vector layout and
// the permutation used by the boundary matrices.
class MetricGraph {
public:
    static MetricGraph build(std::vector<std::string> vertices,
                             std::vector<InternalEdgeSpec> internal,
                             std::vector<ExternalEdgeSpec> external);

    std::size_t vertex_count() const { return vertex_names_.size(); }
    std::size_t external_count() const { return n_external_; }
    std::size_t internal_count() const { return edge_names_.size() - n_external_; }
    std::size_t edge_count() const { return edge_names_.size(); }

    // Size of the trace vectors f(V), f'(V), f''(V): |E| + 2|I|.
    std::size_t trace_size() const { return n_external_ + 2 * internal_count(); }

    bool is_external(EdgeId e) const { return e < n_external_; }
    bool is_internal(EdgeId e) const { return e >= n_external_ && e < edge_count(); }

    // Length of an edge; +infinity for external edges.
    double length(EdgeId e) const { return lengths_[e]; }

    VertexId initial_vertex(EdgeId e) const { return initial_[e]; }
    // kNoVertex for external edges.
    VertexId terminal_vertex(EdgeId e) const { return terminal_[e]; }

    VertexId vertex_at(const Incidence& inc) const
    {
        return inc.end == EdgeEnd::Start ? initial_[inc.edge] : terminal_[inc.edge];
    }

    bool is_tadpole(EdgeId e) const
    {
        return is_internal(e) && initial_[e] == terminal_[e];
    }
    bool has_tadpole() const;

    const std::string& vertex_name(VertexId v) const { return vertex_names_[v]; }
    const std::string& edge_name(EdgeId e) const { return edge_names_[e]; }
    std::optional<VertexId> find_vertex(const std::string& name) const;
    std::optional<EdgeId> find_edge(const std::string& name) const;

    // L(v): incidences at v, ordered by (edge, end). Never empty.
    const std::vector<Incidence>& incident(VertexId v) const { return incident_[v]; }

    // Trace-vector slot of an incidence: externals first, then initial ends
    // of internal edges, then terminal ends.
    std::size_t trace_slot(const Incidence& inc) const
    {
        if (is_external(inc.edge)) return inc.edge;
        const std::size_t k = inc.edge - n_external_;
        return inc.end == EdgeEnd::Start ? n_external_ + k
                                         : n_external_ + internal_count() + k;
    }
    Incidence incidence_of_slot(std::size_t slot) const;

    // Shortest-path distance along edges; +infinity between connected
    // components. Cemetery input is an error.
    double distance(const GraphPoint& a, const GraphPoint& b) const;

    // Snap edge endpoints to the Vertex variant and validate coordinates.
    GraphPoint canonical(const GraphPoint& p) const;

    MetricGraph() = default; // empty placeholder; use build()

private:
    std::vector<std::string> vertex_names_;
    std::vector<std::string> edge_names_; // externals first
    std::vector<double> lengths_;
    std::vector<VertexId> initial_;
    std::vector<VertexId> terminal_; // kNoVertex for externals
    std::size_t n_external_ = 0;
    std::vector<std::vector<Incidence>> incident_;
};

// One joined pair of former external edges.
struct JoinPairSpec {
    EdgeId in_g1 = kNoEdge;
    EdgeId in_g2 = kNoEdge;
    double length = 0.0;   // b_k > 0
    int orientation = 1;   // sigma_k in {-1, +1}
    std::string name;      // name of the new internal edge ("" -> derived)
};

struct JoinedPair {
    EdgeId in_g1 = kNoEdge;     // consumed external edge of g1
    EdgeId in_g2 = kNoEdge;     // consumed external edge of g2
    EdgeId new_edge = kNoEdge;  // internal edge of the joined graph
    double length = 0.0;
    int orientation = 1;
};

// Location of one shadow vertex: an interior point of a former external
// edge of one component, standing in for a connected vertex of the other.
struct ShadowVertex {
    int component = 1;            // 1 or 2: graph whose edge carries the point
    EdgeId component_edge = kNoEdge;
    double x = 0.0;               // distance along that edge
    VertexId connected = kNoVertex; // kappa(shadow), id in the joined graph
};

struct ShadowMap {
    std::vector<JoinedPair> pairs;
    std::vector<ShadowVertex> shadows;

    // Component ids -> joined ids.
    std::vector<VertexId> vertex_from_g1;
    std::vector<VertexId> vertex_from_g2;
    // kNoEdge for consumed (paired) external edges.
    std::vector<EdgeId> edge_from_g1;
    std::vector<EdgeId> edge_from_g2;

    // V_c: joined-graph vertices incident with a new internal edge.
    std::vector<VertexId> connected_vertices;

    bool is_connected_vertex(VertexId v) const;
    // Pair index whose consumed edge in component `comp` is `e`, or npos.
    std::optional<std::size_t> pair_of_component_edge(int comp, EdgeId e) const;
};

std::pair<MetricGraph, ShadowMap> join_graphs(const MetricGraph& g1,
                                              const MetricGraph& g2,
                                              std::span<const JoinPairSpec> pairs);

struct TadpoleResult {
    MetricGraph graph;
    VertexId auxiliary_vertex = kNoVertex;
    EdgeId half_a = kNoEdge;
    EdgeId half_b = kNoEdge;
    // Old edge ids -> new edge ids (tadpole itself maps to kNoEdge).
    std::vector<EdgeId> edge_map;
};

// Replace tadpole i_t (length b) by two internal edges of length b/2 meeting
// at a fresh auxiliary vertex. Vertex data mapping lives in wentzell.hpp.
TadpoleResult eliminate_tadpole_graph(const MetricGraph& g, EdgeId tadpole);

} // namespace graphbm
