#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "graphbm/edge_function.hpp"
#include "graphbm/graph.hpp"
#include "graphbm/wentzell.hpp"

namespace graphbm {

struct GraphBundle {
    MetricGraph graph;
    WentzellData wentzell;
};

// Graph file schema (JSON): {"vertices": [names], "internal": [{id, from, to,
// length}], "external": [{id, at}], "wentzell": [{vertex, a, c, b: {edgeId:
// value | [value, value]}}]}. Array order defines the canonical order; a
// tadpole's b entry carries the pair [initial end, terminal end].
GraphBundle parse_graph_json(const std::string& text);
GraphBundle load_graph_file(const std::string& path);

// Canonical serialization: fixed key order, shortest round-trip floats,
// two-space indentation. parse -> serialize is idempotent byte-for-byte.
std::string serialize_graph(const MetricGraph& g, const WentzellData& data);
void save_graph_file(const std::string& path, const MetricGraph& g,
                     const WentzellData& data);

std::uint64_t graph_hash(const MetricGraph& g, const WentzellData& data);

// f specs: "zero", "one", "const:<c>", "exp:<amp>:<rate>",
// "sin:<amp>:<freq>[:<phase>]", "indicator:<edge>:<x0>:<x1>", or
// "csv:<path>" with rows edge,x,value on a uniform grid per edge.
EdgeFunction parse_f_spec(const MetricGraph& g, const std::string& spec);

// Start point specs: "<edge>:<x>" or a vertex name.
GraphPoint parse_point(const MetricGraph& g, const std::string& spec);

std::string format_point(const MetricGraph& g, const GraphPoint& p);

} // namespace graphbm
