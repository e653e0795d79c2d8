#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "graphbm/graph.hpp"
#include "graphbm/wentzell.hpp"

namespace testutil {

using namespace graphbm;

struct Bundle {
    MetricGraph graph;
    WentzellData data;
};

inline Bundle star(std::size_t edges, double a, double c, std::vector<double> b)
{
    std::vector<ExternalEdgeSpec> ext;
    for (std::size_t i = 0; i < edges; ++i)
        ext.push_back({"e" + std::to_string(i + 1), "v"});
    MetricGraph g = MetricGraph::build({"v"}, {}, ext);
    std::vector<VertexData> raw(1);
    raw[0] = {a, c, std::move(b)};
    WentzellData w = WentzellData::validate_and_normalize(g, std::move(raw));
    return {std::move(g), std::move(w)};
}

// Interval [0, len] with chosen end data (default traps).
inline Bundle interval(double len, VertexData at_u = {0.0, 1.0, {0.0}},
                       VertexData at_w = {0.0, 1.0, {0.0}})
{
    MetricGraph g = MetricGraph::build({"u", "w"}, {{"i", "u", "w", len}}, {});
    std::vector<VertexData> raw{std::move(at_u), std::move(at_w)};
    WentzellData w = WentzellData::validate_and_normalize(g, std::move(raw));
    return {std::move(g), std::move(w)};
}

// A 4-vertex graph built by joining two 2-vertex graphs on two pairs; also
// returns the pieces for glue tests.
struct JoinedFixture {
    MetricGraph g1, g2;
    WentzellData d1, d2;
    MetricGraph joined;
    ShadowMap sm;
    WentzellData data;
};

inline JoinedFixture joined_two_pair(double sticky_c = 0.0)
{
    JoinedFixture fx;
    fx.g1 = MetricGraph::build({"u1", "u2"}, {{"i1", "u1", "u2", 1.0}},
                               {{"p1", "u1"}, {"p2", "u2"}, {"x1", "u1"}});
    fx.g2 = MetricGraph::build({"w1", "w2"}, {{"j1", "w1", "w2", 1.0}},
                               {{"q1", "w1"}, {"q2", "w2"}, {"x2", "w2"}});
    {
        std::vector<VertexData> raw(2);
        raw[0] = {0.0, sticky_c, {1.0, 1.0, 1.0}}; // u1: p1, x1, i1 order is by edge id
        raw[1] = {0.0, 0.0, {1.0, 1.0}};           // u2: p2, i1
        // Incidence order at u1: externals first (p1 id 0, x1 id 2), then i1.
        fx.d1 = WentzellData::validate_and_normalize(fx.g1, std::move(raw));
    }
    {
        std::vector<VertexData> raw(2);
        raw[0] = {0.0, 0.0, {1.0, 1.0}};
        raw[1] = {0.0, 0.0, {1.0, 1.0, 1.0}};
        fx.d2 = WentzellData::validate_and_normalize(fx.g2, std::move(raw));
    }
    const std::vector<JoinPairSpec> pairs{{*fx.g1.find_edge("p1"), *fx.g2.find_edge("q1"),
                                           1.0, 1, "c1"},
                                          {*fx.g1.find_edge("p2"), *fx.g2.find_edge("q2"),
                                           1.5, -1, "c2"}};
    auto [joined, sm] = join_graphs(fx.g1, fx.g2, pairs);
    fx.joined = std::move(joined);
    fx.sm = std::move(sm);
    fx.data = join_wentzell(fx.joined, fx.sm, fx.g1, fx.d1, fx.g2, fx.d2);
    return fx;
}

// Kolmogorov-Smirnov statistic of samples against a cdf.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf)
{
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

// Asymptotic KS critical value at the 1% level.
inline double ks_critical_1pct(std::size_t n)
{
    return 1.628 / std::sqrt(static_cast<double>(n));
}

// Upper chi^2 quantiles at the 1% level for small df.
inline double chi2_critical_1pct(int df)
{
    static const double table[] = {0.0,    6.635,  9.210,  11.345, 13.277, 15.086,
                                   16.812, 18.475, 20.090, 21.666, 23.209};
    return table[df];
}

} // namespace testutil
