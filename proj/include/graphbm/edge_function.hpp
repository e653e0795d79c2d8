#pragma once

#include <functional>
#include <string>
#include <vector>

#include "graphbm/graph.hpp"

namespace graphbm {

// Closed-form or sampled data on one edge, in the edge's local coordinate.
struct EdgeProfile {
    enum class Kind : std::uint8_t {
        Zero,
        Constant, // p0
        ExpDecay, // p0 * exp(-p1 * x)
        Sine,     // p0 * sin(p1 * x + p2)
        Linear,   // p0 + p1 * x
        Indicator,// p2 on [p0, p1]
        Samples,  // uniform grid from x = 0 with spacing step; 0 beyond
    };

    Kind kind = Kind::Zero;
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    double step = 0.0;
    std::vector<double> values;

    static EdgeProfile zero() { return {}; }
    static EdgeProfile constant(double c);
    static EdgeProfile exp_decay(double amplitude, double rate);
    static EdgeProfile sine(double amplitude, double frequency, double phase = 0.0);
    static EdgeProfile linear(double value0, double slope);
    static EdgeProfile indicator(double x0, double x1, double value = 1.0);
    static EdgeProfile samples(double step, std::vector<double> values);

    double eval(double x) const;
    // Largest |value| over [0, upto].
    double sup(double upto) const;
    // True if the profile tends to 0 as x -> infinity (external-edge use).
    bool decays_at_infinity() const;
    // True if value is bounded as x -> infinity.
    bool bounded_at_infinity() const;
    // x beyond which |value| < tol on a half line (infinity for Constant etc).
    double tail_cutoff(double tol) const;
    // Smallest sensible quadrature step (sample spacing), +inf for closed forms.
    double native_step() const;
};

// Function on the whole graph given per edge. Vertex values are taken as the
// limit along the lowest-indexed incident edge.
class EdgeFunction {
public:
    EdgeFunction() = default;
    EdgeFunction(const MetricGraph& g, EdgeProfile everywhere);
    EdgeFunction(const MetricGraph& g, std::vector<EdgeProfile> per_edge);

    static EdgeFunction zero(const MetricGraph& g)
    {
        return EdgeFunction(g, EdgeProfile::zero());
    }

    const EdgeProfile& profile(EdgeId e) const { return per_edge_[e]; }
    EdgeProfile& profile(EdgeId e) { return per_edge_[e]; }
    std::size_t edge_count() const { return per_edge_.size(); }

    double eval(const MetricGraph& g, const GraphPoint& p) const;
    double eval_edge(EdgeId e, double x) const { return per_edge_[e].eval(x); }
    double vertex_value(const MetricGraph& g, VertexId v) const;
    // Boundary value along a specific incidence.
    double incidence_value(const MetricGraph& g, const Incidence& inc) const;

    // Sampled sup norm (exact for the closed forms used here).
    double sup_norm(const MetricGraph& g) const;

    // Largest vertex-value mismatch over all vertices (0 for members of C0).
    double continuity_gap(const MetricGraph& g) const;
    // True if every external-edge profile vanishes at infinity.
    bool vanishes_at_infinity(const MetricGraph& g) const;
    // True if bounded (solver requirement on external edges).
    bool bounded(const MetricGraph& g) const;

private:
    std::vector<EdgeProfile> per_edge_;
};

// Composite Simpson rule with an even number of subintervals >= 2.
double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals);

} // namespace graphbm
