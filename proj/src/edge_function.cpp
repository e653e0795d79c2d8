#include "graphbm/edge_function.hpp"

#include <algorithm>
#include <cmath>

#include "graphbm/errors.hpp"

namespace graphbm {

EdgeProfile EdgeProfile::constant(double c)
{
    EdgeProfile p;
    p.kind = Kind::Constant;
    p.p0 = c;
    return p;
}

EdgeProfile EdgeProfile::exp_decay(double amplitude, double rate)
{
    EdgeProfile p;
    p.kind = Kind::ExpDecay;
    p.p0 = amplitude;
    p.p1 = rate;
    return p;
}

EdgeProfile EdgeProfile::sine(double amplitude, double frequency, double phase)
{
    EdgeProfile p;
    p.kind = Kind::Sine;
    p.p0 = amplitude;
    p.p1 = frequency;
    p.p2 = phase;
    return p;
}

EdgeProfile EdgeProfile::linear(double value0, double slope)
{
    EdgeProfile p;
    p.kind = Kind::Linear;
    p.p0 = value0;
    p.p1 = slope;
    return p;
}

EdgeProfile EdgeProfile::indicator(double x0, double x1, double value)
{
    EdgeProfile p;
    p.kind = Kind::Indicator;
    p.p0 = x0;
    p.p1 = x1;
    p.p2 = value;
    return p;
}

EdgeProfile EdgeProfile::samples(double step, std::vector<double> values)
{
    if (!(step > 0.0)) throw InvariantError("sample step must be positive");
    if (values.size() < 2) throw InvariantError("need at least two samples");
    EdgeProfile p;
    p.kind = Kind::Samples;
    p.step = step;
    p.values = std::move(values);
    return p;
}

double EdgeProfile::eval(double x) const
{
    switch (kind) {
    case Kind::Zero:
        return 0.0;
    case Kind::Constant:
        return p0;
    case Kind::ExpDecay:
        return p0 * std::exp(-p1 * x);
    case Kind::Sine:
        return p0 * std::sin(p1 * x + p2);
    case Kind::Linear:
        return p0 + p1 * x;
    case Kind::Indicator:
        return (x >= p0 && x <= p1) ? p2 : 0.0;
    case Kind::Samples: {
        if (x <= 0.0) return values.front();
        const double pos = x / step;
        const auto i = static_cast<std::size_t>(pos);
        if (i + 1 >= values.size()) {
            const double last = step * static_cast<double>(values.size() - 1);
            return x <= last + 0.5 * step ? values.back() : 0.0;
        }
        const double w = pos - static_cast<double>(i);
        return (1.0 - w) * values[i] + w * values[i + 1];
    }
    }
    return 0.0;
}

double EdgeProfile::sup(double upto) const
{
    switch (kind) {
    case Kind::Zero:
        return 0.0;
    case Kind::Constant:
        return std::abs(p0);
    case Kind::ExpDecay:
        return p1 >= 0.0 ? std::abs(p0) : std::abs(p0) * std::exp(-p1 * upto);
    case Kind::Sine:
        return std::abs(p0);
    case Kind::Linear:
        return std::max(std::abs(p0), std::abs(p0 + p1 * upto));
    case Kind::Indicator:
        return p0 <= upto ? std::abs(p2) : 0.0;
    case Kind::Samples: {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    }
    return 0.0;
}

bool EdgeProfile::decays_at_infinity() const
{
    switch (kind) {
    case Kind::Zero:
    case Kind::Indicator:
    case Kind::Samples:
        return true;
    case Kind::ExpDecay:
        return p1 > 0.0 || p0 == 0.0;
    case Kind::Constant:
        return p0 == 0.0;
    case Kind::Sine:
        return p0 == 0.0;
    case Kind::Linear:
        return p0 == 0.0 && p1 == 0.0;
    }
    return false;
}

bool EdgeProfile::bounded_at_infinity() const
{
    switch (kind) {
    case Kind::Linear:
        return p1 == 0.0;
    case Kind::ExpDecay:
        return p1 >= 0.0 || p0 == 0.0;
    default:
        return true;
    }
}

double EdgeProfile::tail_cutoff(double tol) const
{
    switch (kind) {
    case Kind::Zero:
        return 0.0;
    case Kind::ExpDecay: {
        if (p0 == 0.0) return 0.0;
        if (p1 <= 0.0) return kInfinity;
        return std::max(0.0, std::log(std::abs(p0) / tol) / p1);
    }
    case Kind::Indicator:
        return p1;
    case Kind::Samples:
        return step * static_cast<double>(values.size() - 1) + step;
    case Kind::Constant:
        return p0 == 0.0 ? 0.0 : kInfinity;
    default:
        return kInfinity;
    }
}

double EdgeProfile::native_step() const
{
    return kind == Kind::Samples ? step : kInfinity;
}

EdgeFunction::EdgeFunction(const MetricGraph& g, EdgeProfile everywhere)
    : per_edge_(g.edge_count(), std::move(everywhere))
{
}

EdgeFunction::EdgeFunction(const MetricGraph& g, std::vector<EdgeProfile> per_edge)
    : per_edge_(std::move(per_edge))
{
    if (per_edge_.size() != g.edge_count())
        throw InvariantError("profile count does not match edge count");
}

double EdgeFunction::eval(const MetricGraph& g, const GraphPoint& p) const
{
    switch (p.kind) {
    case GraphPoint::Kind::Cemetery:
        return 0.0;
    case GraphPoint::Kind::Vertex:
        return vertex_value(g, p.vertex);
    case GraphPoint::Kind::Interior:
        return per_edge_[p.edge].eval(p.x);
    }
    return 0.0;
}

double EdgeFunction::incidence_value(const MetricGraph& g, const Incidence& inc) const
{
    const double x = inc.end == EdgeEnd::Start ? 0.0 : g.length(inc.edge);
    return per_edge_[inc.edge].eval(x);
}

double EdgeFunction::vertex_value(const MetricGraph& g, VertexId v) const
{
    return incidence_value(g, g.incident(v).front());
}

double EdgeFunction::sup_norm(const MetricGraph& g) const
{
    double m = 0.0;
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        const double upto = g.is_internal(e) ? g.length(e) : 1e6;
        m = std::max(m, per_edge_[e].sup(upto));
    }
    return m;
}

double EdgeFunction::continuity_gap(const MetricGraph& g) const
{
    double gap = 0.0;
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        double lo = kInfinity, hi = -kInfinity;
        for (const Incidence& inc : g.incident(v)) {
            const double val = incidence_value(g, inc);
            lo = std::min(lo, val);
            hi = std::max(hi, val);
        }
        gap = std::max(gap, hi - lo);
    }
    return gap;
}

bool EdgeFunction::vanishes_at_infinity(const MetricGraph& g) const
{
    for (EdgeId e = 0; e < g.external_count(); ++e)
        if (!per_edge_[e].decays_at_infinity()) return false;
    return true;
}

bool EdgeFunction::bounded(const MetricGraph& g) const
{
    for (EdgeId e = 0; e < g.external_count(); ++e)
        if (!per_edge_[e].bounded_at_infinity()) return false;
    return true;
}

double simpson(const std::function<double(double)>& f, double a, double b,
               std::size_t intervals)
{
    if (b <= a) return 0.0;
    std::size_t n = std::max<std::size_t>(intervals, 2);
    if (n % 2) ++n;
    const double h = (b - a) / static_cast<double>(n);
    double sum = f(a) + f(b);
    for (std::size_t i = 1; i < n; ++i)
        sum += f(a + h * static_cast<double>(i)) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

} // namespace graphbm
