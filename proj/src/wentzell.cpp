#include "graphbm/wentzell.hpp"

#include <algorithm>
#include <cmath>

namespace graphbm {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw InvariantError(msg); }

} // namespace

WentzellData WentzellData::validate_and_normalize(const MetricGraph& g,
                                                  std::vector<VertexData> raw)
{
    if (raw.size() != g.vertex_count())
        fail("vertex data size does not match graph");

    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        VertexData& d = raw[v];
        const auto& inc = g.incident(v);
        if (d.b.size() != inc.size())
            fail("vertex " + g.vertex_name(v) + ": expected " +
                 std::to_string(inc.size()) + " edge weights, got " +
                 std::to_string(d.b.size()));
        if (d.a < 0.0 || d.c < 0.0)
            fail("vertex " + g.vertex_name(v) + ": negative entry");
        double sum = d.a + d.c;
        for (double b : d.b) {
            if (b < 0.0) fail("vertex " + g.vertex_name(v) + ": negative entry");
            sum += b;
        }
        if (sum <= 0.0) fail("vertex " + g.vertex_name(v) + ": all entries zero");
        d.a /= sum;
        d.c /= sum;
        for (double& b : d.b) b /= sum;
        if (d.a >= 1.0 - 1e-15 && d.c == 0.0)
            fail("vertex " + g.vertex_name(v) +
                 ": data is the excluded corner (1,0,...,0)");
    }

    WentzellData out;
    out.per_vertex_ = std::move(raw);
    return out;
}

double WentzellData::b_sum(VertexId v) const
{
    double s = 0.0;
    for (double b : per_vertex_[v].b) s += b;
    return s;
}

VertexClass classify_vertex(const MetricGraph& g, const WentzellData& data, VertexId v)
{
    const VertexData& d = data.at(v);
    const double bsum = data.b_sum(v);

    VertexClass cls;
    if (bsum == 0.0) {
        if (d.a == 0.0) {
            cls.kind = VertexKind::Trap;
        } else {
            cls.kind = VertexKind::ExponentialHolding;
            cls.holding_rate = d.a / d.c;
        }
        return cls;
    }
    cls.kind = VertexKind::Instantaneous;
    cls.weights.resize(d.b.size());
    for (std::size_t i = 0; i < d.b.size(); ++i) cls.weights[i] = d.b[i] / bsum;
    cls.stickiness = d.c / bsum;
    cls.kill_rate = d.a / bsum;
    (void)g;
    return cls;
}

Eigen::MatrixXd vertex_block_A(const MetricGraph& g, const WentzellData& d, VertexId v)
{
    const std::size_t m = g.incident(v).size();
    Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(m, m);
    blk(0, 0) = d.at(v).a;
    return blk;
}

Eigen::MatrixXd vertex_block_B(const MetricGraph& g, const WentzellData& d, VertexId v)
{
    const std::size_t m = g.incident(v).size();
    Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t j = 0; j < m; ++j) blk(0, j) = -d.at(v).b[j];
    return blk;
}

Eigen::MatrixXd vertex_block_C(const MetricGraph& g, const WentzellData& d, VertexId v)
{
    const std::size_t m = g.incident(v).size();
    Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(m, m);
    blk(0, 0) = 0.5 * d.at(v).c;
    for (std::size_t j = 1; j < m; ++j) {
        blk(j, j - 1) = 1.0;
        blk(j, j) = -1.0;
    }
    return blk;
}

Eigen::MatrixXd BoundaryMatrices::permutation() const
{
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t q = 0; q < n; ++q) p(q, slot_of_row[q]) = 1.0;
    return p;
}

BoundaryMatrices assemble(const MetricGraph& g, const WentzellData& data)
{
    if (g.has_tadpole())
        fail("graph has a tadpole; eliminate it before assembling boundary matrices");

    BoundaryMatrices m;
    m.n = g.trace_size();
    m.n_external = g.external_count();
    m.n_internal = g.internal_count();
    m.rho.resize(m.n_internal);
    for (std::size_t k = 0; k < m.n_internal; ++k)
        m.rho[k] = g.length(static_cast<EdgeId>(m.n_external + k));

    m.slot_of_row.resize(m.n);
    m.row_of_slot.resize(m.n);
    std::size_t q = 0;
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        for (const Incidence& inc : g.incident(v)) {
            m.slot_of_row[q] = g.trace_slot(inc);
            m.row_of_slot[m.slot_of_row[q]] = q;
            ++q;
        }

    m.A = Eigen::MatrixXd::Zero(m.n, m.n);
    m.B = Eigen::MatrixXd::Zero(m.n, m.n);
    m.C = Eigen::MatrixXd::Zero(m.n, m.n);
    std::size_t base = 0;
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        const std::size_t deg = g.incident(v).size();
        const Eigen::MatrixXd bA = vertex_block_A(g, data, v);
        const Eigen::MatrixXd bB = vertex_block_B(g, data, v);
        const Eigen::MatrixXd bC = vertex_block_C(g, data, v);
        for (std::size_t i = 0; i < deg; ++i)
            for (std::size_t j = 0; j < deg; ++j) {
                const std::size_t r = m.slot_of_row[base + i];
                const std::size_t c = m.slot_of_row[base + j];
                m.A(r, c) = bA(i, j);
                m.B(r, c) = bB(i, j);
                m.C(r, c) = bC(i, j);
            }
        base += deg;
    }
    return m;
}

Eigen::MatrixXcd x_plus(const BoundaryMatrices& m, std::complex<double> kappa)
{
    Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(m.n, m.n);
    for (std::size_t k = 0; k < m.n_internal; ++k) {
        const std::complex<double> e = std::exp(kappa * m.rho[k]);
        x(m.n_external + k, m.n_external + m.n_internal + k) = e;
        x(m.n_external + m.n_internal + k, m.n_external + k) = e;
    }
    return x;
}

Eigen::MatrixXcd x_minus(const BoundaryMatrices& m, std::complex<double> kappa)
{
    Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(m.n, m.n);
    for (std::size_t k = 0; k < m.n_external; ++k) x(k, k) = -1.0;
    for (std::size_t k = 0; k < m.n_internal; ++k) {
        const std::complex<double> e = std::exp(kappa * m.rho[k]);
        x(m.n_external + k, m.n_external + m.n_internal + k) = -e;
        x(m.n_external + m.n_internal + k, m.n_external + k) = -e;
    }
    return x;
}

Eigen::MatrixXcd z_matrix(const BoundaryMatrices& m, std::complex<double> kappa)
{
    const Eigen::MatrixXcd a = m.A.cast<std::complex<double>>();
    const Eigen::MatrixXcd b = m.B.cast<std::complex<double>>();
    const Eigen::MatrixXcd c = m.C.cast<std::complex<double>>();
    return (a + kappa * kappa * c) * x_plus(m, kappa) + kappa * b * x_minus(m, kappa);
}

namespace {

struct DetCond {
    double abs_det = 0.0;
    double log10_cond = 0.0;
    bool invertible = false;
};

DetCond det_and_cond(const Eigen::MatrixXcd& z)
{
    DetCond out;
    out.abs_det = std::abs(z.determinant());
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(z);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(sv.size() - 1);
    if (smax <= 0.0 || !std::isfinite(smax)) {
        out.log10_cond = kInfinity;
        return out;
    }
    out.log10_cond = smin > 0.0 ? std::log10(smax / smin) : kInfinity;
    out.invertible = smin / smax > 1e-12 && std::isfinite(out.abs_det);
    return out;
}

} // namespace

KappaReport find_invertible_kappa(const BoundaryMatrices& m, double lambda_target)
{
    if (!(lambda_target > 0.0)) fail("lambda must be positive");

    KappaReport rep;
    rep.lambda_target = lambda_target;
    double lambda = lambda_target;
    for (int attempt = 0; attempt <= 3; ++attempt) {
        const double kappa = std::sqrt(2.0 * lambda);
        const DetCond dc = det_and_cond(z_matrix(m, kappa));
        rep.lambda_used = lambda;
        rep.kappa = kappa;
        rep.abs_det = dc.abs_det;
        rep.log10_cond = dc.log10_cond;
        rep.invertible = dc.invertible;
        rep.retries = attempt;
        if (dc.invertible) return rep;
        lambda *= 1.0 + 1e-6;
    }
    return rep; // exceptional lambda: caller decides how to proceed
}

std::vector<DomainResidual> check_domain_membership(const MetricGraph& g,
                                                    const WentzellData& data,
                                                    const Eigen::VectorXd& f_traces,
                                                    const Eigen::VectorXd& df_traces,
                                                    const Eigen::VectorXd& ddf_traces)
{
    const auto n = static_cast<Eigen::Index>(g.trace_size());
    if (f_traces.size() != n || df_traces.size() != n || ddf_traces.size() != n)
        fail("trace vectors must have size |E| + 2|I|");

    std::vector<DomainResidual> out(g.vertex_count());
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        const VertexData& d = data.at(v);
        const auto& inc = g.incident(v);
        double res = 0.0;
        double dd_min = kInfinity, dd_max = -kInfinity;
        for (std::size_t j = 0; j < inc.size(); ++j) {
            const auto s = static_cast<Eigen::Index>(g.trace_slot(inc[j]));
            res -= d.b[j] * df_traces(s);
            dd_min = std::min(dd_min, ddf_traces(s));
            dd_max = std::max(dd_max, ddf_traces(s));
        }
        const auto s0 = static_cast<Eigen::Index>(g.trace_slot(inc[0]));
        res += d.a * f_traces(s0) + 0.5 * d.c * ddf_traces(s0);
        out[v].wentzell_residual = res;
        out[v].second_derivative_gap = dd_max - dd_min;
    }
    return out;
}

std::pair<MetricGraph, WentzellData> eliminate_tadpole(const MetricGraph& g,
                                                       const WentzellData& data,
                                                       EdgeId tadpole,
                                                       TadpoleResult* detail)
{
    TadpoleResult res = eliminate_tadpole_graph(g, tadpole);

    std::vector<VertexData> raw(res.graph.vertex_count());
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        const VertexData& old = data.at(v);
        VertexData nd;
        nd.a = old.a;
        nd.c = old.c;
        const auto& inc_new = res.graph.incident(v);
        nd.b.resize(inc_new.size(), 0.0);
        const auto& inc_old = g.incident(v);
        for (std::size_t j = 0; j < inc_old.size(); ++j) {
            Incidence target;
            if (inc_old[j].edge == tadpole) {
                // The two tadpole ends follow the two half edges, start end of each.
                target = {inc_old[j].end == EdgeEnd::Start ? res.half_a : res.half_b,
                          EdgeEnd::Start};
            } else {
                target = {res.edge_map[inc_old[j].edge], inc_old[j].end};
            }
            const auto it = std::find(inc_new.begin(), inc_new.end(), target);
            nd.b[static_cast<std::size_t>(it - inc_new.begin())] = old.b[j];
        }
        raw[v] = std::move(nd);
    }
    // Auxiliary vertex: standard conditions with equal weights.
    VertexData aux;
    aux.a = 0.0;
    aux.c = 0.0;
    aux.b = {0.5, 0.5};
    raw[res.auxiliary_vertex] = std::move(aux);

    WentzellData nd = WentzellData::validate_and_normalize(res.graph, std::move(raw));
    if (detail) *detail = res;
    return {std::move(res.graph), std::move(nd)};
}

WentzellData join_wentzell(const MetricGraph& joined, const ShadowMap& sm,
                           const MetricGraph& g1, const WentzellData& d1,
                           const MetricGraph& g2, const WentzellData& d2)
{
    std::vector<VertexData> raw(joined.vertex_count());

    auto transport = [&](const MetricGraph& comp, const WentzellData& dc,
                         const std::vector<VertexId>& vmap,
                         const std::vector<EdgeId>& emap, int comp_idx) {
        for (VertexId v = 0; v < comp.vertex_count(); ++v) {
            const VertexData& old = dc.at(v);
            const VertexId w = vmap[v];
            VertexData nd;
            nd.a = old.a;
            nd.c = old.c;
            const auto& inc_new = joined.incident(w);
            nd.b.resize(inc_new.size(), 0.0);
            const auto& inc_old = comp.incident(v);
            for (std::size_t j = 0; j < inc_old.size(); ++j) {
                Incidence target;
                if (emap[inc_old[j].edge] != kNoEdge) {
                    target = {emap[inc_old[j].edge], inc_old[j].end};
                } else {
                    // Consumed external edge: follow the new internal edge,
                    // at whichever end touches this vertex.
                    const auto k = *sm.pair_of_component_edge(comp_idx, inc_old[j].edge);
                    const EdgeId ne = sm.pairs[k].new_edge;
                    target = {ne, joined.initial_vertex(ne) == w ? EdgeEnd::Start
                                                                 : EdgeEnd::End};
                }
                const auto it = std::find(inc_new.begin(), inc_new.end(), target);
                nd.b[static_cast<std::size_t>(it - inc_new.begin())] = old.b[j];
            }
            raw[w] = std::move(nd);
        }
    };
    transport(g1, d1, sm.vertex_from_g1, sm.edge_from_g1, 1);
    transport(g2, d2, sm.vertex_from_g2, sm.edge_from_g2, 2);

    return WentzellData::validate_and_normalize(joined, std::move(raw));
}

} // namespace graphbm
