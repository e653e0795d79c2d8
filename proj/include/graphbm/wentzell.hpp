#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "graphbm/graph.hpp"

namespace graphbm {

// Raw or normalized vertex data (a_v, b_{v_l}, c_v). The b entries are
// aligned with MetricGraph::incident(v); a tadpole edge therefore carries
// two entries at its vertex, one per end.
struct VertexData {
    double a = 0.0;
    double c = 0.0;
    std::vector<double> b;
};

class WentzellData {
public:
    // Rescales every vertex triple to sum exactly one. Entries must be
    // nonnegative, not all zero, and a_v < 1 after normalization.
    static WentzellData validate_and_normalize(const MetricGraph& g,
                                               std::vector<VertexData> raw);

    const VertexData& at(VertexId v) const { return per_vertex_[v]; }
    std::size_t vertex_count() const { return per_vertex_.size(); }
    double b_sum(VertexId v) const;

private:
    std::vector<VertexData> per_vertex_;
};

enum class VertexKind { Trap, ExponentialHolding, Instantaneous };

struct VertexClass {
    VertexKind kind = VertexKind::Trap;
    // ExponentialHolding: jump-to-cemetery rate beta = a/c.
    double holding_rate = 0.0;
    // Instantaneous: excursion weights w_l = b_l / sum(b), stickiness
    // gamma = c / sum(b) and killing rate k = a / sum(b), both per unit
    // local time.
    std::vector<double> weights;
    double stickiness = 0.0;
    double kill_rate = 0.0;
};

VertexClass classify_vertex(const MetricGraph& g, const WentzellData& data, VertexId v);

// Dense boundary-condition matrices in the trace-vector layout (externals
// first, then initial ends, then terminal ends of internal edges), related
// to the block-diagonal vertex-major form by the permutation P.
struct BoundaryMatrices {
    std::size_t n = 0;
    Eigen::MatrixXd A, B, C;

    // slot_of_row[q] = trace slot of vertex-major row q (the permutation P:
    // row q of the block form reads trace entry slot_of_row[q]).
    std::vector<std::size_t> slot_of_row;
    std::vector<std::size_t> row_of_slot;

    // Internal edge lengths in edge order.
    Eigen::VectorXd rho;
    std::size_t n_external = 0;
    std::size_t n_internal = 0;

    Eigen::MatrixXd permutation() const; // P as a dense matrix
};

// Per-vertex blocks as printed in the vertex-major form.
Eigen::MatrixXd vertex_block_A(const MetricGraph& g, const WentzellData& d, VertexId v);
Eigen::MatrixXd vertex_block_B(const MetricGraph& g, const WentzellData& d, VertexId v);
Eigen::MatrixXd vertex_block_C(const MetricGraph& g, const WentzellData& d, VertexId v);

// Requires a tadpole-free graph.
BoundaryMatrices assemble(const MetricGraph& g, const WentzellData& data);

// X_plus / X_minus factors of the characteristic matrix. X_minus carries the
// sign pattern of the inward first-derivative traces of the exponential
// ansatz (-1 on the external block).
Eigen::MatrixXcd x_plus(const BoundaryMatrices& m, std::complex<double> kappa);
Eigen::MatrixXcd x_minus(const BoundaryMatrices& m, std::complex<double> kappa);

// Z(kappa) = (A + kappa^2 C) X_plus(kappa) + kappa B X_minus(kappa).
// Z(kappa) r = 0 is exactly the boundary-condition system for the
// exponential ansatz with coefficient vector r.
Eigen::MatrixXcd z_matrix(const BoundaryMatrices& m, std::complex<double> kappa);

struct KappaReport {
    double lambda_target = 0.0;
    double lambda_used = 0.0;
    double kappa = 0.0;
    double abs_det = 0.0;
    double log10_cond = 0.0;
    bool invertible = false;
    int retries = 0;
    bool degenerate = false; // kappa == 0 requested
};

// kappa = sqrt(2 lambda) with an invertibility report; if Z(kappa) is
// numerically singular, retries with lambda * (1 + 1e-6) up to three times.
KappaReport find_invertible_kappa(const BoundaryMatrices& m, double lambda_target);

struct DomainResidual {
    double wentzell_residual = 0.0;      // eq-(1.iii)-type row, first incidence traces
    double second_derivative_gap = 0.0;  // max pairwise gap of f''(v_l)
};

// Traces are given in the trace-vector layout; f first derivatives are the
// inward ones.
std::vector<DomainResidual> check_domain_membership(const MetricGraph& g,
                                                    const WentzellData& data,
                                                    const Eigen::VectorXd& f_traces,
                                                    const Eigen::VectorXd& df_traces,
                                                    const Eigen::VectorXd& ddf_traces);

// Vertex data transported through eliminate_tadpole_graph: original vertices
// keep their data (the tadpole's two b entries follow the two half edges)
// and the auxiliary vertex gets a = c = 0, b = (1/2, 1/2).
std::pair<MetricGraph, WentzellData> eliminate_tadpole(const MetricGraph& g,
                                                       const WentzellData& data,
                                                       EdgeId tadpole,
                                                       TadpoleResult* detail = nullptr);

// Per-vertex data transported through join_graphs (vertex sets are disjoint).
WentzellData join_wentzell(const MetricGraph& joined, const ShadowMap& sm,
                           const MetricGraph& g1, const WentzellData& d1,
                           const MetricGraph& g2, const WentzellData& d2);

} // namespace graphbm
