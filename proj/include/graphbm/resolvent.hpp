#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "graphbm/edge_function.hpp"
#include "graphbm/graph.hpp"
#include "graphbm/wentzell.hpp"

namespace graphbm {

// Lightweight function-on-graph view used to compose solver outputs without
// materializing profiles (e.g. nested resolvent applications).
struct EdgeFnView {
    std::function<double(EdgeId, double)> value;
    double sup_norm = 1.0;
    // Upper bound of the support/decay range on an external edge: integration
    // may stop once both the kernel and this hint are exhausted.
    std::function<double(EdgeId, double /*tol*/)> tail_cutoff;
    // Sample spacing for gridded data (quadrature step control), else +inf.
    std::function<double(EdgeId)> native_step;
};

EdgeFnView make_view(const MetricGraph& g, const EdgeFunction& f);

// Dirichlet (killed-at-vertices) resolvent kernel on one edge; zero when the
// points sit on different edges or one of them is a vertex.
double dirichlet_kernel(const MetricGraph& g, double lambda, const GraphPoint& xi,
                        const GraphPoint& eta);

// (R^D_lambda f)(xi) by composite Simpson quadrature.
double dirichlet_resolvent_apply(const MetricGraph& g, double lambda,
                                 const EdgeFunction& f, const GraphPoint& xi);

// E_xi[e^{-lambda H_V}; X(H_V) = v] for every vertex v (first-passage
// weights: sinh ratios on internal edges, exp on external ones). lambda = 0
// gives plain hitting probabilities.
std::vector<double> passage_weights(const MetricGraph& g, double lambda,
                                    const GraphPoint& xi);

// Same quantity under its probabilistic name.
inline std::vector<double> hitting_transform(const MetricGraph& g,
                                             const WentzellData&, double lambda,
                                             const GraphPoint& xi)
{
    return passage_weights(g, lambda, xi);
}

struct SolveDiagnostics {
    double lambda_used = 0.0;
    double abs_det = 0.0;
    double solve_residual = 0.0; // linear-system residual, relative
    int retries = 0;
};

// u = R_lambda f as the Dirichlet part plus the exponential boundary layer
// u_e = p_e + r_e e^{-kappa x}, u_i = p_i + r_i^+ e^{kappa x} + r_i^- e^{kappa(rho-x)}.
class ResolventSolution {
public:
    double lambda() const { return lambda_; }
    double kappa() const { return kappa_; }
    const SolveDiagnostics& diagnostics() const { return diag_; }

    // Coefficients in the spec layout ((r_e), (r_i+), (r_i-)).
    const Eigen::VectorXd& coefficients() const { return r_; }
    // Numerically stable layout: u_i = s0 e^{-kappa x} + s1 e^{-kappa (rho - x)}.
    const Eigen::VectorXd& stable_coefficients() const { return s_; }

    double vertex_value(VertexId v) const { return vertex_values_[v]; }
    const std::vector<double>& vertex_values() const { return vertex_values_; }

    double eval(const GraphPoint& p) const;
    double eval_edge(EdgeId e, double x) const;
    // Boundary-layer part alone (no quadrature; cheap).
    double homogeneous_part(EdgeId e, double x) const;

    EdgeFnView view() const;
    // View backed by per-edge sample grids with cubic interpolation: suited
    // for composing resolvents without nested quadrature.
    EdgeFnView cached_view() const;
    // Sampled profile representation (internal edges at spacing h; external
    // edges truncated where the solution falls below tail_tol).
    EdgeFunction to_edge_function(double h, double tail_tol = 1e-12) const;

    // Wentzell residual and f''-gap at every vertex, from semi-analytic
    // traces with refined quadrature for the Dirichlet part.
    std::vector<DomainResidual> boundary_residuals() const;

    // sup over interior sample points of |lambda u - u''/2 - f| with central
    // finite differences of step fd_h, on grids of `per_edge` points.
    double generator_residual(std::size_t per_edge, double fd_h) const;

private:
    friend ResolventSolution solve_resolvent_view(const MetricGraph&,
                                                  const WentzellData&, double,
                                                  EdgeFnView);
    const MetricGraph* g_ = nullptr;
    const WentzellData* data_ = nullptr;
    EdgeFnView f_;
    double lambda_ = 0.0;
    double kappa_ = 0.0;
    Eigen::VectorXd s_;
    Eigen::VectorXd r_;
    std::vector<double> vertex_values_;
    SolveDiagnostics diag_;
};

// Solves (lambda - 1/2 d^2/dx^2) u = f with the graph's Wentzell conditions.
// Retries lambda * (1 + 1e-6) up to three times if Z is singular. f must be
// bounded; growing profiles on external edges are rejected.
ResolventSolution solve_resolvent(const MetricGraph& g, const WentzellData& data,
                                  double lambda, const EdgeFunction& f);
ResolventSolution solve_resolvent_view(const MetricGraph& g, const WentzellData& data,
                                       double lambda, EdgeFnView f);

// Semigroup value U_t f at chosen points via the alternating inversion series
// sum_n ((-1)^{n+1}/n!) n lambda e^{n lambda t} R_{n lambda} f, compensated
// summation, truncated when the term norm drops below tol past n > e^{lambda t} + 10.
struct SemigroupResult {
    std::vector<double> values;
    int terms = 0;
};
SemigroupResult semigroup_apply(const MetricGraph& g, const WentzellData& data,
                                double t, const EdgeFunction& f, double lambda,
                                double tol, std::span<const GraphPoint> points);

struct FellerReport {
    struct ContractionRow {
        double lambda;
        double norm_ratio; // ||lambda R_lambda f|| / ||f||
    };
    struct IdentityRow {
        double lambda, mu;
        double residual; // sup |R_l f - R_m f - (m-l) R_l R_m f|
    };
    struct ConvergenceRow {
        double lambda;
        double deviation; // ||lambda R_lambda f - f||
    };
    std::vector<ContractionRow> contraction;
    std::vector<IdentityRow> identity;
    std::vector<ConvergenceRow> convergence;
    double min_value = 0.0;      // min of R_lambda f over samples, f >= 0
    double tail_sup = 0.0;       // decay of R_lambda f far out on external edges
    bool contraction_ok = false;
    bool convergence_monotone = false;
    bool positive_ok = false;
};

FellerReport feller_checks(const MetricGraph& g, const WentzellData& data,
                           std::span<const double> lambda_grid,
                           std::span<const EdgeFunction> f_suite,
                           bool with_identity = true);

} // namespace graphbm
