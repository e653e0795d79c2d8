#include "graphbm/resolvent.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace graphbm {

namespace {

constexpr double kKernelTailLog = 50.0; // exp(-50) ~ 2e-22

// sinh(kappa (rho - x)) / sinh(kappa rho), stable for large kappa rho.
double sinh_ratio_start(double kappa, double rho, double x)
{
    if (kappa == 0.0) return (rho - x) / rho;
    const double num = -std::expm1(-2.0 * kappa * (rho - x));
    const double den = -std::expm1(-2.0 * kappa * rho);
    return std::exp(-kappa * x) * num / den;
}

double sinh_ratio_end(double kappa, double rho, double x)
{
    return sinh_ratio_start(kappa, rho, rho - x);
}

// Dirichlet kernel on an internal edge, product form.
double kernel_internal(double kappa, double rho, double x, double y)
{
    const double lo = std::min(x, y);
    const double hi = std::max(x, y);
    const double num1 = -std::expm1(-2.0 * kappa * lo);
    const double num2 = -std::expm1(-2.0 * kappa * (rho - hi));
    const double den = -std::expm1(-2.0 * kappa * rho);
    return std::exp(-kappa * (hi - lo)) * num1 * num2 / (kappa * den);
}

double kernel_external(double kappa, double x, double y)
{
    return (std::exp(-kappa * std::abs(x - y)) - std::exp(-kappa * (x + y))) / kappa;
}

std::size_t interval_count(double a, double b, double target_step)
{
    if (b <= a) return 2;
    double n = std::ceil((b - a) / target_step);
    n = std::clamp(n, 64.0, 400000.0);
    auto out = static_cast<std::size_t>(n);
    if (out % 2) ++out;
    return out;
}

struct Quad {
    double kappa = 1.0;
    double refine = 1.0; // node multiplier for refined residual checks

    // Step control: well under the kernel length scale and the data spacing
    // (base h = 1/(128 kappa) puts composite Simpson error near 1e-10).
    double step(double native) const { return std::min(1.0 / (128.0 * kappa), native); }

    double integrate(const std::function<double(double)>& integrand, double a,
                     double b, double target_step) const
    {
        if (b <= a) return 0.0;
        return simpson(integrand, a, b, interval_count(a, b, target_step / refine));
    }
};

double native_step_of(const EdgeFnView& f, EdgeId e)
{
    return f.native_step ? f.native_step(e) : kInfinity;
}

} // namespace

EdgeFnView make_view(const MetricGraph& g, const EdgeFunction& f)
{
    auto keep = std::make_shared<EdgeFunction>(f);
    EdgeFnView view;
    view.value = [keep](EdgeId e, double x) { return keep->eval_edge(e, x); };
    view.sup_norm = f.sup_norm(g);
    view.tail_cutoff = [keep](EdgeId e, double tol) {
        return keep->profile(e).tail_cutoff(tol);
    };
    view.native_step = [keep](EdgeId e) { return keep->profile(e).native_step(); };
    return view;
}

double dirichlet_kernel(const MetricGraph& g, double lambda, const GraphPoint& xi_raw,
                        const GraphPoint& eta_raw)
{
    if (!(lambda > 0.0)) throw InvariantError("lambda must be positive");
    const GraphPoint xi = g.canonical(xi_raw);
    const GraphPoint eta = g.canonical(eta_raw);
    if (!xi.is_interior() || !eta.is_interior()) return 0.0;
    if (xi.edge != eta.edge) return 0.0;

    const double kappa = std::sqrt(2.0 * lambda);
    if (g.is_external(xi.edge)) return kernel_external(kappa, xi.x, eta.x);

    // Image sum, truncated at relative 1e-14.
    const double rho = g.length(xi.edge);
    const double x = xi.x, y = eta.x;
    auto term = [&](double u) { return std::exp(-kappa * std::abs(u)); };
    double sum = term(x - y) - term(x + y);
    for (int k = 1; k < 1000000; ++k) {
        const double shift = 2.0 * static_cast<double>(k) * rho;
        const double tk = term(x - y + shift) + term(x - y - shift)
                          - term(x + y + shift) - term(x + y - shift);
        sum += tk;
        if (std::abs(tk) < 1e-14 * std::max(std::abs(sum), 1e-300)) break;
    }
    return sum / kappa;
}

double dirichlet_resolvent_apply(const MetricGraph& g, double lambda,
                                 const EdgeFunction& f, const GraphPoint& xi_raw)
{
    if (!(lambda > 0.0)) throw InvariantError("lambda must be positive");
    const GraphPoint xi = g.canonical(xi_raw);
    if (xi.is_cemetery()) throw InvariantError("cemetery input");
    if (xi.is_vertex()) return 0.0;
    if (!f.bounded(g)) throw InvariantError("non-decaying f on an external edge");

    const double kappa = std::sqrt(2.0 * lambda);
    const EdgeId e = xi.edge;
    const Quad q{kappa, 1.0};
    const double step = q.step(f.profile(e).native_step());

    double a, b;
    std::function<double(double)> integrand;
    if (g.is_internal(e)) {
        const double rho = g.length(e);
        a = std::max(0.0, xi.x - kKernelTailLog / kappa);
        b = std::min(rho, xi.x + kKernelTailLog / kappa);
        integrand = [&g, &f, kappa, rho, &xi, e](double y) {
            return kernel_internal(kappa, rho, xi.x, y) * f.eval_edge(e, y);
        };
    } else {
        const double fcut = f.profile(e).tail_cutoff(1e-18);
        a = std::max(0.0, xi.x - kKernelTailLog / kappa);
        b = std::min(fcut, xi.x + kKernelTailLog / kappa);
        integrand = [&f, kappa, &xi, e](double y) {
            return kernel_external(kappa, xi.x, y) * f.eval_edge(e, y);
        };
    }
    if (xi.x > a && xi.x < b)
        return q.integrate(integrand, a, xi.x, step)
               + q.integrate(integrand, xi.x, b, step);
    return q.integrate(integrand, a, b, step);
}

std::vector<double> passage_weights(const MetricGraph& g, double lambda,
                                    const GraphPoint& xi_raw)
{
    if (lambda < 0.0) throw InvariantError("lambda must be nonnegative");
    const GraphPoint xi = g.canonical(xi_raw);
    if (!xi.is_interior())
        throw InvariantError("passage weights require an interior start point");

    const double kappa = std::sqrt(2.0 * lambda);
    std::vector<double> w(g.vertex_count(), 0.0);
    const EdgeId e = xi.edge;
    if (g.is_internal(e)) {
        const double rho = g.length(e);
        w[g.initial_vertex(e)] += sinh_ratio_start(kappa, rho, xi.x);
        w[g.terminal_vertex(e)] += sinh_ratio_end(kappa, rho, xi.x);
    } else {
        w[g.initial_vertex(e)] += std::exp(-kappa * xi.x);
    }
    return w;
}

// ---------------------------------------------------------------------------
// Resolvent solve
// ---------------------------------------------------------------------------

namespace {

struct TraceCoeffs {
    // Column indices and weights of a trace functional in the stable basis.
    int col0 = -1, col1 = -1;
    double w0 = 0.0, w1 = 0.0;
};

struct SolverTables {
    double kappa = 0.0;
    std::size_t ne = 0, ni = 0, n = 0;
    std::vector<double> rho;
    std::vector<double> edecay; // exp(-kappa rho_k)

    TraceCoeffs value(const MetricGraph& g, std::size_t slot) const
    {
        TraceCoeffs t;
        if (slot < ne) {
            t.col0 = static_cast<int>(slot);
            t.w0 = 1.0;
        } else if (slot < ne + ni) {
            const std::size_t k = slot - ne;
            t.col0 = static_cast<int>(ne + k);
            t.w0 = 1.0;
            t.col1 = static_cast<int>(ne + ni + k);
            t.w1 = edecay[k];
        } else {
            const std::size_t k = slot - ne - ni;
            t.col0 = static_cast<int>(ne + k);
            t.w0 = edecay[k];
            t.col1 = static_cast<int>(ne + ni + k);
            t.w1 = 1.0;
        }
        (void)g;
        return t;
    }

    TraceCoeffs inward_derivative(const MetricGraph& g, std::size_t slot) const
    {
        TraceCoeffs t = value(g, slot);
        if (slot < ne) {
            t.w0 *= -kappa;
        } else if (slot < ne + ni) {
            t.w0 *= -kappa;
            t.w1 *= kappa;
        } else {
            t.w0 *= kappa;
            t.w1 *= -kappa;
        }
        return t;
    }
};

void add_coeffs(Eigen::MatrixXd& m, Eigen::Index row, const TraceCoeffs& t, double scale)
{
    if (t.col0 >= 0) m(row, t.col0) += scale * t.w0;
    if (t.col1 >= 0) m(row, t.col1) += scale * t.w1;
}

double eval_coeffs(const Eigen::VectorXd& s, const TraceCoeffs& t)
{
    double out = 0.0;
    if (t.col0 >= 0) out += t.w0 * s(t.col0);
    if (t.col1 >= 0) out += t.w1 * s(t.col1);
    return out;
}

// 2 * integral of (first-passage weight density) * f over the edge of the
// incidence: the inward first-derivative trace of the Dirichlet part.
double dirichlet_derivative_trace(const MetricGraph& g, const EdgeFnView& f,
                                  double kappa, const Incidence& inc, const Quad& q)
{
    const EdgeId e = inc.edge;
    const double step = q.step(native_step_of(f, e));
    if (g.is_internal(e)) {
        const double rho = g.length(e);
        auto weight = [&](double y) {
            return inc.end == EdgeEnd::Start ? sinh_ratio_start(kappa, rho, y)
                                             : sinh_ratio_end(kappa, rho, y);
        };
        // The weight decays exponentially away from the incident end.
        double a = 0.0, b = rho;
        if (inc.end == EdgeEnd::Start)
            b = std::min(rho, kKernelTailLog / kappa);
        else
            a = std::max(0.0, rho - kKernelTailLog / kappa);
        return 2.0
               * q.integrate([&](double y) { return weight(y) * f.value(e, y); }, a, b,
                             step);
    }
    const double fcut = f.tail_cutoff ? f.tail_cutoff(e, 1e-18) : kInfinity;
    const double b = std::min(fcut, kKernelTailLog / kappa);
    return 2.0
           * q.integrate([&](double y) { return std::exp(-kappa * y) * f.value(e, y); },
                         0.0, b, step);
}

double dirichlet_eval(const MetricGraph& g, const EdgeFnView& f, double kappa,
                      EdgeId e, double x, const Quad& q)
{
    const double step = q.step(native_step_of(f, e));
    double a, b;
    std::function<double(double)> integrand;
    if (g.is_internal(e)) {
        const double rho = g.length(e);
        a = std::max(0.0, x - kKernelTailLog / kappa);
        b = std::min(rho, x + kKernelTailLog / kappa);
        integrand = [&g, &f, kappa, rho, x, e](double y) {
            return kernel_internal(kappa, rho, x, y) * f.value(e, y);
        };
    } else {
        const double fcut = f.tail_cutoff ? f.tail_cutoff(e, 1e-18) : kInfinity;
        a = std::max(0.0, x - kKernelTailLog / kappa);
        b = std::min(fcut, x + kKernelTailLog / kappa);
        integrand = [&f, kappa, x, e](double y) {
            return kernel_external(kappa, x, y) * f.value(e, y);
        };
    }
    // The kernel has a derivative kink at y = x; integrate each side alone.
    if (x > a && x < b)
        return q.integrate(integrand, a, x, step) + q.integrate(integrand, x, b, step);
    return q.integrate(integrand, a, b, step);
}

} // namespace

ResolventSolution solve_resolvent(const MetricGraph& g, const WentzellData& data,
                                  double lambda, const EdgeFunction& f)
{
    if (!f.bounded(g)) throw InvariantError("non-decaying f on an external edge");
    return solve_resolvent_view(g, data, lambda, make_view(g, f));
}

ResolventSolution solve_resolvent_view(const MetricGraph& g, const WentzellData& data,
                                       double lambda, EdgeFnView f)
{
    if (!(lambda > 0.0)) throw InvariantError("lambda must be positive");
    if (g.has_tadpole())
        throw InvariantError("graph has a tadpole; eliminate it before solving");

    const std::size_t n = g.trace_size();
    const std::size_t ne = g.external_count();
    const std::size_t ni = g.internal_count();

    ResolventSolution sol;
    sol.g_ = &g;
    sol.data_ = &data;
    sol.f_ = std::move(f);
    sol.lambda_ = lambda;

    double lam = lambda;
    std::string last_error;
    for (int attempt = 0; attempt <= 3; ++attempt, lam = lambda * std::pow(1.0 + 1e-6, attempt)) {
        const double kappa = std::sqrt(2.0 * lam);
        SolverTables tab;
        tab.kappa = kappa;
        tab.ne = ne;
        tab.ni = ni;
        tab.n = n;
        tab.rho.resize(ni);
        tab.edecay.resize(ni);
        for (std::size_t k = 0; k < ni; ++k) {
            tab.rho[k] = g.length(static_cast<EdgeId>(ne + k));
            tab.edecay[k] = std::exp(-kappa * tab.rho[k]);
        }
        const Quad quad{kappa, 1.0};

        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        Eigen::Index row = 0;
        for (VertexId v = 0; v < g.vertex_count(); ++v) {
            const VertexData& d = data.at(v);
            const auto& inc = g.incident(v);
            const std::size_t s0 = g.trace_slot(inc[0]);
            const double f_first =
                sol.f_.value(inc[0].edge,
                             inc[0].end == EdgeEnd::Start ? 0.0 : g.length(inc[0].edge));

            // Wentzell row.
            add_coeffs(m, row, tab.value(g, s0), d.a + 0.5 * d.c * kappa * kappa);
            double rhs0 = d.c * f_first;
            for (std::size_t j = 0; j < inc.size(); ++j) {
                add_coeffs(m, row, tab.inward_derivative(g, g.trace_slot(inc[j])),
                           -d.b[j]);
                if (d.b[j] != 0.0)
                    rhs0 += d.b[j]
                            * dirichlet_derivative_trace(g, sol.f_, kappa, inc[j], quad);
            }
            rhs(row) = rhs0;
            ++row;

            // Second-derivative continuity rows.
            for (std::size_t j = 1; j < inc.size(); ++j) {
                const std::size_t sp = g.trace_slot(inc[j - 1]);
                const std::size_t sc = g.trace_slot(inc[j]);
                add_coeffs(m, row, tab.value(g, sp), kappa * kappa);
                add_coeffs(m, row, tab.value(g, sc), -kappa * kappa);
                const double fp =
                    sol.f_.value(inc[j - 1].edge, inc[j - 1].end == EdgeEnd::Start
                                                      ? 0.0
                                                      : g.length(inc[j - 1].edge));
                const double fc = sol.f_.value(
                    inc[j].edge,
                    inc[j].end == EdgeEnd::Start ? 0.0 : g.length(inc[j].edge));
                rhs(row) = 2.0 * (fp - fc);
                ++row;
            }
        }

        Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
        if (!lu.isInvertible()) {
            last_error = "singular boundary system at lambda = " + std::to_string(lam);
            continue;
        }
        const Eigen::VectorXd s = lu.solve(rhs);
        const double resid = (m * s - rhs).cwiseAbs().maxCoeff()
                             / std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
        if (!std::isfinite(resid) || resid > 1e-8) {
            last_error = "ill-conditioned boundary system at lambda = "
                         + std::to_string(lam);
            continue;
        }

        sol.kappa_ = kappa;
        sol.s_ = s;
        sol.r_.resize(static_cast<Eigen::Index>(n));
        for (std::size_t j = 0; j < ne; ++j) sol.r_(static_cast<Eigen::Index>(j)) = s(static_cast<Eigen::Index>(j));
        for (std::size_t k = 0; k < ni; ++k) {
            // r+ = s_rho e^{-kappa rho}, r- = s_0 e^{-kappa rho}.
            sol.r_(static_cast<Eigen::Index>(ne + k)) =
                s(static_cast<Eigen::Index>(ne + ni + k)) * tab.edecay[k];
            sol.r_(static_cast<Eigen::Index>(ne + ni + k)) =
                s(static_cast<Eigen::Index>(ne + k)) * tab.edecay[k];
        }
        sol.vertex_values_.resize(g.vertex_count());
        for (VertexId v = 0; v < g.vertex_count(); ++v) {
            const std::size_t slot = g.trace_slot(g.incident(v).front());
            sol.vertex_values_[v] = eval_coeffs(s, tab.value(g, slot));
        }
        sol.diag_.lambda_used = lam;
        sol.diag_.abs_det = std::abs(lu.determinant());
        sol.diag_.solve_residual = resid;
        sol.diag_.retries = attempt;
        return sol;
    }
    throw SolveError(last_error.empty() ? "resolvent solve failed" : last_error);
}

double ResolventSolution::homogeneous_part(EdgeId e, double x) const
{
    const std::size_t ne = g_->external_count();
    if (g_->is_external(e)) return s_(static_cast<Eigen::Index>(e)) * std::exp(-kappa_ * x);
    const std::size_t k = e - ne;
    const double rho = g_->length(e);
    return s_(static_cast<Eigen::Index>(ne + k)) * std::exp(-kappa_ * x)
           + s_(static_cast<Eigen::Index>(ne + g_->internal_count() + k))
                 * std::exp(-kappa_ * (rho - x));
}

double ResolventSolution::eval_edge(EdgeId e, double x) const
{
    const Quad quad{kappa_, 1.0};
    return dirichlet_eval(*g_, f_, kappa_, e, x, quad) + homogeneous_part(e, x);
}

double ResolventSolution::eval(const GraphPoint& p_raw) const
{
    const GraphPoint p = g_->canonical(p_raw);
    if (p.is_cemetery()) return 0.0;
    if (p.is_vertex()) return vertex_values_[p.vertex];
    return eval_edge(p.edge, p.x);
}

EdgeFnView ResolventSolution::view() const
{
    auto keep = std::make_shared<ResolventSolution>(*this);
    EdgeFnView v;
    v.value = [keep](EdgeId e, double x) { return keep->eval_edge(e, x); };
    double sup = 0.0;
    for (double val : vertex_values_) sup = std::max(sup, std::abs(val));
    v.sup_norm = std::max(sup, f_.sup_norm / lambda_);
    const double kappa = kappa_;
    const EdgeFnView inner = f_;
    v.tail_cutoff = [keep, kappa, inner](EdgeId e, double tol) {
        const double amp = std::abs(keep->stable_coefficients()(
            static_cast<Eigen::Index>(e)));
        const double layer = amp > tol ? std::log(amp / tol) / kappa : 0.0;
        const double fc = inner.tail_cutoff ? inner.tail_cutoff(e, tol) : kInfinity;
        if (fc == kInfinity) return kInfinity;
        return std::max(layer, fc + kKernelTailLog / kappa);
    };
    v.native_step = nullptr;
    return v;
}

EdgeFnView ResolventSolution::cached_view() const
{
    struct Grid {
        double step = 0.0;
        std::vector<double> vals;
    };
    auto grids = std::make_shared<std::vector<Grid>>(g_->edge_count());
    auto keep = std::make_shared<ResolventSolution>(*this);
    const EdgeFnView direct = view();
    for (EdgeId e = 0; e < g_->edge_count(); ++e) {
        double extent = g_->is_internal(e)
                            ? g_->length(e)
                            : std::min(direct.tail_cutoff(e, 1e-13), 200.0);
        if (!(extent > 0.0) || !std::isfinite(extent)) extent = 1.0;
        const double step = 1.0 / (256.0 * kappa_);
        const auto count =
            std::max<std::size_t>(static_cast<std::size_t>(std::ceil(extent / step)) + 1, 4);
        Grid grid;
        grid.step = extent / static_cast<double>(count - 1);
        grid.vals.resize(count);
        for (std::size_t i = 0; i < count; ++i)
            grid.vals[i] = eval_edge(e, grid.step * static_cast<double>(i));
        (*grids)[e] = std::move(grid);
    }
    EdgeFnView v = direct;
    v.value = [grids, keep](EdgeId e, double x) {
        const auto& grid = (*grids)[e];
        const double last = grid.step * static_cast<double>(grid.vals.size() - 1);
        if (x >= last) return keep->homogeneous_part(e, x);
        // Four-point Lagrange interpolation on the uniform grid.
        const double pos = x / grid.step;
        auto i0 = static_cast<std::ptrdiff_t>(pos) - 1;
        i0 = std::clamp<std::ptrdiff_t>(i0, 0,
                                        static_cast<std::ptrdiff_t>(grid.vals.size()) - 4);
        const double t = pos - static_cast<double>(i0);
        const double w0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
        const double w1 = t * (t - 2.0) * (t - 3.0) / 2.0;
        const double w2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
        const double w3 = t * (t - 1.0) * (t - 2.0) / 6.0;
        const auto i = static_cast<std::size_t>(i0);
        return w0 * grid.vals[i] + w1 * grid.vals[i + 1] + w2 * grid.vals[i + 2]
               + w3 * grid.vals[i + 3];
    };
    v.native_step = nullptr; // smooth enough for the closed-form step control
    return v;
}

EdgeFunction ResolventSolution::to_edge_function(double h, double tail_tol) const
{
    const MetricGraph& g = *g_;
    std::vector<EdgeProfile> profiles(g.edge_count());
    const EdgeFnView self = view();
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        double upto = g.is_internal(e) ? g.length(e) : self.tail_cutoff(e, tail_tol);
        if (!(upto > 0.0)) upto = h;
        const auto count = static_cast<std::size_t>(std::ceil(upto / h)) + 1;
        std::vector<double> vals(count);
        const double step = upto / static_cast<double>(count - 1);
        for (std::size_t i = 0; i < count; ++i)
            vals[i] = eval_edge(e, step * static_cast<double>(i));
        profiles[e] = EdgeProfile::samples(step, std::move(vals));
    }
    return EdgeFunction(g, std::move(profiles));
}

std::vector<DomainResidual> ResolventSolution::boundary_residuals() const
{
    const MetricGraph& g = *g_;
    const std::size_t n = g.trace_size();
    SolverTables tab;
    tab.kappa = kappa_;
    tab.ne = g.external_count();
    tab.ni = g.internal_count();
    tab.n = n;
    tab.rho.resize(tab.ni);
    tab.edecay.resize(tab.ni);
    for (std::size_t k = 0; k < tab.ni; ++k) {
        tab.rho[k] = g.length(static_cast<EdgeId>(tab.ne + k));
        tab.edecay[k] = std::exp(-kappa_ * tab.rho[k]);
    }
    const Quad refined{kappa_, 2.0};

    Eigen::VectorXd fv(n), dfv(n), ddfv(n);
    for (std::size_t slot = 0; slot < n; ++slot) {
        const Incidence inc = g.incidence_of_slot(slot);
        const double val = eval_coeffs(s_, tab.value(g, slot));
        const double f_at = f_.value(inc.edge,
                                     inc.end == EdgeEnd::Start ? 0.0
                                                               : g.length(inc.edge));
        fv(static_cast<Eigen::Index>(slot)) = val;
        dfv(static_cast<Eigen::Index>(slot)) =
            eval_coeffs(s_, tab.inward_derivative(g, slot))
            + dirichlet_derivative_trace(g, f_, kappa_, inc, refined);
        ddfv(static_cast<Eigen::Index>(slot)) = 2.0 * (lambda_ * val - f_at);
    }
    return check_domain_membership(g, *data_, fv, dfv, ddfv);
}

double ResolventSolution::generator_residual(std::size_t per_edge, double fd_h) const
{
    const MetricGraph& g = *g_;
    double worst = 0.0;
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        const double upto = g.is_internal(e) ? g.length(e)
                                             : std::min(5.0, 20.0 / kappa_);
        for (std::size_t i = 1; i + 1 < per_edge + 1; ++i) {
            const double x = upto * static_cast<double>(i) / static_cast<double>(per_edge);
            if (x - fd_h <= 0.0 || x + fd_h >= upto + (g.is_external(e) ? fd_h * 2 : 0.0))
                continue;
            const double um = eval_edge(e, x - fd_h);
            const double u0 = eval_edge(e, x);
            const double up = eval_edge(e, x + fd_h);
            const double second = (up - 2.0 * u0 + um) / (fd_h * fd_h);
            const double res = lambda_ * u0 - 0.5 * second - f_.value(e, x);
            worst = std::max(worst, std::abs(res));
        }
    }
    return worst;
}

SemigroupResult semigroup_apply(const MetricGraph& g, const WentzellData& data,
                                double t, const EdgeFunction& f, double lambda,
                                double tol, std::span<const GraphPoint> points)
{
    if (!(lambda > 0.0)) throw InvariantError("lambda must be positive");
    if (lambda * t > 3.0)
        throw InvariantError("lambda * t outside the stability window (<= 3)");

    SemigroupResult out;
    out.values.assign(points.size(), 0.0);
    std::vector<double> comp(points.size(), 0.0); // Kahan compensation
    const EdgeFnView view = make_view(g, f);
    const double n_min = std::exp(lambda * t) + 10.0;

    for (int n = 1; n <= 80; ++n) {
        const double ln_coeff = static_cast<double>(n) * lambda * t
                                + std::log(static_cast<double>(n) * lambda)
                                - std::lgamma(static_cast<double>(n) + 1.0);
        const double coeff = (n % 2 ? 1.0 : -1.0) * std::exp(ln_coeff);
        const ResolventSolution sol =
            solve_resolvent_view(g, data, static_cast<double>(n) * lambda, view);
        double term_max = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double term = coeff * sol.eval(points[i]);
            term_max = std::max(term_max, std::abs(term));
            const double y = term - comp[i];
            const double s = out.values[i] + y;
            comp[i] = (s - out.values[i]) - y;
            out.values[i] = s;
        }
        out.terms = n;
        if (static_cast<double>(n) > n_min && term_max < tol) return out;
    }
    throw SolveError("semigroup inversion series did not reach tolerance");
}

FellerReport feller_checks(const MetricGraph& g, const WentzellData& data,
                           std::span<const double> lambda_grid,
                           std::span<const EdgeFunction> f_suite, bool with_identity)
{
    FellerReport rep;
    if (f_suite.empty() || lambda_grid.empty()) return rep;

    // Sample grid.
    std::vector<GraphPoint> probes;
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        const double upto = g.is_internal(e) ? g.length(e) : 4.0;
        for (int i = 1; i < 16; ++i)
            probes.push_back(
                GraphPoint::interior(e, upto * static_cast<double>(i) / 16.0));
    }
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        probes.push_back(GraphPoint::at_vertex(v));

    auto sup_at_probes = [&](auto&& fn) {
        double m = 0.0;
        for (const auto& p : probes) m = std::max(m, std::abs(fn(p)));
        return m;
    };

    rep.contraction_ok = true;
    rep.positive_ok = true;
    rep.min_value = kInfinity;
    rep.tail_sup = 0.0;

    for (const EdgeFunction& f : f_suite) {
        const double fsup = f.sup_norm(g);
        bool nonneg = true;
        for (const auto& p : probes)
            if (f.eval(g, p) < 0.0) nonneg = false;

        for (double lambda : lambda_grid) {
            const ResolventSolution sol = solve_resolvent(g, data, lambda, f);
            const double norm =
                sup_at_probes([&](const GraphPoint& p) { return sol.eval(p); });
            rep.contraction.push_back({lambda, lambda * norm / std::max(fsup, 1e-300)});
            if (lambda * norm > fsup * (1.0 + 1e-9)) rep.contraction_ok = false;
            if (nonneg) {
                for (const auto& p : probes)
                    rep.min_value = std::min(rep.min_value, sol.eval(p));
                if (rep.min_value < -1e-10 * fsup) rep.positive_ok = false;
            }
            for (EdgeId e = 0; e < g.external_count(); ++e) {
                const double far = 30.0 / std::sqrt(2.0 * lambda) + 5.0;
                rep.tail_sup = std::max(rep.tail_sup, std::abs(sol.eval_edge(e, far)));
            }
        }

        // Resolvent identity over all ordered pairs.
        if (with_identity)
            for (std::size_t i = 0; i < lambda_grid.size(); ++i)
                for (std::size_t j = i + 1; j < lambda_grid.size(); ++j) {
                    const double la = lambda_grid[i], mu = lambda_grid[j];
                    const ResolventSolution ra = solve_resolvent(g, data, la, f);
                    const ResolventSolution rb = solve_resolvent(g, data, mu, f);
                    const ResolventSolution rab =
                        solve_resolvent_view(g, data, la, rb.cached_view());
                    double resid = 0.0;
                    for (const auto& p : probes)
                        resid = std::max(resid, std::abs(ra.eval(p) - rb.eval(p)
                                                         - (mu - la) * rab.eval(p)));
                    rep.identity.push_back({la, mu, resid});
                }
    }

    // lambda R_lambda f -> f along the grid for the first test function.
    const EdgeFunction& f0 = f_suite.front();
    for (double lambda : lambda_grid) {
        const ResolventSolution sol = solve_resolvent(g, data, lambda, f0);
        const double dev = sup_at_probes(
            [&](const GraphPoint& p) { return lambda * sol.eval(p) - f0.eval(g, p); });
        rep.convergence.push_back({lambda, dev});
    }
    rep.convergence_monotone = true;
    for (std::size_t i = 1; i < rep.convergence.size(); ++i)
        if (rep.convergence[i].deviation > rep.convergence[i - 1].deviation)
            rep.convergence_monotone = false;

    return rep;
}

} // namespace graphbm
