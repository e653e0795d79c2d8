#include <doctest.h>

#include <complex>
#include <random>

#include "helpers.hpp"

using namespace graphbm;
using testutil::Bundle;

namespace {

// Determinant oracle: full-pivot Gaussian elimination in long double complex
// arithmetic, independent of Eigen.
std::complex<long double> det_oracle(std::vector<std::vector<std::complex<long double>>> m)
{
    const std::size_t n = m.size();
    std::complex<long double> det = 1.0L;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pr = col, pc = col;
        long double best = 0.0L;
        for (std::size_t r = col; r < n; ++r)
            for (std::size_t c = col; c < n; ++c)
                if (std::abs(m[r][c]) > best) {
                    best = std::abs(m[r][c]);
                    pr = r;
                    pc = c;
                }
        if (best == 0.0L) return 0.0L;
        if (pr != col) {
            std::swap(m[pr], m[col]);
            det = -det;
        }
        if (pc != col) {
            for (std::size_t r = 0; r < n; ++r) std::swap(m[r][pc], m[r][col]);
            det = -det;
        }
        det *= m[col][col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const auto f = m[r][col] / m[col][col];
            for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
        }
    }
    return det;
}

std::complex<long double> det_oracle_eigen(const Eigen::MatrixXcd& z)
{
    std::vector<std::vector<std::complex<long double>>> m(
        z.rows(), std::vector<std::complex<long double>>(z.cols()));
    for (Eigen::Index r = 0; r < z.rows(); ++r)
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            m[r][c] = std::complex<long double>(z(r, c).real(), z(r, c).imag());
    return det_oracle(std::move(m));
}

Bundle random_bundle(std::mt19937& gen)
{
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    // 3 vertices, a couple of internal edges, a few external ones.
    MetricGraph g = MetricGraph::build(
        {"a", "b", "c"},
        {{"i1", "a", "b", 0.7}, {"i2", "b", "c", 1.3}, {"i3", "a", "c", 1.0}},
        {{"e1", "a"}, {"e2", "b"}});
    std::vector<VertexData> raw(3);
    for (VertexId v = 0; v < 3; ++v) {
        raw[v].a = 0.5 * uni(gen);
        raw[v].c = uni(gen);
        raw[v].b.resize(g.incident(v).size());
        for (auto& b : raw[v].b) b = uni(gen);
    }
    WentzellData w = WentzellData::validate_and_normalize(g, std::move(raw));
    return {std::move(g), std::move(w)};
}

// BC-row oracle: apply the Wentzell and continuity conditions directly to the
// exponential basis functions, one coefficient at a time.
Eigen::MatrixXcd z_oracle(const MetricGraph& g, const WentzellData& d,
                          std::complex<double> kappa)
{
    const std::size_t n = g.trace_size();
    const std::size_t ne = g.external_count();
    const std::size_t ni = g.internal_count();
    using C = std::complex<double>;

    // Traces of the basis function for coefficient j at a given slot.
    auto traces = [&](std::size_t j, std::size_t slot) {
        struct T {
            C val{0.0}, der{0.0}, dd{0.0};
        } t;
        const Incidence inc = g.incidence_of_slot(slot);
        if (j < ne) {
            if (inc.edge != j) return t;
            // f = e^{-kappa x} on external edge j; slot is its anchor.
            t.val = 1.0;
            t.der = -kappa;
            t.dd = kappa * kappa;
            return t;
        }
        const bool plus = j < ne + ni;
        const std::size_t k = plus ? j - ne : j - ne - ni;
        if (inc.edge != ne + k) return t;
        const double rho = g.length(static_cast<EdgeId>(ne + k));
        const C erho = std::exp(kappa * rho);
        if (plus) {
            // f = e^{kappa x}
            if (inc.end == EdgeEnd::Start) {
                t.val = 1.0;
                t.der = kappa;
                t.dd = kappa * kappa;
            } else {
                t.val = erho;
                t.der = -kappa * erho; // inward derivative at the terminal end
                t.dd = kappa * kappa * erho;
            }
        } else {
            // f = e^{kappa (rho - x)}
            if (inc.end == EdgeEnd::Start) {
                t.val = erho;
                t.der = -kappa * erho;
                t.dd = kappa * kappa * erho;
            } else {
                t.val = 1.0;
                t.der = kappa;
                t.dd = kappa * kappa;
            }
        }
        return t;
    };

    Eigen::MatrixXcd rows = Eigen::MatrixXcd::Zero(n, n);
    std::size_t q = 0;
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        const auto& inc = g.incident(v);
        const VertexData& vd = d.at(v);
        for (std::size_t j = 0; j < n; ++j) {
            const auto t0 = traces(j, g.trace_slot(inc[0]));
            C row = vd.a * t0.val + 0.5 * vd.c * t0.dd;
            for (std::size_t l = 0; l < inc.size(); ++l)
                row -= vd.b[l] * traces(j, g.trace_slot(inc[l])).der;
            rows(q, j) = row;
        }
        for (std::size_t l = 1; l < inc.size(); ++l) {
            for (std::size_t j = 0; j < n; ++j)
                rows(q + l, j) = traces(j, g.trace_slot(inc[l - 1])).dd
                                 - traces(j, g.trace_slot(inc[l])).dd;
        }
        q += inc.size();
    }
    return rows;
}

} // namespace

TEST_CASE("validate_and_normalize rescales and rejects bad data")
{
    Bundle star = testutil::star(3, 0.0, 0.0, {1.0, 1.0, 1.0});
    const VertexData& d = star.data.at(0);
    CHECK(d.b[0] == doctest::Approx(1.0 / 3.0));
    CHECK(d.a + d.b[0] + d.b[1] + d.b[2] + d.c == doctest::Approx(1.0).epsilon(1e-12));

    // Trap data is valid.
    const Bundle trap = testutil::star(1, 0.0, 1.0, {0.0});
    CHECK(trap.data.at(0).c == doctest::Approx(1.0));

    // The excluded corner (1, 0, ..., 0).
    const MetricGraph g = MetricGraph::build({"v"}, {}, {{"e", "v"}});
    {
        std::vector<VertexData> raw{{1.0, 0.0, {0.0}}};
        CHECK_THROWS_AS(WentzellData::validate_and_normalize(g, std::move(raw)),
                        InvariantError);
    }
    {
        std::vector<VertexData> raw{{-0.1, 0.5, {0.6}}};
        CHECK_THROWS_AS(WentzellData::validate_and_normalize(g, std::move(raw)),
                        InvariantError);
    }
    {
        std::vector<VertexData> raw{{0.0, 0.0, {0.0}}};
        CHECK_THROWS_AS(WentzellData::validate_and_normalize(g, std::move(raw)),
                        InvariantError);
    }
}

TEST_CASE("classify_vertex covers the three regimes")
{
    const Bundle trap = testutil::star(2, 0.0, 1.0, {0.0, 0.0});
    CHECK(classify_vertex(trap.graph, trap.data, 0).kind == VertexKind::Trap);

    const Bundle hold = testutil::star(2, 0.5, 0.5, {0.0, 0.0});
    const VertexClass hc = classify_vertex(hold.graph, hold.data, 0);
    CHECK(hc.kind == VertexKind::ExponentialHolding);
    CHECK(hc.holding_rate == doctest::Approx(1.0));

    const Bundle inst = testutil::star(2, 0.2, 0.2, {0.3, 0.3});
    const VertexClass ic = classify_vertex(inst.graph, inst.data, 0);
    CHECK(ic.kind == VertexKind::Instantaneous);
    CHECK(ic.weights[0] == doctest::Approx(0.5));
    CHECK(ic.weights[1] == doctest::Approx(0.5));
    CHECK(ic.stickiness == doctest::Approx(1.0 / 3.0));
    CHECK(ic.kill_rate == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("assemble: two-edge star with standard conditions")
{
    const Bundle b = testutil::star(2, 0.0, 0.0, {1.0, 1.0});
    const BoundaryMatrices m = assemble(b.graph, b.data);
    REQUIRE(m.n == 2);
    CHECK(m.A.isZero(0));
    CHECK(m.B(0, 0) == doctest::Approx(-0.5));
    CHECK(m.B(0, 1) == doctest::Approx(-0.5));
    CHECK(m.C(0, 0) == doctest::Approx(0.0));
    CHECK(m.C(1, 0) == doctest::Approx(1.0));
    CHECK(m.C(1, 1) == doctest::Approx(-1.0));
}

TEST_CASE("assemble: interval graph has the identity permutation")
{
    const Bundle b = testutil::interval(1.0);
    const BoundaryMatrices m = assemble(b.graph, b.data);
    REQUIRE(m.n == 2);
    CHECK(m.slot_of_row[0] == 0);
    CHECK(m.slot_of_row[1] == 1);
    // Trap blocks: A = B = 0, C(v) top-left = 1/2.
    CHECK(m.A.isZero(0));
    CHECK(m.B.isZero(0));
    CHECK(m.C(0, 0) == doctest::Approx(0.5));
    CHECK(m.C(1, 1) == doctest::Approx(0.5));
    CHECK(assemble(b.graph, b.data).permutation().isApprox(
        Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("assemble rejects tadpoles")
{
    const MetricGraph g =
        MetricGraph::build({"v"}, {{"loop", "v", "v", 1.0}}, {{"e", "v"}});
    std::vector<VertexData> raw{{0.0, 0.0, {1.0, 1.0, 1.0}}};
    const WentzellData d = WentzellData::validate_and_normalize(g, std::move(raw));
    CHECK_THROWS_AS(assemble(g, d), InvariantError);
}

TEST_CASE("z_matrix without internal edges reduces to A - kappa B + kappa^2 C")
{
    const Bundle b = testutil::star(3, 0.1, 0.3, {0.2, 0.2, 0.2});
    const BoundaryMatrices m = assemble(b.graph, b.data);
    const std::complex<double> kappa(1.7, 0.0);
    const Eigen::MatrixXcd z = z_matrix(m, kappa);
    const Eigen::MatrixXcd expect = (m.A - kappa.real() * m.B + kappa.real() * kappa.real() * m.C)
                                        .cast<std::complex<double>>();
    CHECK((z - expect).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("z_matrix equals the boundary-condition oracle entrywise")
{
    std::mt19937 gen(42);
    for (int rep = 0; rep < 5; ++rep) {
        const Bundle b = random_bundle(gen);
        const BoundaryMatrices m = assemble(b.graph, b.data);
        std::uniform_real_distribution<double> uni(-2.0, 2.0);
        for (int k = 0; k < 4; ++k) {
            const std::complex<double> kappa(uni(gen), uni(gen));
            const Eigen::MatrixXcd z = z_matrix(m, kappa);
            const Eigen::MatrixXcd oracle = z_oracle(b.graph, b.data, kappa);
            // Oracle rows are in vertex-major order; permute before comparing.
            double worst = 0.0;
            for (std::size_t q = 0; q < m.n; ++q)
                worst = std::max(worst, (z.row(m.slot_of_row[q]) - oracle.row(q))
                                            .cwiseAbs()
                                            .maxCoeff());
            CHECK(worst < 1e-12 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("det Z matches the long double elimination oracle")
{
    std::mt19937 gen(11);
    const Bundle b = random_bundle(gen);
    const BoundaryMatrices m = assemble(b.graph, b.data);
    std::uniform_real_distribution<double> uni(0.2, 2.5);
    for (int k = 0; k < 20; ++k) {
        const std::complex<double> kappa(uni(gen), uni(gen) - 1.35);
        const Eigen::MatrixXcd z = z_matrix(m, kappa);
        const double det = std::abs(z.determinant());
        const double oracle = static_cast<double>(std::abs(det_oracle_eigen(z)));
        CHECK(det == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("vertex block determinant factorization")
{
    // det(A(v) + eps kappa B(v) + kappa^2 C(v))
    //   = (a - eps kappa sum b + kappa^2 c / 2) (-kappa^2)^{m-1}.
    std::mt19937 gen(3);
    std::uniform_real_distribution<double> uni(0.05, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t deg = 1 + gen() % 5;
        std::vector<double> bw(deg);
        for (auto& x : bw) x = uni(gen);
        const Bundle b = testutil::star(deg, uni(gen), uni(gen), bw);
        const VertexData& d = b.data.at(0);
        const Eigen::MatrixXd A = vertex_block_A(b.graph, b.data, 0);
        const Eigen::MatrixXd B = vertex_block_B(b.graph, b.data, 0);
        const Eigen::MatrixXd C = vertex_block_C(b.graph, b.data, 0);
        double bsum = 0.0;
        for (double x : d.b) bsum += x;
        for (int k = 0; k < 5; ++k) {
            const std::complex<double> kappa(uni(gen) * 2.0, uni(gen) - 0.5);
            for (const double eps : {1.0, -1.0}) {
                const Eigen::MatrixXcd blk = A.cast<std::complex<double>>()
                                             + eps * kappa * B.cast<std::complex<double>>()
                                             + kappa * kappa * C.cast<std::complex<double>>();
                const std::complex<double> expect =
                    (d.a - eps * kappa * bsum + 0.5 * kappa * kappa * d.c)
                    * std::pow(-kappa * kappa, static_cast<double>(deg - 1));
                CHECK(std::abs(blk.determinant() - expect)
                      < 1e-10 * std::max(1.0, std::abs(expect)));
            }
        }
    }
}

TEST_CASE("find_invertible_kappa reports invertibility and the kappa = 0 degeneracy")
{
    const Bundle star = testutil::star(3, 0.0, 0.0, {1.0, 1.0, 1.0});
    const BoundaryMatrices m = assemble(star.graph, star.data);
    const KappaReport rep = find_invertible_kappa(m, 0.5);
    CHECK(rep.invertible);
    CHECK(rep.kappa == doctest::Approx(1.0));
    CHECK(rep.retries == 0);

    // Trap-only graph: invertible at every positive kappa.
    const Bundle trap = testutil::interval(1.0);
    const BoundaryMatrices mt = assemble(trap.graph, trap.data);
    for (double lambda : {0.1, 0.5, 3.0, 40.0})
        CHECK(find_invertible_kappa(mt, lambda).invertible);

    // kappa = 0 is singular when some a_v = 0.
    const Eigen::MatrixXcd z0 = z_matrix(m, 0.0);
    CHECK(std::abs(z0.determinant()) < 1e-12);
    CHECK_THROWS_AS(find_invertible_kappa(m, 0.0), InvariantError);
}

TEST_CASE("edge relabeling leaves |det Z| unchanged")
{
    // Same star, externals listed in a different order.
    const Bundle b1 = testutil::star(3, 0.1, 0.2, {0.4, 0.2, 0.1});
    MetricGraph g2 = MetricGraph::build({"v"}, {},
                                        {{"e3", "v"}, {"e1", "v"}, {"e2", "v"}});
    // b entries follow the new incidence order: e3, e1, e2.
    std::vector<VertexData> raw{{0.1, 0.2, {0.1, 0.4, 0.2}}};
    const WentzellData d2 = WentzellData::validate_and_normalize(g2, std::move(raw));
    const BoundaryMatrices m1 = assemble(b1.graph, b1.data);
    const BoundaryMatrices m2 = assemble(g2, d2);
    for (double kappa : {0.3, 1.0, 2.4}) {
        const double det1 = std::abs(z_matrix(m1, kappa).determinant());
        const double det2 = std::abs(z_matrix(m2, kappa).determinant());
        CHECK(det1 == doctest::Approx(det2).epsilon(1e-10));
    }
}

TEST_CASE("check_domain_membership flags the exponential ansatz on a standard star")
{
    const Bundle b = testutil::star(3, 0.0, 0.0, {1.0, 1.0, 1.0});
    const MetricGraph& g = b.graph;
    const double kappa = 1.3;

    // f identically zero.
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
    auto res0 = check_domain_membership(g, b.data, zero, zero, zero);
    CHECK(res0[0].wentzell_residual == doctest::Approx(0.0));
    CHECK(res0[0].second_derivative_gap == doctest::Approx(0.0));

    // f = e^{-kappa x} on every edge: residual kappa * sum b.
    Eigen::VectorXd f(3), df(3), ddf(3);
    for (int i = 0; i < 3; ++i) {
        f(i) = 1.0;
        df(i) = -kappa;
        ddf(i) = kappa * kappa;
    }
    auto res = check_domain_membership(g, b.data, f, df, ddf);
    CHECK(res[0].wentzell_residual == doctest::Approx(kappa));
    CHECK(res[0].second_derivative_gap == doctest::Approx(0.0));
}
