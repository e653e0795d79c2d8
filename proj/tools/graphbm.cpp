#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "graphbm/compare.hpp"
#include "graphbm/io.hpp"
#include "graphbm/resolvent.hpp"
#include "graphbm/simulate.hpp"

namespace {

using namespace graphbm;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvariant = 2;
constexpr int kExitComparison = 3;

void write_out(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write output file: " + path);
    out << text;
}

std::string describe_class(const MetricGraph& g, const VertexClass& cls)
{
    std::ostringstream out;
    switch (cls.kind) {
    case VertexKind::Trap:
        out << "Trap";
        break;
    case VertexKind::ExponentialHolding:
        out << "ExponentialHolding beta=" << cls.holding_rate;
        break;
    case VertexKind::Instantaneous:
        out << "Instantaneous w=(";
        for (std::size_t i = 0; i < cls.weights.size(); ++i)
            out << (i ? "," : "") << cls.weights[i];
        out << ") gamma=" << cls.stickiness << " k=" << cls.kill_rate;
        break;
    }
    (void)g;
    return out.str();
}

int cmd_validate(const std::string& graph_path, bool allow_tadpole)
{
    const GraphBundle bundle = load_graph_file(graph_path);
    const MetricGraph& g = bundle.graph;
    if (g.has_tadpole() && !allow_tadpole) {
        std::cerr << "graph has a tadpole edge; run through eliminate-tadpole or pass "
                     "--allow-tadpole\n";
        return kExitInvariant;
    }
    std::cout << "vertices=" << g.vertex_count() << " external=" << g.external_count()
              << " internal=" << g.internal_count() << '\n';
    for (VertexId v = 0; v < g.vertex_count(); ++v)
        std::cout << g.vertex_name(v) << ": "
                  << describe_class(g, classify_vertex(g, bundle.wentzell, v)) << '\n';
    return kExitOk;
}

int cmd_resolve(const std::string& graph_path, double lambda, const std::string& fspec,
                double step, const std::string& out_path)
{
    const GraphBundle bundle = load_graph_file(graph_path);
    const MetricGraph& g = bundle.graph;
    const EdgeFunction f = parse_f_spec(g, fspec);
    const ResolventSolution sol = solve_resolvent(g, bundle.wentzell, lambda, f);

    std::ostringstream out;
    out << "edge,x,u\n";
    char buf[96];
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        const double upto =
            g.is_internal(e) ? g.length(e) : std::min(10.0, 30.0 / sol.kappa());
        const int pts = 41;
        for (int i = 0; i <= pts; ++i) {
            const double x = upto * static_cast<double>(i) / pts;
            std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g\n", g.edge_name(e).c_str(),
                          x, sol.eval_edge(e, x));
            out << buf;
        }
    }
    out << "# lambda=" << sol.diagnostics().lambda_used
        << " abs_det=" << sol.diagnostics().abs_det
        << " solve_residual=" << sol.diagnostics().solve_residual
        << " retries=" << sol.diagnostics().retries << '\n';
    double worst = 0.0;
    for (const auto& r : sol.boundary_residuals())
        worst = std::max({worst, std::abs(r.wentzell_residual),
                          r.second_derivative_gap});
    out << "# boundary_residual_max=" << worst << '\n';
    write_out(out_path, out.str());
    return kExitOk;
}

int cmd_simulate(const std::string& graph_path, const std::string& start_spec,
                 const SimConfig& cfg, const std::string& out_path,
                 const std::string& events_path)
{
    const GraphBundle bundle = load_graph_file(graph_path);
    const MetricGraph& g = bundle.graph;
    const GraphPoint start = parse_point(g, start_spec);

    // Per-path reductions.
    PathEngine engine(g, bundle.wentzell);
    engine.validate_config(cfg);
    struct Summary : NullObserver {
        double death_time = kInfinity;
        double end_time = 0.0;
        void death(double t, VertexId) { death_time = t; end_time = t; }
        void censor(double t, const GraphPoint&) { end_time = t; }
    };
    std::vector<double> killed(cfg.paths), lifetime(cfg.paths);
    run_paths(cfg.paths, cfg.seed, [&](std::size_t i, CounterRng& rng) {
        Summary obs;
        engine.run(start, 0.0, cfg, rng, obs);
        killed[i] = std::isfinite(obs.death_time) ? 1.0 : 0.0;
        lifetime[i] = obs.end_time;
        return 0.0;
    });
    const McEstimate frac = summarize(killed);
    const McEstimate life = summarize(lifetime);

    std::ostringstream out;
    out << "estimator,value,se\n";
    char buf[128];
    std::snprintf(buf, sizeof buf, "killed_fraction,%.10g,%.10g\n", frac.value,
                  frac.std_error);
    out << buf;
    std::snprintf(buf, sizeof buf, "mean_lifetime_censored,%.10g,%.10g\n", life.value,
                  life.std_error);
    out << buf;
    out << "# seed=" << cfg.seed << " delta=" << cfg.delta << " horizon=" << cfg.horizon
        << " paths=" << cfg.paths << '\n';
    write_out(out_path, out.str());

    if (!events_path.empty()) {
        // Per-path event log: time float64, edge id int32 (-1 vertex with x =
        // vertex index, -2 cemetery), x float64.
        std::ofstream ev(events_path);
        if (!ev) throw ParseError("cannot write events file: " + events_path);
        ev << "path,time,edge,x\n";
        const std::size_t log_paths = std::min<std::size_t>(cfg.paths, 16);
        for (std::size_t i = 0; i < log_paths; ++i) {
            SimConfig one = cfg;
            one.seed = cfg.seed + 1000003 * i;
            const Trajectory traj = simulate_path(g, bundle.wentzell, start, one);
            for (const auto& evt : traj.events) {
                int edge = -1;
                double x = 0.0;
                if (evt.point.is_interior()) {
                    edge = static_cast<int>(evt.point.edge);
                    x = evt.point.x;
                } else if (evt.point.is_vertex()) {
                    edge = -1;
                    x = static_cast<double>(evt.point.vertex);
                } else {
                    edge = -2;
                }
                std::snprintf(buf, sizeof buf, "%zu,%.10g,%d,%.10g\n", i, evt.time,
                              edge, x);
                ev << buf;
            }
        }
    }
    return kExitOk;
}

int cmd_compare(const std::string& graph_path, const std::string& scenario_path,
                const std::string& format, const std::string& out_path)
{
    const GraphBundle bundle = load_graph_file(graph_path);
    std::ifstream in(scenario_path);
    if (!in) throw ParseError("cannot open scenario file: " + scenario_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const ComparisonReport rep = run_scenario(bundle, ss.str());
    write_out(out_path, format == "table" ? rep.to_table() : rep.to_csv());
    return rep.all_pass() ? kExitOk : kExitComparison;
}

int cmd_detscan(const std::string& graph_path, double re0, double re1, int nre,
                double im0, double im1, int nim, const std::string& out_path)
{
    const GraphBundle bundle = load_graph_file(graph_path);
    const BoundaryMatrices m = assemble(bundle.graph, bundle.wentzell);
    std::ostringstream out;
    out << "kappa_re,kappa_im,abs_det,log10_cond\n";
    char buf[128];
    for (int i = 0; i < nre; ++i) {
        const double re = nre == 1 ? re0 : re0 + (re1 - re0) * i / (nre - 1.0);
        for (int j = 0; j < nim; ++j) {
            const double im = nim == 1 ? im0 : im0 + (im1 - im0) * j / (nim - 1.0);
            const Eigen::MatrixXcd z = z_matrix(m, {re, im});
            const double det = std::abs(z.determinant());
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(z);
            const auto& sv = svd.singularValues();
            const double cond =
                sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : kInfinity;
            std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g\n", re, im, det,
                          std::log10(cond));
            out << buf;
        }
    }
    write_out(out_path, out.str());
    return kExitOk;
}

int cmd_glue(const std::string& g1_path, const std::string& g2_path,
             const std::vector<std::string>& pair_specs, const std::string& out_path)
{
    const GraphBundle b1 = load_graph_file(g1_path);
    const GraphBundle b2 = load_graph_file(g2_path);
    std::vector<JoinPairSpec> pairs;
    for (const std::string& spec : pair_specs) {
        // e:l:length[:sigma]
        std::istringstream ss(spec);
        std::string e, l, len, sigma;
        std::getline(ss, e, ':');
        std::getline(ss, l, ':');
        std::getline(ss, len, ':');
        std::getline(ss, sigma, ':');
        const auto eid = b1.graph.find_edge(e);
        const auto lid = b2.graph.find_edge(l);
        if (!eid || !lid) throw ParseError("unknown edge in pair spec: " + spec);
        JoinPairSpec p;
        p.in_g1 = *eid;
        p.in_g2 = *lid;
        p.length = std::stod(len);
        p.orientation = sigma.empty() ? 1 : std::stoi(sigma);
        pairs.push_back(p);
    }
    auto [joined, sm] = join_graphs(b1.graph, b2.graph, pairs);
    const WentzellData data =
        join_wentzell(joined, sm, b1.graph, b1.wentzell, b2.graph, b2.wentzell);
    write_out(out_path, serialize_graph(joined, data));

    std::cerr << "joined: vertices=" << joined.vertex_count()
              << " external=" << joined.external_count()
              << " internal=" << joined.internal_count() << "\nshadow vertices:\n";
    for (const auto& s : sm.shadows) {
        const MetricGraph& comp = s.component == 1 ? b1.graph : b2.graph;
        std::cerr << "  g" << s.component << " " << comp.edge_name(s.component_edge)
                  << ":" << s.x << " -> " << joined.vertex_name(s.connected) << '\n';
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Brownian motion on metric graphs: simulation and analytic resolvents"};
    app.require_subcommand(1);

    std::string graph_path, graph2_path, out_path, format = "csv";
    std::string start_spec, fspec = "exp:1:1", scenario_path, events_path;
    double lambda = 1.0, step = 0.05;
    SimConfig cfg;
    bool allow_tadpole = false;

    auto* validate = app.add_subcommand("validate", "parse and validate a graph file");
    validate->add_option("--graph", graph_path)->required();
    validate->add_flag("--allow-tadpole", allow_tadpole);

    auto* resolve = app.add_subcommand("resolve", "analytic resolvent on a sample grid");
    resolve->add_option("--graph", graph_path)->required();
    resolve->add_option("--lambda", lambda);
    resolve->add_option("--f", fspec);
    resolve->add_option("--step", step);
    resolve->add_option("--out", out_path);

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo path summary");
    simulate->add_option("--graph", graph_path)->required();
    simulate->add_option("--start", start_spec)->required();
    simulate->add_option("--delta", cfg.delta);
    simulate->add_option("--horizon", cfg.horizon);
    simulate->add_option("--paths", cfg.paths);
    simulate->add_option("--seed", cfg.seed);
    simulate->add_option("--out", out_path);
    simulate->add_option("--events", events_path);

    auto* compare = app.add_subcommand("compare", "MC vs analytic comparison report");
    compare->add_option("--graph", graph_path)->required();
    compare->add_option("--scenario", scenario_path)->required();
    compare->add_option("--format", format)->check(CLI::IsMember({"csv", "table"}));
    compare->add_option("--out", out_path);

    auto* detscan = app.add_subcommand("detscan", "det Z over a complex kappa grid");
    double re0 = 0.1, re1 = 5.0, im0 = 0.0, im1 = 0.0;
    int nre = 50, nim = 1;
    detscan->add_option("--graph", graph_path)->required();
    detscan->add_option("--re0", re0);
    detscan->add_option("--re1", re1);
    detscan->add_option("--nre", nre);
    detscan->add_option("--im0", im0);
    detscan->add_option("--im1", im1);
    detscan->add_option("--nim", nim);
    detscan->add_option("--out", out_path);

    auto* glue = app.add_subcommand("glue", "join two graphs along external edges");
    std::vector<std::string> pair_specs;
    glue->add_option("--graph", graph_path)->required();
    glue->add_option("--graph2", graph2_path)->required();
    glue->add_option("--pair", pair_specs, "e:l:length[:sigma]")->required();
    glue->add_option("--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*validate) return cmd_validate(graph_path, allow_tadpole);
        if (*resolve) return cmd_resolve(graph_path, lambda, fspec, step, out_path);
        if (*simulate)
            return cmd_simulate(graph_path, start_spec, cfg, out_path, events_path);
        if (*compare) return cmd_compare(graph_path, scenario_path, format, out_path);
        if (*detscan)
            return cmd_detscan(graph_path, re0, re1, nre, im0, im1, nim, out_path);
        if (*glue) return cmd_glue(graph_path, graph2_path, pair_specs, out_path);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvariantError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvariant;
    } catch (const SolveError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInvariant;
    }
    return kExitUsage;
}
