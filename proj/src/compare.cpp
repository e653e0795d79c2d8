#include "graphbm/compare.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "graphbm/resolvent.hpp"

namespace graphbm {

namespace {

using nlohmann::ordered_json;

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

ComparisonRow make_row(std::string name, double analytic, const McEstimate& est,
                       double allowance)
{
    ComparisonRow row;
    row.name = std::move(name);
    row.analytic = analytic;
    row.mc = est.value;
    row.se = est.std_error;
    row.z = est.std_error > 0.0 ? (est.value - analytic) / est.std_error : 0.0;
    row.allowance = allowance;
    row.pass = std::abs(est.value - analytic) <= 3.0 * est.std_error + allowance;
    return row;
}

} // namespace

bool ComparisonReport::all_pass() const
{
    for (const auto& row : rows)
        if (!row.pass) return false;
    return true;
}

std::string ComparisonReport::to_csv() const
{
    std::ostringstream out;
    out << "name,analytic,mc,se,z,allowance,pass\n";
    for (const auto& r : rows)
        out << r.name << ',' << num(r.analytic) << ',' << num(r.mc) << ',' << num(r.se)
            << ',' << num(r.z) << ',' << num(r.allowance) << ','
            << (r.pass ? "pass" : "FAIL") << '\n';
    out << "# seed=" << seed << " delta=" << num(delta) << " horizon=" << num(horizon)
        << " paths=" << paths << " graph=" << std::hex << graph_digest << std::dec
        << '\n';
    return out.str();
}

std::string ComparisonReport::to_table() const
{
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-38s %12s %12s %10s %7s %6s\n", "quantity",
                  "analytic", "mc", "se", "z", "ok");
    out << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-38s %12.6f %12.6f %10.2g %7.2f %6s\n",
                      r.name.c_str(), r.analytic, r.mc, r.se, r.z,
                      r.pass ? "pass" : "FAIL");
        out << line;
    }
    out << "seed=" << seed << " delta=" << num(delta) << " horizon=" << num(horizon)
        << " paths=" << paths << '\n';
    return out.str();
}

ComparisonReport run_scenario(const GraphBundle& bundle, const std::string& scenario_text)
{
    ordered_json j;
    try {
        j = ordered_json::parse(scenario_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("invalid scenario JSON: ") + e.what());
    }

    const MetricGraph& g = bundle.graph;
    const WentzellData& data = bundle.wentzell;

    SimConfig base;
    base.seed = j.value("seed", 1ull);
    base.delta = j.value("delta", 0.01);
    base.horizon = j.value("horizon", 10.0);
    base.paths = j.value("paths", static_cast<std::size_t>(10000));

    ComparisonReport rep;
    rep.seed = base.seed;
    rep.delta = base.delta;
    rep.horizon = base.horizon;
    rep.paths = base.paths;
    rep.graph_digest = graph_hash(g, data);

    std::size_t index = 0;
    for (const auto& c : j.value("comparisons", ordered_json::array())) {
        SimConfig cfg = base;
        cfg.delta = c.value("delta", base.delta);
        cfg.horizon = c.value("horizon", base.horizon);
        cfg.paths = c.value("paths", base.paths);
        cfg.seed = base.seed + index; // independent rows, still reproducible
        ++index;

        const std::string kind = c.at("kind").get<std::string>();
        std::string name = c.value("name", kind + "#" + std::to_string(index));

        // An explicit "expected" value overrides the computed analytic one
        // (pinned references and negative controls).
        auto expected_or = [&](double computed) {
            return c.contains("expected") ? c.at("expected").get<double>() : computed;
        };

        if (kind == "hitting") {
            const GraphPoint start = parse_point(g, c.at("start").get<std::string>());
            const double lambda = c.at("lambda").get<double>();
            const auto vid = g.find_vertex(c.at("vertex").get<std::string>());
            if (!vid) throw ParseError("unknown vertex in scenario");
            const double allowance = c.value("allowance", 2.0) * cfg.delta;
            const auto analytic = passage_weights(g, lambda, start);
            const auto mc = mc_hitting_transform(g, data, start, lambda, cfg);
            rep.rows.push_back(
                make_row(name, expected_or(analytic[*vid]), mc[*vid], allowance));
        } else if (kind == "resolvent") {
            const GraphPoint start = parse_point(g, c.at("start").get<std::string>());
            const double lambda = c.at("lambda").get<double>();
            const EdgeFunction f = parse_f_spec(g, c.at("f").get<std::string>());
            const double allowance = c.value("allowance", 2.0) * cfg.delta;
            const ResolventSolution sol = solve_resolvent(g, data, lambda, f);
            const McEstimate mc = mc_resolvent(g, data, start, lambda, f, cfg);
            rep.rows.push_back(
                make_row(name, expected_or(sol.eval(start)), mc, allowance));
        } else if (kind == "holding_mean") {
            const auto vid = g.find_vertex(c.at("vertex").get<std::string>());
            if (!vid) throw ParseError("unknown vertex in scenario");
            const VertexClass cls = classify_vertex(g, data, *vid);
            if (cls.kind != VertexKind::ExponentialHolding)
                throw InvariantError("holding_mean on a vertex that is not holding");
            const auto times = mc_holding_times(g, data, *vid, cfg);
            const McEstimate est = summarize(times);
            rep.rows.push_back(make_row(name, 1.0 / cls.holding_rate, est, 0.0));
        } else if (kind == "exit_weight") {
            const auto vid = g.find_vertex(c.at("vertex").get<std::string>());
            if (!vid) throw ParseError("unknown vertex in scenario");
            const auto eid = g.find_edge(c.at("edge").get<std::string>());
            if (!eid) throw ParseError("unknown edge in scenario");
            const double radius = c.value("radius", 0.25);
            const double allowance = c.value("allowance", 0.0) * cfg.delta;
            const VertexClass cls = classify_vertex(g, data, *vid);
            if (cls.kind != VertexKind::Instantaneous)
                throw InvariantError("exit_weight on a vertex without excursions");
            const auto freq = mc_first_exit_edge(g, data, *vid, radius, cfg);
            const auto& inc = g.incident(*vid);
            double analytic = 0.0;
            double mc_val = 0.0, var = 0.0;
            std::size_t n = 0;
            for (std::size_t k = 0; k < inc.size(); ++k) {
                if (inc[k].edge != *eid) continue;
                analytic += cls.weights[k];
                mc_val += freq[k].value;
                var += freq[k].std_error * freq[k].std_error;
                n = freq[k].paths;
            }
            McEstimate est{mc_val, std::sqrt(var), n};
            rep.rows.push_back(make_row(name, analytic, est, allowance));
        } else {
            throw ParseError("unknown comparison kind: " + kind);
        }
    }
    return rep;
}

} // namespace graphbm
