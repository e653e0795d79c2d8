#include "graphbm/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <climits>
#include <cmath>
#include <thread>

#include "graphbm/edge_function.hpp"

namespace graphbm {

VertexStepProbabilities vertex_step_probabilities(const VertexClass& cls, double delta)
{
    if (cls.kind != VertexKind::Instantaneous)
        throw InvariantError("step probabilities are defined for instantaneous vertices");

    VertexStepProbabilities p;
    const double gamma = cls.stickiness;
    const double k = cls.kill_rate;
    p.move.resize(cls.weights.size());
    if (gamma > 0.0) {
        const double den = gamma + delta;
        for (std::size_t j = 0; j < cls.weights.size(); ++j)
            p.move[j] = delta * cls.weights[j] / den;
        p.kill = delta * delta * k / den;
        p.stay = (gamma - delta * delta * k) / den;
        if (p.stay < 0.0)
            throw InvariantError("delta too large: negative stay probability");
    } else {
        p.kill = delta * k / (1.0 + delta * k);
        for (std::size_t j = 0; j < cls.weights.size(); ++j)
            p.move[j] = cls.weights[j] * (1.0 - p.kill);
        p.stay = 0.0;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Deterministic parallel path map
// ---------------------------------------------------------------------------

std::vector<double> run_paths(std::size_t paths, std::uint64_t seed,
                              const std::function<double(std::size_t, CounterRng&)>& body)
{
    std::vector<double> out(paths);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(paths / 256, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < paths; ++i) {
            CounterRng rng(seed, i);
            out[i] = body(i, rng);
        }
        return out;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const std::size_t chunk = 512;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t begin = next.fetch_add(chunk);
                if (begin >= paths) return;
                const std::size_t end = std::min(paths, begin + chunk);
                for (std::size_t i = begin; i < end; ++i) {
                    CounterRng rng(seed, i);
                    out[i] = body(i, rng);
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    return out;
}

McEstimate summarize(std::span<const double> values)
{
    McEstimate est;
    est.paths = values.size();
    if (values.empty()) return est;
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    est.value = mean;
    if (values.size() > 1)
        est.std_error = std::sqrt(ss / (static_cast<double>(values.size())
                                        * static_cast<double>(values.size() - 1)));
    return est;
}

// ---------------------------------------------------------------------------
// Observers
// ---------------------------------------------------------------------------

namespace {

struct FirstVertexObserver : NullObserver {
    double hit_time = kInfinity;
    VertexId hit_vertex = kNoVertex;
    bool vertex(double t, VertexId v)
    {
        hit_time = t;
        hit_vertex = v;
        return false;
    }
};

struct ResolventObserver : NullObserver {
    const MetricGraph* g = nullptr;
    const EdgeFunction* f = nullptr;
    double lambda = 0.0;
    double integral = 0.0;

    void move(double t0, double t1, EdgeId e, double x0, double x1)
    {
        const double w = std::exp(-lambda * 0.5 * (t0 + t1)) * (t1 - t0);
        integral += 0.5 * w * (f->eval_edge(e, x0) + f->eval_edge(e, x1));
    }
    void hold(double t0, double t1, VertexId v)
    {
        const double fv = f->vertex_value(*g, v);
        if (fv == 0.0) return;
        if (lambda == 0.0) {
            integral += fv * (t1 - t0);
            return;
        }
        integral += fv * (std::exp(-lambda * t0) - std::exp(-lambda * t1)) / lambda;
    }
};

struct RecordingObserver : NullObserver {
    Trajectory* traj = nullptr;
    std::size_t stride = 1;
    std::size_t count = 0;

    void push(double t, const GraphPoint& p)
    {
        traj->events.push_back({t, p});
    }
    void move(double t0, double t1, EdgeId e, double x0, double x1)
    {
        (void)t0;
        (void)x0;
        if (++count % stride == 0) push(t1, GraphPoint::interior(e, x1));
    }
    bool vertex(double t, VertexId v)
    {
        push(t, GraphPoint::at_vertex(v));
        return true;
    }
    void local_time(double, VertexId v, double dl) { traj->local_time[v] += dl; }
    void death(double t, VertexId)
    {
        traj->lifetime = t;
        traj->killed = true;
        push(t, GraphPoint::cemetery());
    }
    void censor(double t, const GraphPoint& p) { push(t, p); }
};

struct HoldObserver : NullObserver {
    double death_time = kInfinity;
    void death(double t, VertexId) { death_time = t; }
};

} // namespace

// ---------------------------------------------------------------------------
// Plain drivers
// ---------------------------------------------------------------------------

Trajectory simulate_path(const MetricGraph& g, const WentzellData& data,
                         const GraphPoint& start, const SimConfig& cfg)
{
    PathEngine engine(g, data);
    engine.validate_config(cfg);
    Trajectory traj;
    traj.local_time.assign(g.vertex_count(), 0.0);
    RecordingObserver obs;
    obs.traj = &traj;
    obs.stride = std::max<std::size_t>(cfg.record_stride, 1);
    CounterRng rng(cfg.seed, 0);
    traj.events.push_back({0.0, g.canonical(start)});
    engine.run(start, 0.0, cfg, rng, obs);
    return traj;
}

std::vector<McEstimate> mc_hitting_transform(const MetricGraph& g,
                                             const WentzellData& data,
                                             const GraphPoint& start, double lambda,
                                             const SimConfig& cfg)
{
    const GraphPoint s = g.canonical(start);
    if (!s.is_interior())
        throw InvariantError("hitting transform requires an interior start point");
    PathEngine engine(g, data);
    engine.validate_config(cfg);

    // Per path: packed (vertex index, weight e^{-lambda H}).
    std::vector<double> weights(cfg.paths);
    std::vector<VertexId> hits(cfg.paths);
    run_paths(cfg.paths, cfg.seed, [&](std::size_t i, CounterRng& rng) {
        FirstVertexObserver obs;
        engine.run(s, 0.0, cfg, rng, obs);
        hits[i] = obs.hit_vertex;
        weights[i] = obs.hit_vertex == kNoVertex
                         ? 0.0
                         : (lambda == 0.0 ? 1.0 : std::exp(-lambda * obs.hit_time));
        return 0.0;
    });

    std::vector<McEstimate> out(g.vertex_count());
    std::vector<double> scratch(cfg.paths);
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
        for (std::size_t i = 0; i < cfg.paths; ++i)
            scratch[i] = hits[i] == v ? weights[i] : 0.0;
        out[v] = summarize(scratch);
    }
    return out;
}

McEstimate mc_resolvent(const MetricGraph& g, const WentzellData& data,
                        const GraphPoint& start, double lambda,
                        const EdgeFunction& f, const SimConfig& cfg)
{
    PathEngine engine(g, data);
    engine.validate_config(cfg);
    const GraphPoint s = g.canonical(start);
    const std::vector<double> values =
        run_paths(cfg.paths, cfg.seed, [&](std::size_t, CounterRng& rng) {
            ResolventObserver obs;
            obs.g = &g;
            obs.f = &f;
            obs.lambda = lambda;
            engine.run(s, 0.0, cfg, rng, obs);
            return obs.integral;
        });
    return summarize(values);
}

std::vector<McEstimate> mc_first_exit_edge(const MetricGraph& g,
                                           const WentzellData& data, VertexId v,
                                           double radius, const SimConfig& cfg)
{
    // Markers at distance `radius` on every incident edge separate v from the
    // rest of the graph, so the engine stops exactly at the first exit.
    PathEngine engine(g, data);
    const auto& inc = g.incident(v);
    std::vector<std::vector<double>> markers(g.edge_count());
    std::vector<std::vector<std::size_t>> inc_of_marker(g.edge_count());
    for (std::size_t j = 0; j < inc.size(); ++j) {
        const EdgeId e = inc[j].edge;
        const double m = inc[j].end == EdgeEnd::Start ? radius : g.length(e) - radius;
        if (g.is_internal(e) && !(m > 0.0 && m < g.length(e)))
            throw InvariantError("exit radius too large for an incident edge");
        markers[e].push_back(m);
        inc_of_marker[e].push_back(j);
    }
    for (EdgeId e = 0; e < g.edge_count(); ++e) {
        if (markers[e].empty()) continue;
        if (markers[e].size() == 2 && markers[e][0] > markers[e][1]) {
            std::swap(markers[e][0], markers[e][1]);
            std::swap(inc_of_marker[e][0], inc_of_marker[e][1]);
        }
        engine.set_markers(e, markers[e]);
    }
    engine.validate_config(cfg);

    std::vector<std::size_t> exit_inc(cfg.paths, SIZE_MAX);
    run_paths(cfg.paths, cfg.seed, [&](std::size_t i, CounterRng& rng) {
        NullObserver obs;
        const StopInfo stop = engine.run(GraphPoint::at_vertex(v), 0.0, cfg, rng, obs);
        if (stop.reason == StopInfo::Reason::MarkerHit)
            exit_inc[i] = inc_of_marker[stop.at.edge][stop.marker_index];
        return 0.0;
    });

    std::vector<McEstimate> out(inc.size());
    std::vector<double> scratch(cfg.paths);
    for (std::size_t j = 0; j < inc.size(); ++j) {
        for (std::size_t i = 0; i < cfg.paths; ++i)
            scratch[i] = exit_inc[i] == j ? 1.0 : 0.0;
        out[j] = summarize(scratch);
    }
    return out;
}

std::vector<double> mc_holding_times(const MetricGraph& g, const WentzellData& data,
                                     VertexId v, const SimConfig& cfg)
{
    PathEngine engine(g, data);
    engine.validate_config(cfg);
    if (classify_vertex(g, data, v).kind != VertexKind::ExponentialHolding)
        throw InvariantError("vertex is not exponentially holding");
    std::vector<double> times =
        run_paths(cfg.paths, cfg.seed, [&](std::size_t, CounterRng& rng) {
            HoldObserver obs;
            engine.run(GraphPoint::at_vertex(v), 0.0, cfg, rng, obs);
            return obs.death_time;
        });
    std::erase_if(times, [](double t) { return !std::isfinite(t); });
    return times;
}

CrossoverChain extract_crossovers(const Trajectory& traj,
                                  std::span<const VertexId> connected,
                                  const GraphPoint& start, bool killed)
{
    CrossoverChain chain;
    auto in_vc = [&](VertexId v) {
        return std::find(connected.begin(), connected.end(), v) != connected.end();
    };
    VertexId excluded =
        start.is_vertex() && in_vc(start.vertex) ? start.vertex : kNoVertex;
    double last_time = -1.0;
    for (const TrajectoryEvent& ev : traj.events) {
        if (!ev.point.is_vertex()) continue;
        const VertexId v = ev.point.vertex;
        if (!in_vc(v) || v == excluded) continue;
        if (ev.time <= last_time && !chain.entries.empty()) continue;
        chain.entries.push_back({ev.time, v});
        last_time = ev.time;
        excluded = v;
    }
    if (killed) chain.entries.push_back({kInfinity, kNoVertex});
    return chain;
}

// ---------------------------------------------------------------------------
// Glue simulator
// ---------------------------------------------------------------------------

GlueSimulator::GlueSimulator(const MetricGraph& g1, const WentzellData& d1,
                             const MetricGraph& g2, const WentzellData& d2,
                             const MetricGraph& joined, const ShadowMap& sm)
    : g1_(&g1), g2_(&g2), joined_(&joined), sm_(&sm), eng1_(g1, d1), eng2_(g2, d2)
{
    map1_.resize(g1.edge_count());
    map2_.resize(g2.edge_count());
    for (EdgeId e = 0; e < g1.edge_count(); ++e)
        if (sm.edge_from_g1[e] != kNoEdge) map1_[e] = {sm.edge_from_g1[e], 0.0, 1.0};
    for (EdgeId e = 0; e < g2.edge_count(); ++e)
        if (sm.edge_from_g2[e] != kNoEdge) map2_[e] = {sm.edge_from_g2[e], 0.0, 1.0};

    // Paired external edges map onto the new internal edges; the side whose
    // initial vertex is the edge's former anchor keeps the coordinate, the
    // other side is reflected.
    std::vector<std::vector<double>> markers1(g1.edge_count()), markers2(g2.edge_count());
    marker_target_1_.resize(g1.edge_count());
    marker_target_2_.resize(g2.edge_count());
    for (const JoinedPair& p : sm.pairs) {
        const bool g1_initial = p.orientation == 1;
        map1_[p.in_g1] = g1_initial
                             ? EdgeMap{p.new_edge, 0.0, 1.0}
                             : EdgeMap{p.new_edge, p.length, -1.0};
        map2_[p.in_g2] = g1_initial
                             ? EdgeMap{p.new_edge, p.length, -1.0}
                             : EdgeMap{p.new_edge, 0.0, 1.0};
        markers1[p.in_g1].push_back(p.length);
        markers2[p.in_g2].push_back(p.length);
        // Hitting the shadow at distance b_k means arriving at the partner's
        // former anchor vertex.
        const VertexId target_for_g1 =
            sm.vertex_from_g2[g2.initial_vertex(p.in_g2)];
        const VertexId target_for_g2 =
            sm.vertex_from_g1[g1.initial_vertex(p.in_g1)];
        marker_target_1_[p.in_g1].push_back(target_for_g1);
        marker_target_2_[p.in_g2].push_back(target_for_g2);
    }
    for (EdgeId e = 0; e < g1.edge_count(); ++e)
        if (!markers1[e].empty()) eng1_.set_markers(e, markers1[e]);
    for (EdgeId e = 0; e < g2.edge_count(); ++e)
        if (!markers2[e].empty()) eng2_.set_markers(e, markers2[e]);
}

GraphPoint GlueSimulator::to_joined(int comp, const GraphPoint& p) const
{
    if (p.is_cemetery()) return p;
    if (p.is_vertex()) return GraphPoint::at_vertex(to_joined_vertex(comp, p.vertex));
    const EdgeMap& m = edge_map(comp, p.edge);
    return joined_->canonical(GraphPoint::interior(m.joined_edge, m.apply(p.x)));
}

GlueSimulator::ComponentPoint GlueSimulator::to_component(const GraphPoint& jp) const
{
    if (jp.is_cemetery()) throw InvariantError("cannot map the cemetery");
    if (jp.is_vertex()) {
        const VertexId v = jp.vertex;
        for (VertexId w = 0; w < sm_->vertex_from_g1.size(); ++w)
            if (sm_->vertex_from_g1[w] == v) return {1, GraphPoint::at_vertex(w)};
        for (VertexId w = 0; w < sm_->vertex_from_g2.size(); ++w)
            if (sm_->vertex_from_g2[w] == v) return {2, GraphPoint::at_vertex(w)};
        throw InvariantError("vertex not on the joined graph");
    }
    // Interior: find the source edge.
    for (EdgeId e = 0; e < g1_->edge_count(); ++e)
        if (sm_->edge_from_g1[e] == jp.edge) return {1, GraphPoint::interior(e, jp.x)};
    for (EdgeId e = 0; e < g2_->edge_count(); ++e)
        if (sm_->edge_from_g2[e] == jp.edge) return {2, GraphPoint::interior(e, jp.x)};
    for (const JoinedPair& p : sm_->pairs) {
        if (p.new_edge != jp.edge) continue;
        // Open new edges are attached to the second component.
        const EdgeMap& m = map2_[p.in_g2];
        // joined_x = offset + scale * comp_x  =>  comp_x = (joined_x - offset)/scale
        const double cx = (jp.x - m.offset) / m.scale;
        return {2, GraphPoint::interior(p.in_g2, cx)};
    }
    throw InvariantError("point not on the joined graph");
}

VertexId GlueSimulator::crossover_target(int comp, EdgeId e, std::size_t idx) const
{
    const auto& targets = comp == 1 ? marker_target_1_ : marker_target_2_;
    return targets[e][idx];
}

Trajectory GlueSimulator::simulate(const GraphPoint& start, const SimConfig& cfg) const
{
    eng1_.validate_config(cfg);
    eng2_.validate_config(cfg);
    Trajectory traj;
    traj.local_time.assign(joined_->vertex_count(), 0.0);
    RecordingObserver obs;
    obs.traj = &traj;
    obs.stride = std::max<std::size_t>(cfg.record_stride, 1);
    CounterRng rng(cfg.seed, 0);
    traj.events.push_back({0.0, joined_->canonical(start)});
    run(start, cfg, rng, obs, &traj.crossovers);
    return traj;
}

std::vector<McEstimate> GlueSimulator::mc_hitting_transform(const GraphPoint& start,
                                                            double lambda,
                                                            const SimConfig& cfg) const
{
    const GraphPoint s = joined_->canonical(start);
    if (!s.is_interior())
        throw InvariantError("hitting transform requires an interior start point");
    eng1_.validate_config(cfg);
    eng2_.validate_config(cfg);

    std::vector<double> weights(cfg.paths);
    std::vector<VertexId> hits(cfg.paths);
    run_paths(cfg.paths, cfg.seed, [&](std::size_t i, CounterRng& rng) {
        FirstVertexObserver obs;
        run(s, cfg, rng, obs, nullptr);
        hits[i] = obs.hit_vertex;
        weights[i] = obs.hit_vertex == kNoVertex
                         ? 0.0
                         : (lambda == 0.0 ? 1.0 : std::exp(-lambda * obs.hit_time));
        return 0.0;
    });

    std::vector<McEstimate> out(joined_->vertex_count());
    std::vector<double> scratch(cfg.paths);
    for (VertexId v = 0; v < joined_->vertex_count(); ++v) {
        for (std::size_t i = 0; i < cfg.paths; ++i)
            scratch[i] = hits[i] == v ? weights[i] : 0.0;
        out[v] = summarize(scratch);
    }
    return out;
}

McEstimate GlueSimulator::mc_resolvent(const GraphPoint& start, double lambda,
                                       const EdgeFunction& f, const SimConfig& cfg) const
{
    eng1_.validate_config(cfg);
    eng2_.validate_config(cfg);
    const GraphPoint s = joined_->canonical(start);
    const std::vector<double> values =
        run_paths(cfg.paths, cfg.seed, [&](std::size_t, CounterRng& rng) {
            ResolventObserver obs;
            obs.g = joined_;
            obs.f = &f;
            obs.lambda = lambda;
            run(s, cfg, rng, obs, nullptr);
            return obs.integral;
        });
    return summarize(values);
}

std::vector<CrossoverChain> GlueSimulator::crossover_chains(const GraphPoint& start,
                                                            const SimConfig& cfg) const
{
    eng1_.validate_config(cfg);
    eng2_.validate_config(cfg);
    const GraphPoint s = joined_->canonical(start);
    std::vector<CrossoverChain> chains(cfg.paths);
    run_paths(cfg.paths, cfg.seed, [&](std::size_t i, CounterRng& rng) {
        NullObserver obs;
        run(s, cfg, rng, obs, &chains[i]);
        return 0.0;
    });
    return chains;
}

} // namespace graphbm
