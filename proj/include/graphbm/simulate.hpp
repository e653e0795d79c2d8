#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "graphbm/graph.hpp"
#include "graphbm/rng.hpp"
#include "graphbm/wentzell.hpp"

namespace graphbm {

struct SimConfig {
    double delta = 0.01;          // lattice step (graph length units)
    double horizon = 10.0;        // T
    std::uint64_t seed = 1;
    bool bridge_correction = true;
    std::size_t paths = 10000;
    std::size_t record_stride = 1; // event thinning for recorded trajectories
};

struct TrajectoryEvent {
    double time = 0.0;
    GraphPoint point;
};

// One crossover: vertex == kNoVertex encodes the cemetery entry (time +inf).
struct CrossoverEntry {
    double time = kInfinity;
    VertexId vertex = kNoVertex;
};

struct CrossoverChain {
    std::vector<CrossoverEntry> entries;
};

struct Trajectory {
    std::vector<TrajectoryEvent> events;
    double lifetime = kInfinity; // +inf when censored at the horizon
    bool killed = false;
    std::vector<double> local_time; // per vertex, delta per arrival
    CrossoverChain crossovers;      // filled by glued simulation
};

struct VertexStepProbabilities {
    std::vector<double> move; // per incidence, in L(v) order
    double stay = 0.0;
    double kill = 0.0;
};

// One lattice step of duration delta^2 at an instantaneous vertex.
VertexStepProbabilities vertex_step_probabilities(const VertexClass& cls, double delta);

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;
};

// ---------------------------------------------------------------------------
// Path engine: exact Gaussian increments with Brownian-bridge vertex-crossing
// correction away from barriers, a +-delta lattice walk near them, and the
// per-class vertex mechanisms. Barriers are edge endpoints plus optional
// interior markers (used for shadow vertices in glued simulation).
// ---------------------------------------------------------------------------

struct StopInfo {
    enum class Reason { Horizon, Death, VertexStop, MarkerHit };
    Reason reason = Reason::Horizon;
    double time = 0.0;
    GraphPoint at;
    std::size_t marker_index = 0; // within the edge's marker list
};

// Observer callbacks; derive and override what you need.
struct NullObserver {
    void move(double, double, EdgeId, double, double) {}
    void hold(double, double, VertexId) {}
    bool vertex(double, VertexId) { return true; } // false stops the run
    void local_time(double, VertexId, double) {}
    void death(double, VertexId) {}
    void censor(double, const GraphPoint&) {}
};

class PathEngine {
public:
    PathEngine(const MetricGraph& g, const WentzellData& data)
        : g_(&g), data_(&data)
    {
        classes_.reserve(g.vertex_count());
        for (VertexId v = 0; v < g.vertex_count(); ++v)
            classes_.push_back(classify_vertex(g, data, v));
        markers_.resize(g.edge_count());
        min_internal_ = kInfinity;
        for (EdgeId e = 0; e < g.edge_count(); ++e)
            if (g.is_internal(e)) min_internal_ = std::min(min_internal_, g.length(e));
    }

    // Interior stop markers (sorted, strictly inside the edge).
    void set_markers(EdgeId e, std::vector<double> xs) { markers_[e] = std::move(xs); }

    const MetricGraph& graph() const { return *g_; }
    const VertexClass& vertex_class(VertexId v) const { return classes_[v]; }

    void validate_config(const SimConfig& cfg) const
    {
        if (!(cfg.delta > 0.0)) throw InvariantError("delta must be positive");
        if (!(cfg.horizon > 0.0)) throw InvariantError("horizon must be positive");
        if (min_internal_ < 8.0 * cfg.delta)
            throw InvariantError("delta too large for the shortest internal edge");
        for (EdgeId e = 0; e < g_->edge_count(); ++e) {
            double prev = 0.0;
            for (double m : markers_[e]) {
                if (m - prev < 8.0 * cfg.delta)
                    throw InvariantError("marker spacing too small for delta");
                prev = m;
            }
            if (!markers_[e].empty() && g_->is_internal(e)
                && g_->length(e) - markers_[e].back() < 8.0 * cfg.delta)
                throw InvariantError("marker too close to edge end for delta");
        }
    }

    template <class Observer>
    StopInfo run(const GraphPoint& start, double t0, const SimConfig& cfg,
                 CounterRng& rng, Observer& obs) const
    {
        const double delta = cfg.delta;
        const double dt = delta * delta;
        const double T = cfg.horizon;

        // Per-run cache of vertex step probabilities at this delta.
        std::vector<VertexStepProbabilities> steps(g_->vertex_count());
        for (VertexId v = 0; v < g_->vertex_count(); ++v)
            if (classes_[v].kind == VertexKind::Instantaneous)
                steps[v] = vertex_step_probabilities(classes_[v], delta);

        GraphPoint pos = g_->canonical(start);
        if (pos.is_cemetery()) throw InvariantError("cannot start at the cemetery");
        double t = t0;

        // Current edge-interval state (valid while pos is interior).
        EdgeId e = kNoEdge;
        double x = 0.0, lo = 0.0, hi = 0.0;
        int lo_marker = -1, hi_marker = -1; // marker indices, -1 = vertex/none

        auto enter_edge = [&](EdgeId edge, double at_x) {
            e = edge;
            x = at_x;
            const auto& ms = markers_[e];
            std::size_t i = 0;
            while (i < ms.size() && ms[i] < x) ++i;
            lo = i == 0 ? 0.0 : ms[i - 1];
            lo_marker = i == 0 ? -1 : static_cast<int>(i - 1);
            if (i < ms.size()) {
                hi = ms[i];
                hi_marker = static_cast<int>(i);
            } else {
                hi = g_->is_internal(e) ? g_->length(e) : kInfinity;
                hi_marker = -1;
            }
        };

        if (pos.is_interior()) enter_edge(pos.edge, pos.x);

        while (true) {
            if (pos.is_vertex()) {
                const VertexId v = pos.vertex;
                obs.local_time(t, v, delta);
                if (!obs.vertex(t, v))
                    return {StopInfo::Reason::VertexStop, t, pos, 0};
                if (t >= T) {
                    obs.censor(T, pos);
                    return {StopInfo::Reason::Horizon, T, pos, 0};
                }
                const VertexClass& cls = classes_[v];
                if (cls.kind == VertexKind::Trap) {
                    obs.hold(t, T, v);
                    obs.censor(T, pos);
                    return {StopInfo::Reason::Horizon, T, pos, 0};
                }
                if (cls.kind == VertexKind::ExponentialHolding) {
                    const double tau = rng.exponential(cls.holding_rate);
                    if (t + tau >= T) {
                        obs.hold(t, T, v);
                        obs.censor(T, pos);
                        return {StopInfo::Reason::Horizon, T, pos, 0};
                    }
                    obs.hold(t, t + tau, v);
                    t += tau;
                    obs.death(t, v);
                    return {StopInfo::Reason::Death, t, GraphPoint::cemetery(), 0};
                }
                // Instantaneous: lattice steps of duration delta^2.
                const VertexStepProbabilities& p = steps[v];
                const auto& inc = g_->incident(v);
                bool moved = false;
                while (!moved) {
                    const double u = rng.uniform();
                    obs.hold(t, t + dt, v);
                    t += dt;
                    if (u < p.kill) {
                        obs.death(t, v);
                        return {StopInfo::Reason::Death, t, GraphPoint::cemetery(), 0};
                    }
                    if (u < p.kill + p.stay) {
                        if (t >= T) {
                            obs.censor(T, pos);
                            return {StopInfo::Reason::Horizon, T, pos, 0};
                        }
                        continue;
                    }
                    // Pick the exit incidence.
                    double acc = p.kill + p.stay;
                    std::size_t j = 0;
                    for (; j + 1 < p.move.size(); ++j) {
                        acc += p.move[j];
                        if (u < acc) break;
                    }
                    const Incidence dir = inc[j];
                    const double len = g_->length(dir.edge);
                    const double nx = dir.end == EdgeEnd::Start ? delta : len - delta;
                    obs.move(t - dt, t, dir.edge,
                             dir.end == EdgeEnd::Start ? 0.0 : len, nx);
                    enter_edge(dir.edge, nx);
                    pos = GraphPoint::interior(dir.edge, nx);
                    moved = true;
                }
                if (t >= T) {
                    obs.censor(T, pos);
                    return {StopInfo::Reason::Horizon, T, pos, 0};
                }
                continue;
            }

            // Interior motion between the barriers lo < x < hi on edge e.
            const double d_lo = x - lo;
            const double d_hi = hi - x;
            bool arrived_lo = false, arrived_hi = false;

            if (std::min(d_lo, d_hi) < 2.0 * delta) {
                // Lattice walk anchored at the nearer barrier.
                const bool at_lo = d_lo <= d_hi;
                const double anchor = at_lo ? lo : hi;
                const double sign = at_lo ? 1.0 : -1.0;
                long k = std::lround(std::min(d_lo, d_hi) / delta);
                if (k < 1) k = 1;
                while (k > 0 && k < 4) {
                    const double x0 = anchor + sign * static_cast<double>(k) * delta;
                    k += rng.coin() ? 1 : -1;
                    const double x1 = anchor + sign * static_cast<double>(k) * delta;
                    t += dt;
                    obs.move(t - dt, t, e, x0, x1);
                    x = x1;
                    if (t >= T && k > 0) {
                        pos = GraphPoint::interior(e, x);
                        obs.censor(T, pos);
                        return {StopInfo::Reason::Horizon, T, pos, 0};
                    }
                }
                if (k == 0) {
                    arrived_lo = at_lo;
                    arrived_hi = !at_lo;
                    x = anchor;
                }
            } else {
                const double z = rng.normal();
                const double dx = delta * z;
                const double xp = x + dx;
                t += dt;
                if (xp <= lo) {
                    arrived_lo = true;
                } else if (xp >= hi) {
                    arrived_hi = true;
                } else if (cfg.bridge_correction) {
                    // Brownian bridge crossing probability exp(-2 d1 d2 / dt).
                    const double dl2 = xp - lo;
                    if (std::min(d_lo, dl2) < 6.0 * delta
                        && rng.uniform() < std::exp(-2.0 * d_lo * dl2 / dt)) {
                        arrived_lo = true;
                    } else if (hi < kInfinity) {
                        const double dh2 = hi - xp;
                        if (std::min(d_hi, dh2) < 6.0 * delta
                            && rng.uniform() < std::exp(-2.0 * d_hi * dh2 / dt)) {
                            arrived_hi = true;
                        }
                    }
                }
                if (arrived_lo) {
                    obs.move(t - dt, t, e, x, lo);
                    x = lo;
                } else if (arrived_hi) {
                    obs.move(t - dt, t, e, x, hi);
                    x = hi;
                } else {
                    obs.move(t - dt, t, e, x, xp);
                    x = xp;
                    if (t >= T) {
                        pos = GraphPoint::interior(e, x);
                        obs.censor(T, pos);
                        return {StopInfo::Reason::Horizon, T, pos, 0};
                    }
                }
            }

            if (arrived_lo || arrived_hi) {
                const int marker = arrived_lo ? lo_marker : hi_marker;
                if (marker >= 0) {
                    pos = GraphPoint::interior(e, arrived_lo ? lo : hi);
                    return {StopInfo::Reason::MarkerHit, t, pos,
                            static_cast<std::size_t>(marker)};
                }
                const VertexId v = arrived_lo ? g_->initial_vertex(e)
                                              : g_->terminal_vertex(e);
                pos = GraphPoint::at_vertex(v);
            }
        }
    }

private:
    const MetricGraph* g_;
    const WentzellData* data_;
    std::vector<VertexClass> classes_;
    std::vector<std::vector<double>> markers_;
    double min_internal_ = kInfinity;
};

// ---------------------------------------------------------------------------
// Plain (single-graph) drivers.
// ---------------------------------------------------------------------------

Trajectory simulate_path(const MetricGraph& g, const WentzellData& data,
                         const GraphPoint& start, const SimConfig& cfg);

// Per-vertex estimates of E[e^{-lambda H_V}; X(H_V) = v]. lambda = 0 gives
// plain hitting probabilities. Start point must be interior.
std::vector<McEstimate> mc_hitting_transform(const MetricGraph& g,
                                             const WentzellData& data,
                                             const GraphPoint& start, double lambda,
                                             const SimConfig& cfg);

class EdgeFunction; // edge_function.hpp

McEstimate mc_resolvent(const MetricGraph& g, const WentzellData& data,
                        const GraphPoint& start, double lambda,
                        const EdgeFunction& f, const SimConfig& cfg);

// First-exit statistics from a vertex: frequency with which each incidence
// (aligned with L(v)) is the first to carry the path to distance radius from v.
std::vector<McEstimate> mc_first_exit_edge(const MetricGraph& g,
                                           const WentzellData& data, VertexId v,
                                           double radius, const SimConfig& cfg);

// Empirical jump times of an exponentially holding vertex (one per path;
// censored paths are dropped).
std::vector<double> mc_holding_times(const MetricGraph& g, const WentzellData& data,
                                     VertexId v, const SimConfig& cfg);

// S_n/K_n chain of a recorded trajectory: successive hits of connected
// vertices, each time excluding the most recently entered one.
CrossoverChain extract_crossovers(const Trajectory& traj,
                                  std::span<const VertexId> connected,
                                  const GraphPoint& start, bool killed);

// ---------------------------------------------------------------------------
// Glued simulation over a joined graph (components simulated independently,
// pasted together at shadow-vertex hits).
// ---------------------------------------------------------------------------

class GlueSimulator {
public:
    GlueSimulator(const MetricGraph& g1, const WentzellData& d1,
                  const MetricGraph& g2, const WentzellData& d2,
                  const MetricGraph& joined, const ShadowMap& sm);

    const MetricGraph& joined() const { return *joined_; }

    Trajectory simulate(const GraphPoint& start, const SimConfig& cfg) const;

    std::vector<McEstimate> mc_hitting_transform(const GraphPoint& start, double lambda,
                                                 const SimConfig& cfg) const;

    McEstimate mc_resolvent(const GraphPoint& start, double lambda,
                            const EdgeFunction& f, const SimConfig& cfg) const;

    // Crossover chains of cfg.paths glued runs.
    std::vector<CrossoverChain> crossover_chains(const GraphPoint& start,
                                                 const SimConfig& cfg) const;

    // Affine map from component-edge coordinates into a joined edge.
    struct EdgeMap {
        EdgeId joined_edge = kNoEdge;
        double offset = 0.0;
        double scale = 1.0; // +1 or -1
        double apply(double x) const { return offset + scale * x; }
    };
    const EdgeMap& edge_map(int comp, EdgeId e) const
    {
        return (comp == 1 ? map1_ : map2_)[e];
    }
    GraphPoint to_joined(int comp, const GraphPoint& p) const;
    VertexId to_joined_vertex(int comp, VertexId v) const
    {
        return (comp == 1 ? sm_->vertex_from_g1 : sm_->vertex_from_g2)[v];
    }
    struct ComponentPoint {
        int comp = 1;
        GraphPoint point;
    };
    // New internal edges map to the second component (open-edge attachment).
    ComponentPoint to_component(const GraphPoint& joined_point) const;

    // Connected vertex reached when the component path hits marker `idx` on
    // component edge e.
    VertexId crossover_target(int comp, EdgeId e, std::size_t idx) const;

    template <class Observer>
    StopInfo run(const GraphPoint& start, const SimConfig& cfg, CounterRng& rng,
                 Observer& obs, CrossoverChain* chain) const;

private:
    const MetricGraph* g1_;
    const MetricGraph* g2_;
    const MetricGraph* joined_;
    const ShadowMap* sm_;
    PathEngine eng1_;
    PathEngine eng2_;
    std::vector<EdgeMap> map1_, map2_;
    // (component edge, marker index) -> connected vertex in the joined graph
    std::vector<std::vector<VertexId>> marker_target_1_, marker_target_2_;
};

// Adapts a joined-coordinate observer to a component run.
template <class Observer>
struct MappedObserver {
    const GlueSimulator* glue = nullptr;
    int comp = 1;
    Observer* inner = nullptr;

    void move(double t0, double t1, EdgeId e, double x0, double x1)
    {
        const auto& m = glue->edge_map(comp, e);
        inner->move(t0, t1, m.joined_edge, m.apply(x0), m.apply(x1));
    }
    void hold(double t0, double t1, VertexId v)
    {
        inner->hold(t0, t1, glue->to_joined_vertex(comp, v));
    }
    bool vertex(double t, VertexId v)
    {
        return inner->vertex(t, glue->to_joined_vertex(comp, v));
    }
    void local_time(double t, VertexId v, double dl)
    {
        inner->local_time(t, glue->to_joined_vertex(comp, v), dl);
    }
    void death(double t, VertexId v)
    {
        inner->death(t, glue->to_joined_vertex(comp, v));
    }
    void censor(double t, const GraphPoint& p)
    {
        inner->censor(t, glue->to_joined(comp, p));
    }
};

template <class Observer>
StopInfo GlueSimulator::run(const GraphPoint& start, const SimConfig& cfg,
                            CounterRng& rng, Observer& obs, CrossoverChain* chain) const
{
    ComponentPoint cur = to_component(joined_->canonical(start));
    double t = 0.0;
    while (true) {
        StopInfo stop;
        if (cur.comp == 1) {
            MappedObserver<Observer> mapped{this, 1, &obs};
            stop = eng1_.run(cur.point, t, cfg, rng, mapped);
        } else {
            MappedObserver<Observer> mapped{this, 2, &obs};
            stop = eng2_.run(cur.point, t, cfg, rng, mapped);
        }
        switch (stop.reason) {
        case StopInfo::Reason::MarkerHit: {
            const VertexId target =
                crossover_target(cur.comp, stop.at.edge, stop.marker_index);
            if (chain) chain->entries.push_back({stop.time, target});
            t = stop.time;
            // Continue with an independent run of the other component.
            const int next_comp = cur.comp == 1 ? 2 : 1;
            const VertexId comp_v = [&] {
                const auto& vmap =
                    next_comp == 1 ? sm_->vertex_from_g1 : sm_->vertex_from_g2;
                for (VertexId v = 0; v < vmap.size(); ++v)
                    if (vmap[v] == target) return v;
                throw InvariantError("crossover target not in expected component");
            }();
            cur = {next_comp, GraphPoint::at_vertex(comp_v)};
            continue;
        }
        case StopInfo::Reason::Death:
            if (chain) chain->entries.push_back({kInfinity, kNoVertex});
            return stop;
        case StopInfo::Reason::Horizon:
        case StopInfo::Reason::VertexStop: {
            // Map the final position into joined coordinates.
            StopInfo out = stop;
            out.at = stop.at.is_interior()
                         ? to_joined(cur.comp, stop.at)
                         : (stop.at.is_vertex()
                                ? GraphPoint::at_vertex(
                                      to_joined_vertex(cur.comp, stop.at.vertex))
                                : stop.at);
            return out;
        }
        }
    }
}

// Deterministic parallel map over path indices: each result is a function of
// (seed, path index) only; reduction happens in index order.
std::vector<double> run_paths(std::size_t paths, std::uint64_t seed,
                              const std::function<double(std::size_t, CounterRng&)>& body);

McEstimate summarize(std::span<const double> values);

} // namespace graphbm
