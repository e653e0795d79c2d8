#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graphbm/io.hpp"
#include "graphbm/simulate.hpp"

namespace graphbm {

struct ComparisonRow {
    std::string name;
    double analytic = 0.0;
    double mc = 0.0;
    double se = 0.0;
    double z = 0.0;        // (mc - analytic) / se
    double allowance = 0.0; // absolute discretization allowance C * delta
    bool pass = false;      // |mc - analytic| <= 3 se + allowance
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    std::uint64_t seed = 0;
    double delta = 0.0;
    double horizon = 0.0;
    std::size_t paths = 0;
    std::uint64_t graph_digest = 0;

    bool all_pass() const;
    std::string to_csv() const;
    std::string to_table() const;
};

// Scenario file (JSON): {"seed", "delta", "horizon", "paths" defaults and
// "comparisons": [{name, kind, ...}]} with kinds:
//   hitting      {start, lambda, vertex, allowance=2}
//   resolvent    {start, lambda, f, allowance=2}
//   holding_mean {vertex}
//   exit_weight  {vertex, edge, radius, allowance=0}
ComparisonReport run_scenario(const GraphBundle& bundle, const std::string& scenario_text);

} // namespace graphbm
