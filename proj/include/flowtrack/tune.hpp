#pragma once

#include <string>
#include <vector>

#include "flowtrack/clearmot.hpp"
#include "flowtrack/flow.hpp"

namespace flowtrack::tune {

struct GridAxis {
    std::string key;  // vdet | vlink | cinout
    std::vector<double> values;
};

// Grid spec `key=start:stop:step[,key=...]`; a bare `key=value` is a
// single-point axis. Throws on unknown keys or an empty grid.
std::vector<GridAxis> parse_grid(const std::string& spec);

struct TunePoint {
    flow::CostConfig cfg;
    double mean_mota = 0.0;
    int id_switches = 0;
    int fp = 0;
    int trajectories = 0;
};

struct TuneResult {
    std::vector<TunePoint> table;  // cartesian order, first axis slowest
    int best_index = -1;
};

// Tracks and evaluates every sequence at every grid point. Winner maximizes
// mean MOTA; ties broken by fewer ID switches, then lower FP. Grid points run
// in parallel; the table order is canonical.
TuneResult sweep(const std::vector<Sequence>& seqs, const flow::PairScorer& scorer,
                 const flow::CostConfig& base, const std::vector<GridAxis>& grid,
                 bool parallel = true);

}  // namespace flowtrack::tune
