#pragma once

#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "flowtrack/core.hpp"

namespace flowtrack::flow {

struct CostConfig {
    double v_det = 0.5;    // detection cost threshold, in (0,1)
    double v_link = 0.35;  // link cost threshold, in (0,1)
    double c_in_out = 0.5; // shared entry/exit cost, > 0
    int max_link_gap = 15;

    void validate() const;
};

// Min-max normalization of raw detector scores over one sequence; all-equal
// inputs map to 0.5.
std::vector<double> normalize_scores(const std::vector<Detection>& dets);

// Piecewise-linear signed costs: +1 at 0, 0 at the threshold, -1 at 1.
double detection_cost(double s, double v_det);
double link_cost(double p, double v_link);

// Node-split flow network over one sequence's detections. Detection i maps to
// a (u_i, v_i) pair: entry source->u_i at c_in, detection u_i->v_i at
// det_cost[i], link v_i->u_j, exit v_i->sink at c_out. All capacities 1.
struct FlowGraph {
    struct Link {
        int from = 0;  // detection indices
        int to = 0;
        double cost = 0.0;
    };
    std::vector<Detection> detections;  // sorted by (frame, source order)
    std::vector<double> det_cost;
    std::vector<Link> links;  // sorted by (from, to), no duplicates
    double c_in = 0.0;
    double c_out = 0.0;
    int max_link_gap = 15;
};

// (i, j) are indices into the graph's detection order; values are match
// probabilities in [0,1]. Pairs absent from the map get no link edge.
using PairScoreMap = std::map<std::pair<int, int>, double>;

FlowGraph build_graph(const Sequence& seq, const PairScoreMap& pair_scores,
                      const CostConfig& cfg);

// Unit flows per edge family, parallel to the graph arrays.
struct EdgeFlow {
    std::vector<char> entry;
    std::vector<char> exit;
    std::vector<char> detection;
    std::vector<char> link;
};

struct FlowSolution {
    double total_cost = 0.0;
    EdgeFlow flow;
    std::vector<Trajectory> trajectories;
    std::vector<std::vector<int>> paths;  // detection indices per trajectory
};

// Successive shortest paths on the residual network; augments while the best
// source->sink path has negative cost. Globally optimal over integral flows
// of any magnitude, so total_cost <= 0 always.
FlowSolution solve_mcf(const FlowGraph& g);

// Follows unit flow from the source; each path becomes a trajectory with
// sequentially assigned ids. Throws on non-conserving flow.
std::vector<Trajectory> extract_trajectories(const FlowGraph& g, const EdgeFlow& flow,
                                             std::vector<std::vector<int>>* paths = nullptr);

// Exhaustive enumeration over all partitions into frame-increasing paths.
// Testing oracle; limited to 12 detections.
FlowSolution brute_force_solve(const FlowGraph& g);

// Pairwise scorer: probability in [0,1], or nullopt for "no candidate edge".
using PairScorer = std::function<std::optional<double>(const Detection&, const Detection&)>;

// 2D-distance baseline: max(0, 1 - center distance / tau).
PairScorer make_lp2d_scorer(double tau);

// Scores all gap-valid pairs (OpenMP over the earlier detection when
// parallel); edge order is canonical regardless of thread count.
PairScoreMap score_pairs(const std::vector<Detection>& dets, const PairScorer& scorer,
                         int max_link_gap, bool parallel = true);

// normalize -> score pairs -> build graph -> solve -> extract.
FlowSolution track_sequence(const Sequence& seq, const PairScorer& scorer,
                            const CostConfig& cfg, bool parallel = true);

}  // namespace flowtrack::flow
