#include "flowtrack/flow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace flowtrack::flow {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<Detection> sorted_detections(const std::vector<Detection>& dets) {
    std::vector<Detection> out = dets;
    std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        if (a.frame != b.frame)
            return a.frame < b.frame;
        return a.source_index < b.source_index;
    });
    return out;
}
}  // namespace

void CostConfig::validate() const {
    if (!(v_det > 0.0 && v_det < 1.0))
        throw std::invalid_argument("v_det must be in (0,1)");
    if (!(v_link > 0.0 && v_link < 1.0))
        throw std::invalid_argument("v_link must be in (0,1)");
    if (!(c_in_out > 0.0))
        throw std::invalid_argument("c_in_out must be > 0");
    if (max_link_gap < 1)
        throw std::invalid_argument("max_link_gap must be >= 1");
}

std::vector<double> normalize_scores(const std::vector<Detection>& dets) {
    std::vector<double> out(dets.size(), 0.5);
    if (dets.empty())
        return out;
    double lo = dets.front().score, hi = dets.front().score;
    for (const auto& d : dets) {
        lo = std::min(lo, d.score);
        hi = std::max(hi, d.score);
    }
    if (hi == lo)
        return out;  // all-equal rule
    for (size_t i = 0; i < dets.size(); ++i)
        out[i] = (dets[i].score - lo) / (hi - lo);
    return out;
}

double detection_cost(double s, double v_det) {
    if (s < v_det)
        return -s / v_det + 1.0;
    return (-s + 1.0) / (1.0 - v_det) - 1.0;
}

double link_cost(double p, double v_link) {
    if (p < v_link)
        return -p / v_link + 1.0;
    return (-p + 1.0) / (1.0 - v_link) - 1.0;
}

FlowGraph build_graph(const Sequence& seq, const PairScoreMap& pair_scores,
                      const CostConfig& cfg) {
    cfg.validate();
    FlowGraph g;
    g.detections = sorted_detections(seq.detections);
    g.c_in = cfg.c_in_out;
    g.c_out = cfg.c_in_out;
    g.max_link_gap = cfg.max_link_gap;

    const std::vector<double> s = normalize_scores(g.detections);
    g.det_cost.resize(s.size());
    for (size_t i = 0; i < s.size(); ++i)
        g.det_cost[i] = detection_cost(s[i], cfg.v_det);

    const int n = static_cast<int>(g.detections.size());
    for (const auto& [key, p] : pair_scores) {
        const auto [i, j] = key;
        if (i < 0 || i >= n || j < 0 || j >= n)
            throw std::invalid_argument("build_graph: pair index out of range");
        if (!(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("build_graph: pair score outside [0,1]");
        const int gap = g.detections[j].frame - g.detections[i].frame;
        if (gap < 1 || gap > cfg.max_link_gap)
            continue;
        g.links.push_back({i, j, link_cost(p, cfg.v_link)});
    }
    // pair_scores is an ordered map, so links arrive sorted by (from, to)
    return g;
}

namespace {

// residual-network edge; forward edges carry (family, fam_idx) back-pointers
struct ResEdge {
    int to;
    int cap;
    double cost;
    int rev;
    int family;  // 0 entry, 1 detection, 2 exit, 3 link, -1 reverse
    int fam_idx;
};

struct ResGraph {
    std::vector<std::vector<ResEdge>> adj;

    explicit ResGraph(int n) : adj(n) {}

    void add(int u, int v, double cost, int family, int fam_idx) {
        adj[u].push_back({v, 1, cost, static_cast<int>(adj[v].size()), family, fam_idx});
        adj[v].push_back({u, 0, -cost, static_cast<int>(adj[u].size()) - 1, -1, -1});
    }
};

}  // namespace

FlowSolution solve_mcf(const FlowGraph& g) {
    const int n = static_cast<int>(g.detections.size());
    const int source = 0, sink = 1;
    auto u_node = [](int i) { return 2 + 2 * i; };
    auto v_node = [](int i) { return 3 + 2 * i; };

    ResGraph res(2 + 2 * n);
    for (int i = 0; i < n; ++i) {
        res.add(source, u_node(i), g.c_in, 0, i);
        res.add(u_node(i), v_node(i), g.det_cost[i], 1, i);
        res.add(v_node(i), sink, g.c_out, 2, i);
    }
    for (size_t l = 0; l < g.links.size(); ++l)
        res.add(v_node(g.links[l].from), u_node(g.links[l].to), g.links[l].cost, 3,
                static_cast<int>(l));

    const int nodes = 2 + 2 * n;
    FlowSolution sol;
    std::vector<double> dist(nodes);
    std::vector<int> par_node(nodes), par_edge(nodes);
    std::vector<char> in_queue(nodes);

    while (true) {
        // SPFA shortest path; edge costs can be negative, no negative cycles
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(in_queue.begin(), in_queue.end(), 0);
        dist[source] = 0.0;
        std::deque<int> queue{source};
        in_queue[source] = 1;
        while (!queue.empty()) {
            const int u = queue.front();
            queue.pop_front();
            in_queue[u] = 0;
            for (size_t e = 0; e < res.adj[u].size(); ++e) {
                const ResEdge& edge = res.adj[u][e];
                if (edge.cap <= 0)
                    continue;
                const double nd = dist[u] + edge.cost;
                if (nd < dist[edge.to]) {
                    dist[edge.to] = nd;
                    par_node[edge.to] = u;
                    par_edge[edge.to] = static_cast<int>(e);
                    if (!in_queue[edge.to]) {
                        queue.push_back(edge.to);
                        in_queue[edge.to] = 1;
                    }
                }
            }
        }
        if (!(dist[sink] < 0.0))
            break;
        sol.total_cost += dist[sink];
        for (int v = sink; v != source; v = par_node[v]) {
            ResEdge& fwd = res.adj[par_node[v]][par_edge[v]];
            fwd.cap -= 1;
            res.adj[v][fwd.rev].cap += 1;
        }
    }

    sol.flow.entry.assign(n, 0);
    sol.flow.exit.assign(n, 0);
    sol.flow.detection.assign(n, 0);
    sol.flow.link.assign(g.links.size(), 0);
    for (int u = 0; u < nodes; ++u)
        for (const auto& e : res.adj[u]) {
            if (e.family < 0 || e.cap != 0)
                continue;
            switch (e.family) {
                case 0: sol.flow.entry[e.fam_idx] = 1; break;
                case 1: sol.flow.detection[e.fam_idx] = 1; break;
                case 2: sol.flow.exit[e.fam_idx] = 1; break;
                case 3: sol.flow.link[e.fam_idx] = 1; break;
            }
        }

    sol.trajectories = extract_trajectories(g, sol.flow, &sol.paths);
    return sol;
}

std::vector<Trajectory> extract_trajectories(const FlowGraph& g, const EdgeFlow& flow,
                                             std::vector<std::vector<int>>* paths_out) {
    const int n = static_cast<int>(g.detections.size());
    std::vector<int> link_out(n, -1), link_in_count(n, 0);
    for (size_t l = 0; l < g.links.size(); ++l) {
        if (!flow.link[l])
            continue;
        if (link_out[g.links[l].from] != -1)
            throw std::runtime_error("extract_trajectories: duplicate outgoing link flow");
        link_out[g.links[l].from] = static_cast<int>(l);
        link_in_count[g.links[l].to] += 1;
    }
    for (int i = 0; i < n; ++i) {
        const int in = flow.entry[i] + link_in_count[i];
        const int out = flow.exit[i] + (link_out[i] >= 0 ? 1 : 0);
        if (in != flow.detection[i] || out != flow.detection[i] || in > 1)
            throw std::runtime_error("extract_trajectories: flow not conserved at detection " +
                                     std::to_string(i));
    }

    std::vector<Trajectory> tracks;
    std::vector<std::vector<int>> paths;
    for (int i = 0; i < n; ++i) {
        if (!flow.entry[i])
            continue;
        std::vector<int> path;
        int cur = i;
        while (true) {
            path.push_back(cur);
            if (link_out[cur] < 0) {
                if (!flow.exit[cur])
                    throw std::runtime_error("extract_trajectories: path without exit flow");
                break;
            }
            cur = g.links[link_out[cur]].to;
        }
        Trajectory t;
        t.id = static_cast<int>(tracks.size()) + 1;
        for (int idx : path)
            t.detections.push_back(g.detections[idx]);
        tracks.push_back(std::move(t));
        paths.push_back(std::move(path));
    }
    if (paths_out)
        *paths_out = std::move(paths);
    return tracks;
}

namespace {

struct BruteState {
    const FlowGraph& g;
    std::vector<std::vector<std::pair<int, double>>> out_links;  // per detection
    std::vector<double> suffix_bound;  // optimistic gain from detections idx..n-1
    double best_cost = 0.0;
    std::vector<std::vector<int>> best_paths;
    std::vector<std::vector<int>> paths;   // current open paths
    std::vector<double> path_cost;         // cost so far incl. c_in, dets, links

    void search(int idx, double acc) {
        const int n = static_cast<int>(g.detections.size());
        if (acc + suffix_bound[idx] >= best_cost)
            return;
        if (idx == n) {
            const double total = acc + static_cast<double>(paths.size()) * g.c_out;
            if (total < best_cost) {
                best_cost = total;
                best_paths = paths;
            }
            return;
        }
        // skip detection idx
        search(idx + 1, acc);
        // start a new path at idx
        paths.push_back({idx});
        search(idx + 1, acc + g.c_in + g.det_cost[idx]);
        paths.pop_back();
        // append idx to an open path via an existing link
        for (size_t p = 0; p < paths.size(); ++p) {
            const int end = paths[p].back();
            for (const auto& [to, cost] : out_links[end]) {
                if (to != idx)
                    continue;
                paths[p].push_back(idx);
                search(idx + 1, acc + cost + g.det_cost[idx]);
                paths[p].pop_back();
            }
        }
    }
};

}  // namespace

FlowSolution brute_force_solve(const FlowGraph& g) {
    const int n = static_cast<int>(g.detections.size());
    if (n > 12)
        throw std::invalid_argument("brute_force_solve: limited to 12 detections");

    BruteState st{g, {}, {}, 0.0, {}, {}, {}};
    st.out_links.resize(n);
    std::vector<double> min_in_link(n, kInf);
    for (const auto& l : g.links) {
        st.out_links[l.from].push_back({l.to, l.cost});
        min_in_link[l.to] = std::min(min_in_link[l.to], l.cost);
    }
    // optimistic per-detection gain: cheapest way in plus its detection cost,
    // exits ignored (c_out > 0)
    st.suffix_bound.assign(n + 1, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        const double in = std::min(g.c_in, min_in_link[i]);
        st.suffix_bound[i] = st.suffix_bound[i + 1] + std::min(0.0, g.det_cost[i] + in);
    }
    // bound test uses >=, so seed best_cost just above the empty solution
    st.best_cost = 1e-15;
    st.search(0, 0.0);
    if (st.best_cost > 0.0)
        st.best_cost = 0.0;  // empty solution

    FlowSolution sol;
    sol.total_cost = st.best_cost;
    sol.flow.entry.assign(n, 0);
    sol.flow.exit.assign(n, 0);
    sol.flow.detection.assign(n, 0);
    sol.flow.link.assign(g.links.size(), 0);

    std::map<std::pair<int, int>, int> link_index;
    for (size_t l = 0; l < g.links.size(); ++l)
        link_index[{g.links[l].from, g.links[l].to}] = static_cast<int>(l);
    for (const auto& path : st.best_paths) {
        sol.flow.entry[path.front()] = 1;
        sol.flow.exit[path.back()] = 1;
        for (size_t k = 0; k < path.size(); ++k) {
            sol.flow.detection[path[k]] = 1;
            if (k + 1 < path.size())
                sol.flow.link[link_index.at({path[k], path[k + 1]})] = 1;
        }
    }
    sol.trajectories = extract_trajectories(g, sol.flow, &sol.paths);
    return sol;
}

PairScorer make_lp2d_scorer(double tau) {
    return [tau](const Detection& a, const Detection& b) -> std::optional<double> {
        const auto [xa, ya] = center(a.box);
        const auto [xb, yb] = center(b.box);
        const double dist = std::hypot(xa - xb, ya - yb);
        return std::max(0.0, 1.0 - dist / tau);
    };
}

PairScoreMap score_pairs(const std::vector<Detection>& dets, const PairScorer& scorer,
                         int max_link_gap, bool parallel) {
    const int n = static_cast<int>(dets.size());
    std::vector<std::vector<std::pair<int, double>>> per_i(n);

#pragma omp parallel for schedule(dynamic, 16) if (parallel)
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const int gap = dets[j].frame - dets[i].frame;
            if (gap > max_link_gap)
                break;
            if (gap < 1)
                continue;
            if (auto p = scorer(dets[i], dets[j]))
                per_i[i].push_back({j, *p});
        }
    }

    PairScoreMap out;
    for (int i = 0; i < n; ++i)
        for (const auto& [j, p] : per_i[i])
            out.emplace(std::make_pair(i, j), p);
    return out;
}

FlowSolution track_sequence(const Sequence& seq, const PairScorer& scorer,
                            const CostConfig& cfg, bool parallel) {
    cfg.validate();
    Sequence sorted = seq;
    sorted.detections = sorted_detections(seq.detections);
    const PairScoreMap scores =
        score_pairs(sorted.detections, scorer, cfg.max_link_gap, parallel);
    const FlowGraph g = build_graph(sorted, scores, cfg);
    return solve_mcf(g);
}

}  // namespace flowtrack::flow
