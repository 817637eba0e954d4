#include <doctest.h>

#include <random>
#include <set>

#include "flowtrack/flow.hpp"

using namespace flowtrack;
using namespace flowtrack::flow;

namespace {

Detection make_det(int frame, double cx, double cy, double score = 1.0, int src = 0,
                   double w = 20.0, double h = 40.0) {
    return {frame, BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h), score, src};
}

// graph with explicit costs, bypassing score normalization
FlowGraph make_graph(const std::vector<int>& frames, const std::vector<double>& det_costs,
                     const std::vector<std::tuple<int, int, double>>& links, double c_in_out,
                     int max_gap = 15) {
    FlowGraph g;
    for (size_t i = 0; i < frames.size(); ++i)
        g.detections.push_back(make_det(frames[i], 10.0 * i, 0.0, 1.0, static_cast<int>(i)));
    g.det_cost = det_costs;
    for (const auto& [from, to, cost] : links)
        g.links.push_back({from, to, cost});
    g.c_in = c_in_out;
    g.c_out = c_in_out;
    g.max_link_gap = max_gap;
    return g;
}

double trajectory_cost(const FlowGraph& g, const std::vector<int>& path) {
    double c = g.c_in + g.c_out;
    for (size_t k = 0; k < path.size(); ++k) {
        c += g.det_cost[path[k]];
        if (k + 1 < path.size()) {
            for (const auto& l : g.links)
                if (l.from == path[k] && l.to == path[k + 1])
                    c += l.cost;
        }
    }
    return c;
}

}  // namespace

TEST_CASE("normalize_scores") {
    auto dets = [](std::vector<double> raw) {
        std::vector<Detection> d;
        for (size_t i = 0; i < raw.size(); ++i)
            d.push_back(make_det(static_cast<int>(i) + 1, 0, 0, raw[i]));
        return d;
    };
    CHECK(normalize_scores(dets({2, 4, 6})) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(normalize_scores(dets({7})) == std::vector<double>{0.5});
    auto full = normalize_scores(dets({0.0, 0.3, 1.0}));
    CHECK(full.front() == 0.0);
    CHECK(full.back() == 1.0);
}

TEST_CASE("detection and link cost values") {
    CHECK(detection_cost(0.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(detection_cost(1.0, 0.5) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(detection_cost(0.25, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(detection_cost(0.5, 0.5) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK(link_cost(0.35, 0.35) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(link_cost(1.0, 0.35) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(link_cost(0.0, 0.35) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(link_cost(0.675, 0.35) == doctest::Approx((-0.675 + 1.0) / 0.65 - 1.0).epsilon(1e-12));
}

TEST_CASE("cost functions continuous and strictly decreasing") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int k = 0; k < 100; ++k) {
        const double v = u(rng);
        CHECK(std::abs(detection_cost(std::nextafter(v, 0.0), v) - detection_cost(v, v)) < 1e-9);
        CHECK(detection_cost(v, v) == doctest::Approx(0.0).epsilon(1e-12));
        double prev = detection_cost(0.0, v);
        for (double s = 0.05; s <= 1.0; s += 0.05) {
            CHECK(detection_cost(s, v) < prev);
            prev = detection_cost(s, v);
        }
    }
}

TEST_CASE("build_graph structure") {
    Sequence seq;
    seq.detections = {make_det(1, 0, 0, 0.9, 0), make_det(2, 5, 0, 0.8, 0)};
    CostConfig cfg;
    PairScoreMap scores{{{0, 1}, 0.9}};

    auto g = build_graph(seq, scores, cfg);
    CHECK(g.detections.size() == 2);
    CHECK(g.links.size() == 1);
    CHECK(g.det_cost.size() == 2);

    auto empty = build_graph(Sequence{}, {}, cfg);
    CHECK(empty.detections.empty());

    Sequence gapped;
    gapped.detections = {make_det(1, 0, 0, 0.9, 0), make_det(21, 5, 0, 0.8, 0)};
    auto g2 = build_graph(gapped, PairScoreMap{{{0, 1}, 0.9}}, cfg);
    CHECK(g2.links.empty());  // gap 20 > max_link_gap 15

    CHECK_THROWS_AS(build_graph(seq, PairScoreMap{{{0, 1}, 1.5}}, cfg), std::invalid_argument);
}

TEST_CASE("two-detection worked example") {
    auto g = make_graph({1, 2}, {-0.5, -0.5}, {{0, 1, -0.5}}, 0.6);
    auto sol = solve_mcf(g);
    CHECK(sol.total_cost == doctest::Approx(-0.3).epsilon(1e-12));
    REQUIRE(sol.trajectories.size() == 1);
    CHECK(sol.trajectories[0].detections.size() == 2);

    auto oracle = brute_force_solve(g);
    CHECK(oracle.total_cost == doctest::Approx(sol.total_cost).epsilon(1e-12));

    // higher entry/exit cost makes the best trajectory positive: zero flow
    g.c_in = g.c_out = 0.8;
    auto sol2 = solve_mcf(g);
    CHECK(sol2.total_cost == 0.0);
    CHECK(sol2.trajectories.empty());
}

TEST_CASE("all-positive costs give zero flow") {
    auto g = make_graph({1, 2, 3}, {0.2, 0.3, 0.1}, {{0, 1, 0.4}, {1, 2, 0.2}}, 0.5);
    auto sol = solve_mcf(g);
    CHECK(sol.total_cost == 0.0);
    CHECK(sol.trajectories.empty());
    CHECK(brute_force_solve(g).total_cost == 0.0);
}

TEST_CASE("single negative detection") {
    auto g = make_graph({1}, {-2.0}, {}, 0.5);
    auto sol = brute_force_solve(g);
    CHECK(sol.total_cost == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(solve_mcf(g).total_cost == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("two disjoint paths share no detection") {
    auto g = make_graph({1, 1, 2, 2}, {-0.9, -0.9, -0.9, -0.9},
                        {{0, 2, -0.9}, {0, 3, -0.9}, {1, 2, -0.9}, {1, 3, -0.9}}, 0.2);
    g.detections[1].source_index = 1;
    g.detections[3].source_index = 1;
    auto sol = solve_mcf(g);
    REQUIRE(sol.paths.size() == 2);
    std::set<int> used;
    for (const auto& path : sol.paths)
        for (int i : path)
            CHECK(used.insert(i).second);
    CHECK(used.size() == 4);
}

TEST_CASE("solver matches brute force on random graphs") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> cost(-1.0, 1.0), inout(0.05, 1.0), coin(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = static_cast<int>(rng() % 11);
        std::vector<int> frames;
        int f = 1;
        for (int i = 0; i < n; ++i) {
            frames.push_back(f);
            if (coin(rng) < 0.6)
                f += 1 + static_cast<int>(rng() % 3);
        }
        std::vector<double> det_costs;
        for (int i = 0; i < n; ++i)
            det_costs.push_back(cost(rng));
        const int max_gap = 1 + static_cast<int>(rng() % 5);
        std::vector<std::tuple<int, int, double>> links;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const int gap = frames[j] - frames[i];
                if (gap < 1 || gap > max_gap)
                    continue;
                if (coin(rng) < 0.6)
                    links.push_back({i, j, cost(rng)});
            }
        auto g = make_graph(frames, det_costs, links, inout(rng), max_gap);
        for (size_t i = 0; i < g.detections.size(); ++i)
            g.detections[i].source_index = static_cast<int>(i);

        auto fast = solve_mcf(g);
        auto slow = brute_force_solve(g);
        CHECK(std::abs(fast.total_cost - slow.total_cost) < 1e-9);

        for (const auto& path : fast.paths) {
            CHECK(trajectory_cost(g, path) <= 1e-9);  // removal never helps
            for (size_t k = 1; k < path.size(); ++k) {
                const int gap = g.detections[path[k]].frame - g.detections[path[k - 1]].frame;
                CHECK(gap >= 1);
                CHECK(gap <= max_gap);
            }
        }
    }
}

TEST_CASE("raising c_in_out never adds trajectories") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> cost(-1.0, 0.2), coin(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 10;
        std::vector<int> frames;
        std::vector<double> det_costs;
        for (int i = 0; i < n; ++i) {
            frames.push_back(1 + i / 2);
            det_costs.push_back(cost(rng));
        }
        std::vector<std::tuple<int, int, double>> links;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (frames[j] > frames[i] && frames[j] - frames[i] <= 3 && coin(rng) < 0.7)
                    links.push_back({i, j, cost(rng)});

        size_t prev = SIZE_MAX;
        for (double c = 0.1; c <= 1.51; c += 0.2) {
            auto g = make_graph(frames, det_costs, links, c, 3);
            for (size_t i = 0; i < g.detections.size(); ++i)
                g.detections[i].source_index = static_cast<int>(i);
            auto sol = solve_mcf(g);
            CHECK(sol.trajectories.size() <= prev);
            prev = sol.trajectories.size();
        }
    }
}

TEST_CASE("track_sequence with a perfect scorer recovers ground truth tracks") {
    std::mt19937_64 rng(15);
    Sequence seq;
    std::vector<std::pair<std::pair<int, int>, int>> det_id;  // (frame, src) -> gt id
    for (int f = 1; f <= 8; ++f) {
        int src = 0;
        for (int id = 0; id < 3; ++id) {
            Detection d = make_det(f, 100.0 * id + 3.0 * f, 50.0 + id, 1.0, src);
            seq.detections.push_back(d);
            det_id.push_back({{f, src}, id});
            ++src;
        }
    }
    auto lookup = [&](const Detection& d) {
        for (const auto& [key, id] : det_id)
            if (key.first == d.frame && key.second == d.source_index)
                return id;
        return -1;
    };
    PairScorer oracle = [&](const Detection& a, const Detection& b) -> std::optional<double> {
        return lookup(a) == lookup(b) ? 1.0 : 0.0;
    };
    CostConfig cfg;
    cfg.c_in_out = 0.6;
    auto sol = track_sequence(seq, oracle, cfg);
    REQUIRE(sol.trajectories.size() == 3);
    for (const auto& t : sol.trajectories) {
        CHECK(t.detections.size() == 8);
        const int id = lookup(t.detections[0]);
        for (const auto& d : t.detections)
            CHECK(lookup(d) == id);
    }

    // constant-zero scorer: all link costs +1, no linking
    PairScorer zero = [](const Detection&, const Detection&) { return 0.0; };
    auto sol0 = track_sequence(seq, zero, cfg);
    for (const auto& t : sol0.trajectories)
        CHECK(t.detections.size() == 1);
}

TEST_CASE("lp2d scorer decreases with distance") {
    auto scorer = make_lp2d_scorer(100.0);
    Detection a = make_det(1, 0, 0);
    CHECK(*scorer(a, make_det(2, 10, 0)) > *scorer(a, make_det(2, 50, 0)));
    CHECK(*scorer(a, make_det(2, 500, 0)) == 0.0);
    CHECK(*scorer(a, make_det(2, 0, 0)) == 1.0);
}

TEST_CASE("parallel and serial pair scoring agree") {
    std::mt19937_64 rng(27);
    std::uniform_real_distribution<double> pos(0.0, 500.0);
    std::vector<Detection> dets;
    for (int f = 1; f <= 30; ++f)
        for (int s = 0; s < 4; ++s)
            dets.push_back(make_det(f, pos(rng), pos(rng), 1.0, s));
    auto scorer = make_lp2d_scorer(200.0);
    auto par = score_pairs(dets, scorer, 15, true);
    auto ser = score_pairs(dets, scorer, 15, false);
    CHECK(par == ser);
    CHECK(!par.empty());
}
