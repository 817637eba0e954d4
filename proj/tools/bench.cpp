// Timing harness: serial vs OpenMP-parallel pair scoring and GBM training on
// a synthetic workload. Also checks that both paths produce identical output.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "flowtrack/flow.hpp"
#include "flowtrack/gbm.hpp"
#include "flowtrack/parallel.hpp"

using namespace flowtrack;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Detection> make_detections(int n_frames, int per_frame) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> pos(0.0, 1920.0);
    std::vector<Detection> dets;
    for (int f = 1; f <= n_frames; ++f)
        for (int k = 0; k < per_frame; ++k)
            dets.push_back({f, BoundingBox(pos(rng), pos(rng) * 0.5, 30, 60), 0.9, k});
    return dets;
}

gbm::Dataset make_dataset(int n, int d) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    gbm::Dataset data;
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(d);
        double lin = 0.0;
        for (int f = 0; f < d; ++f) {
            row[f] = u(rng);
            lin += (f % 2 ? -0.5 : 0.5) * row[f];
        }
        data.features.push_back(std::move(row));
        data.labels.push_back(lin + 0.7 * u(rng) > 0.0 ? 1 : 0);
    }
    return data;
}

void set_threads(int n) {
#ifdef _OPENMP
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace

int main() {
    apply_thread_cap();
    const int threads = max_threads();
    std::printf("hardware threads available to the runtime: %d\n\n", threads);

    {
        const auto dets = make_detections(300, 40);
        auto scorer = flow::make_lp2d_scorer(200.0);
        std::printf("pair scoring: %zu detections, gap window 15\n", dets.size());

        auto t0 = Clock::now();
        auto serial = flow::score_pairs(dets, scorer, 15, false);
        const double t_serial = seconds_since(t0);

        t0 = Clock::now();
        auto parallel = flow::score_pairs(dets, scorer, 15, true);
        const double t_parallel = seconds_since(t0);

        std::printf("  serial:   %.3fs  (%zu edges)\n", t_serial, serial.size());
        std::printf("  parallel: %.3fs  (%zu edges)\n", t_parallel, parallel.size());
        std::printf("  speedup:  %.2fx, identical: %s\n\n", t_serial / t_parallel,
                    serial == parallel ? "yes" : "NO");
        if (serial != parallel)
            return 1;
    }

    {
        auto data = make_dataset(20000, 12);
        gbm::GbmConfig cfg;
        cfg.n_trees = 100;
        std::printf("boosting: %zu samples x 12 features, %d trees, depth %d\n",
                    data.features.size(), cfg.n_trees, cfg.max_depth);

        set_threads(1);
        auto t0 = Clock::now();
        auto serial_model = gbm::train(data, cfg);
        const double t_serial = seconds_since(t0);

        set_threads(threads);
        t0 = Clock::now();
        auto parallel_model = gbm::train(data, cfg);
        const double t_parallel = seconds_since(t0);

        bool identical = serial_model.trees.size() == parallel_model.trees.size();
        for (size_t i = 0; identical && i < data.features.size(); i += 97)
            identical = serial_model.predict(data.features[i]) ==
                        parallel_model.predict(data.features[i]);

        std::printf("  serial (1 thread): %.3fs\n", t_serial);
        std::printf("  parallel:          %.3fs\n", t_parallel);
        std::printf("  speedup:  %.2fx, identical: %s\n", t_serial / t_parallel,
                    identical ? "yes" : "NO");
        if (!identical)
            return 1;
    }
    return 0;
}
