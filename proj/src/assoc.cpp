#include "flowtrack/assoc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <tuple>

namespace flowtrack::assoc {

ContextualFeatures contextual_features(const Detection& a, const Detection& b) {
    if (a.frame == b.frame)
        throw std::invalid_argument("contextual_features: equal frames, velocity undefined");
    const auto [xa, ya] = center(a.box);
    const auto [xb, yb] = center(b.box);
    const double dt = static_cast<double>(b.frame - a.frame);
    ContextualFeatures f;
    f.rel_size_change = {(a.box.width - b.box.width) / (a.box.width + b.box.width),
                         (a.box.height - b.box.height) / (a.box.height + b.box.height)};
    f.position_change = {xa - xb, ya - yb};
    f.rel_velocity = {f.position_change[0] / dt, f.position_change[1] / dt};
    return f;
}

std::vector<int> label_detections(const Sequence& seq, double iou_threshold) {
    std::vector<int> labels(seq.detections.size(), -1);

    std::map<int, std::vector<int>> det_by_frame;  // frame -> detection indices
    for (size_t i = 0; i < seq.detections.size(); ++i)
        det_by_frame[seq.detections[i].frame].push_back(static_cast<int>(i));
    std::map<int, std::vector<int>> gt_by_frame;  // frame -> gt entry indices
    for (size_t g = 0; g < seq.ground_truth.size(); ++g)
        gt_by_frame[seq.ground_truth[g].det.frame].push_back(static_cast<int>(g));

    for (const auto& [frame, dets] : det_by_frame) {
        auto it = gt_by_frame.find(frame);
        if (it == gt_by_frame.end())
            continue;
        const auto& gts = it->second;

        struct Cand {
            double overlap;
            int det;
            int gt;
        };
        std::vector<Cand> cands;
        for (int di : dets)
            for (int gi : gts) {
                const double o = iou(seq.detections[di].box, seq.ground_truth[gi].det.box);
                if (o >= iou_threshold)
                    cands.push_back({o, di, gi});
            }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.overlap != b.overlap)
                return a.overlap > b.overlap;
            return std::tie(a.det, a.gt) < std::tie(b.det, b.gt);
        });

        std::vector<char> det_used(seq.detections.size(), 0), gt_used(seq.ground_truth.size(), 0);
        for (const auto& c : cands) {
            if (det_used[c.det] || gt_used[c.gt])
                continue;
            det_used[c.det] = 1;
            gt_used[c.gt] = 1;
            labels[c.det] = seq.ground_truth[c.gt].track_id;
        }
    }
    return labels;
}

namespace {

using IndexPair = std::pair<int, int>;

std::vector<IndexPair> subsample(std::vector<IndexPair> pool, long long target,
                                 std::mt19937_64& rng) {
    const long long n = static_cast<long long>(pool.size());
    if (target >= n)
        return pool;
    for (long long i = 0; i < target; ++i) {
        const long long j = i + static_cast<long long>(rng() % static_cast<std::uint64_t>(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(static_cast<size_t>(std::max<long long>(target, 0)));
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

std::vector<PairSample> generate_pairs(const Sequence& seq, const PairGenConfig& cfg) {
    if (!seq.has_ground_truth())
        throw std::invalid_argument("generate_pairs: sequence has no ground truth");
    if (cfg.rewind_window < 1)
        throw std::invalid_argument("generate_pairs: rewind window must be >= 1");

    const std::vector<int> ids = label_detections(seq, cfg.gt_match_iou);

    // detections in (frame, source order)
    std::vector<int> order(seq.detections.size());
    for (size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::pair(seq.detections[a].frame, seq.detections[a].source_index) <
               std::pair(seq.detections[b].frame, seq.detections[b].source_index);
    });

    std::vector<IndexPair> positives;
    std::array<std::vector<IndexPair>, 3> negatives;  // diff-id, tp-fp, fp-fp
    for (size_t ai = 0; ai < order.size(); ++ai) {
        const int i = order[ai];
        for (size_t bi = ai + 1; bi < order.size(); ++bi) {
            const int j = order[bi];
            const int gap = seq.detections[j].frame - seq.detections[i].frame;
            if (gap < 1)
                continue;
            if (gap > cfg.rewind_window)
                break;
            const bool tp_i = ids[i] >= 0;
            const bool tp_j = ids[j] >= 0;
            if (tp_i && tp_j) {
                if (ids[i] == ids[j])
                    positives.push_back({i, j});
                else
                    negatives[0].push_back({i, j});
            } else if (tp_i || tp_j) {
                negatives[1].push_back({i, j});
            } else {
                negatives[2].push_back({i, j});
            }
        }
    }

    std::mt19937_64 rng(cfg.seed);
    const long long n_pos = static_cast<long long>(positives.size());

    std::vector<PairSample> out;
    auto emit = [&](const std::vector<IndexPair>& pairs, PairLabel label) {
        for (const auto& [i, j] : pairs) {
            PairSample s;
            s.a = seq.detections[i];
            s.b = seq.detections[j];
            s.context = contextual_features(s.a, s.b);
            s.label = label;
            out.push_back(std::move(s));
        }
    };
    emit(positives, PairLabel::match);
    for (int c = 0; c < 3; ++c) {
        if (!(cfg.negative_ratio[c] >= 0.0) || !std::isfinite(cfg.negative_ratio[c]))
            throw std::invalid_argument("generate_pairs: negative ratio must be finite and >= 0");
        const long long target = std::llround(cfg.negative_ratio[c] * n_pos);
        emit(subsample(negatives[c], target, rng), PairLabel::no_match);
    }
    return out;
}

std::vector<double> assemble_feature_vector(const PairSample& p) {
    std::vector<double> v;
    if (p.external)
        v = *p.external;
    v.push_back(p.context.rel_size_change[0]);
    v.push_back(p.context.rel_size_change[1]);
    v.push_back(p.context.position_change[0]);
    v.push_back(p.context.position_change[1]);
    v.push_back(p.context.rel_velocity[0]);
    v.push_back(p.context.rel_velocity[1]);
    return v;
}

}  // namespace flowtrack::assoc
