#include "flowtrack/clearmot.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <tuple>

namespace flowtrack::clearmot {

FrameMatchResult match_frame(std::map<int, int>& last_match,
                             const std::vector<std::pair<int, BoundingBox>>& gt,
                             const std::vector<std::pair<int, BoundingBox>>& hyp,
                             double iou_threshold) {
    FrameMatchResult out;
    std::set<int> gt_free, hyp_free;
    std::map<int, const BoundingBox*> gt_box, hyp_box;
    for (const auto& [id, box] : gt) {
        gt_free.insert(id);
        gt_box[id] = &box;
    }
    for (const auto& [id, box] : hyp) {
        hyp_free.insert(id);
        hyp_box[id] = &box;
    }

    // carry over still-valid correspondences first
    for (const auto& [g, h] : last_match) {
        if (!gt_free.count(g) || !hyp_free.count(h))
            continue;
        const double o = iou(*gt_box[g], *hyp_box[h]);
        if (o >= iou_threshold) {
            out.matches.push_back({g, h});
            out.match_iou.push_back(o);
            gt_free.erase(g);
            hyp_free.erase(h);
        }
    }

    // greedy descending-IoU assignment of the remainder
    struct Cand {
        double overlap;
        int g;
        int h;
    };
    std::vector<Cand> cands;
    for (int g : gt_free)
        for (int h : hyp_free) {
            const double o = iou(*gt_box[g], *hyp_box[h]);
            if (o >= iou_threshold)
                cands.push_back({o, g, h});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.overlap != b.overlap)
            return a.overlap > b.overlap;
        return std::tie(a.g, a.h) < std::tie(b.g, b.h);
    });
    for (const auto& c : cands) {
        if (!gt_free.count(c.g) || !hyp_free.count(c.h))
            continue;
        auto prev = last_match.find(c.g);
        if (prev != last_match.end() && prev->second != c.h)
            out.id_switches += 1;
        out.matches.push_back({c.g, c.h});
        out.match_iou.push_back(c.overlap);
        gt_free.erase(c.g);
        hyp_free.erase(c.h);
    }

    for (const auto& [g, h] : out.matches)
        last_match[g] = h;
    out.fn = static_cast<int>(gt_free.size());
    out.fp = static_cast<int>(hyp_free.size());
    return out;
}

EvalReport evaluate_sequence(const std::vector<GtEntry>& gt,
                             const std::vector<Trajectory>& hyps,
                             double iou_threshold) {
    if (gt.empty())
        throw std::invalid_argument("evaluate_sequence: empty ground truth");

    std::map<int, std::vector<std::pair<int, BoundingBox>>> gt_frames, hyp_frames;
    for (const auto& e : gt)
        gt_frames[e.det.frame].push_back({e.track_id, e.det.box});
    for (const auto& t : hyps)
        for (const auto& d : t.detections)
            hyp_frames[d.frame].push_back({t.id, d.box});

    std::map<int, int> gt_total, gt_matched;
    for (const auto& e : gt)
        gt_total[e.track_id] += 1;

    EvalReport r;
    std::map<int, int> last_match;
    double iou_sum = 0.0;

    std::set<int> frames;
    for (const auto& [f, v] : gt_frames)
        frames.insert(f);
    for (const auto& [f, v] : hyp_frames)
        frames.insert(f);

    static const std::vector<std::pair<int, BoundingBox>> kEmpty;
    for (int f : frames) {
        auto git = gt_frames.find(f);
        auto hit = hyp_frames.find(f);
        const auto& gts = git != gt_frames.end() ? git->second : kEmpty;
        const auto& hs = hit != hyp_frames.end() ? hit->second : kEmpty;
        FrameMatchResult m = match_frame(last_match, gts, hs, iou_threshold);
        r.fp += m.fp;
        r.fn += m.fn;
        r.id_switches += m.id_switches;
        r.matches += static_cast<int>(m.matches.size());
        for (double o : m.match_iou)
            iou_sum += o;
        for (const auto& [g, h] : m.matches)
            gt_matched[g] += 1;
    }

    r.gt_count = static_cast<int>(gt.size());
    r.gt_tracks = static_cast<int>(gt_total.size());
    r.mota = 1.0 - static_cast<double>(r.fn + r.fp + r.id_switches) / r.gt_count;
    r.motp = r.matches > 0 ? iou_sum / r.matches : 0.0;
    for (const auto& [id, total] : gt_total) {
        const double coverage = static_cast<double>(gt_matched[id]) / total;
        if (coverage > 0.8)
            r.mt += 1;
        else if (coverage < 0.2)
            r.ml += 1;
    }
    r.mt_fraction = static_cast<double>(r.mt) / r.gt_tracks;
    r.ml_fraction = static_cast<double>(r.ml) / r.gt_tracks;
    return r;
}

}  // namespace flowtrack::clearmot
