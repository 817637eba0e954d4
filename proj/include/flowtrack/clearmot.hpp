#pragma once

#include <map>
#include <vector>

#include "flowtrack/core.hpp"

namespace flowtrack::clearmot {

struct EvalReport {
    double mota = 0.0;  // 1 - (FN + FP + IDSW)/GT, can be negative
    double motp = 0.0;  // mean IoU over matched pairs, in [0,1]
    int mt = 0;
    int ml = 0;
    double mt_fraction = 0.0;
    double ml_fraction = 0.0;
    int id_switches = 0;
    int fp = 0;
    int fn = 0;
    int gt_count = 0;
    int gt_tracks = 0;
    int matches = 0;
};

struct FrameMatchResult {
    std::vector<std::pair<int, int>> matches;  // (gt id, hyp id)
    std::vector<double> match_iou;
    int fp = 0;
    int fn = 0;
    int id_switches = 0;
};

// One frame of the CLEAR correspondence. last_match carries each gt id's
// current hypothesis across frames: surviving pairs (both present, IoU >=
// threshold) are kept before greedy descending-IoU assignment of the rest; a
// gt re-matched to a different hyp than its last one counts an ID switch.
// Updates last_match in place.
FrameMatchResult match_frame(std::map<int, int>& last_match,
                             const std::vector<std::pair<int, BoundingBox>>& gt,
                             const std::vector<std::pair<int, BoundingBox>>& hyp,
                             double iou_threshold = 0.5);

// MT: gt tracks with > 80% of their frames matched; ML: < 20%.
EvalReport evaluate_sequence(const std::vector<GtEntry>& gt,
                             const std::vector<Trajectory>& hyps,
                             double iou_threshold = 0.5);

}  // namespace flowtrack::clearmot
