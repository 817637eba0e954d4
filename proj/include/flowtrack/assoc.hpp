#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "flowtrack/core.hpp"

namespace flowtrack::assoc {

// Pairwise context for detections a -> b (earlier -> later), computed on box
// centers and dimensions: (s_a - s_b)/(s_a + s_b), (x_a - x_b), and the
// position change divided by the frame gap.
struct ContextualFeatures {
    std::array<double, 2> rel_size_change{};
    std::array<double, 2> position_change{};
    std::array<double, 2> rel_velocity{};
};

ContextualFeatures contextual_features(const Detection& a, const Detection& b);

enum class PairLabel { no_match = 0, match = 1 };

struct PairSample {
    Detection a;
    Detection b;  // frame(a) < frame(b)
    ContextualFeatures context;
    std::optional<std::vector<double>> external;
    PairLabel label = PairLabel::no_match;
};

struct PairGenConfig {
    int rewind_window = 15;      // maximum frame gap N
    double gt_match_iou = 0.5;   // detection-to-gt assignment threshold
    // per-class negative subsampling, as a multiple of the positive count:
    // [different-identity pair, true-vs-false-positive pair, two false positives]
    std::array<double, 3> negative_ratio{1.0, 1.0, 1.0};
    std::uint64_t seed = 0;
};

// Labeled training pairs from a sequence with ground truth. Positives are all
// same-identity detection pairs within the rewind window; negatives are drawn
// from the three classes above. Deterministic given (seq, cfg); the seed only
// affects the negative subsample.
std::vector<PairSample> generate_pairs(const Sequence& seq, const PairGenConfig& cfg);

// [external if present] ++ [rel_size_change, position_change, rel_velocity]
std::vector<double> assemble_feature_vector(const PairSample& p);

// Greedy one-to-one detection-to-gt assignment per frame by descending IoU.
// Returns, per detection (aligned with seq.detections), the matched gt track
// id or -1 for a false positive.
std::vector<int> label_detections(const Sequence& seq, double iou_threshold);

}  // namespace flowtrack::assoc
