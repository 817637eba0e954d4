#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flowtrack {

struct BoundingBox {
    double left = 0.0;
    double top = 0.0;
    double width = 0.0;
    double height = 0.0;

    BoundingBox() = default;
    BoundingBox(double l, double t, double w, double h)
        : left(l), top(t), width(w), height(h) {
        if (!(w > 0.0) || !(h > 0.0))
            throw std::invalid_argument("bounding box requires positive width and height");
    }

    double right() const { return left + width; }
    double bottom() const { return top + height; }
    double area() const { return width * height; }
};

inline std::pair<double, double> center(const BoundingBox& b) {
    return {b.left + b.width / 2.0, b.top + b.height / 2.0};
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    const double iw = std::min(a.right(), b.right()) - std::max(a.left, b.left);
    const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top);
    if (iw <= 0.0 || ih <= 0.0)
        return 0.0;
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

struct Detection {
    int frame = 1;       // 1-based time stamp
    BoundingBox box;
    double score = 0.0;  // raw detector confidence, unbounded scale
    int source_index = 0;  // 0-based position within its frame in the input file
};

struct Trajectory {
    int id = 0;
    std::vector<Detection> detections;  // frames strictly increasing
};

struct GtEntry {
    int track_id = 0;
    Detection det;
};

struct Sequence {
    std::string name;
    int frame_count = 0;
    std::vector<Detection> detections;
    std::vector<GtEntry> ground_truth;

    bool has_ground_truth() const { return !ground_truth.empty(); }
};

}  // namespace flowtrack
