#pragma once

#include <compare>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowtrack/core.hpp"
#include "flowtrack/gbm.hpp"

namespace flowtrack::io {

class ParseError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class MotKind { detections, ground_truth, results };

struct MotParseResult {
    std::vector<Detection> detections;  // kind == detections
    std::vector<GtEntry> entries;       // ground_truth / results, grouped by id
    int rejected = 0;                   // records dropped for non-positive size
    int frame_count = 0;                // highest frame seen
};

// CSV lines `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z`.
// Detections sorted by (frame, file order); source_index follows file order
// per frame. LF and CRLF accepted.
MotParseResult parse_mot_file(std::istream& in, MotKind kind);

// One line per (trajectory, detection), sorted by frame then id; conf is the
// detection's original score. parse(write(T)) reproduces geometry exactly.
void write_results(const std::vector<Trajectory>& tracks, std::ostream& out);

// Regroups result/gt entries into trajectories ordered by id.
std::vector<Trajectory> group_tracks(const std::vector<GtEntry>& entries);

struct ScoreRecord {
    int frame_a = 0;
    int index_a = 0;
    int frame_b = 0;
    int index_b = 0;
    std::vector<double> values;
};

// CSV `frame_a,index_a,frame_b,index_b,v1[,v2,...]`; constant arity enforced.
std::vector<ScoreRecord> parse_score_file(std::istream& in);

struct PairKey {
    int frame_a = 0;
    int index_a = 0;
    int frame_b = 0;
    int index_b = 0;
    auto operator<=>(const PairKey&) const = default;
};

// Binds records to detections of a sequence; throws on dangling references.
std::map<PairKey, std::vector<double>> bind_scores(const std::vector<ScoreRecord>& records,
                                                   const Sequence& seq);

// `gbm-v1` plain-text model format; reals rendered round-trip exact.
void write_model(const gbm::GbmModel& model, std::ostream& out);
gbm::GbmModel read_model(std::istream& in);

// Shortest decimal rendering that parses back to the same double.
std::string format_real(double v);
double parse_real(const std::string& s, int line_no);

}  // namespace flowtrack::io
