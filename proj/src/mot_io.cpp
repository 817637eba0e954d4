#include "flowtrack/mot_io.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace flowtrack::io {

namespace {

std::vector<std::string> split_csv(std::string line) {
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

int parse_int(const std::string& s, int line_no) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + s + "'");
    return v;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::string format_real(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

double parse_real(const std::string& s, int line_no) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad real '" + s + "'");
    return v;
}

MotParseResult parse_mot_file(std::istream& in, MotKind kind) {
    MotParseResult out;
    struct Raw {
        int frame;
        int id;
        Detection det;
    };
    std::vector<Raw> rows;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line))
            continue;
        auto fields = split_csv(line);
        if (fields.size() < 7)
            throw ParseError("line " + std::to_string(line_no) + ": expected at least 7 fields");
        const int frame = parse_int(fields[0], line_no);
        const int id = parse_int(fields[1], line_no);
        const double left = parse_real(fields[2], line_no);
        const double top = parse_real(fields[3], line_no);
        const double w = parse_real(fields[4], line_no);
        const double h = parse_real(fields[5], line_no);
        const double conf = parse_real(fields[6], line_no);
        if (frame < 1)
            throw ParseError("line " + std::to_string(line_no) + ": frame must be >= 1");
        if (!(w > 0.0) || !(h > 0.0)) {
            ++out.rejected;
            continue;
        }
        Raw r;
        r.frame = frame;
        r.id = id;
        r.det.frame = frame;
        r.det.box = BoundingBox(left, top, w, h);
        r.det.score = conf;
        rows.push_back(std::move(r));
    }

    std::stable_sort(rows.begin(), rows.end(),
                     [](const Raw& a, const Raw& b) { return a.frame < b.frame; });

    int prev_frame = -1;
    int within = 0;
    for (auto& r : rows) {
        within = (r.frame == prev_frame) ? within + 1 : 0;
        prev_frame = r.frame;
        r.det.source_index = within;
        out.frame_count = std::max(out.frame_count, r.frame);
        if (kind == MotKind::detections) {
            out.detections.push_back(r.det);
        } else {
            out.entries.push_back({r.id, r.det});
        }
    }
    if (kind != MotKind::detections) {
        std::stable_sort(out.entries.begin(), out.entries.end(),
                         [](const GtEntry& a, const GtEntry& b) {
                             if (a.track_id != b.track_id)
                                 return a.track_id < b.track_id;
                             return a.det.frame < b.det.frame;
                         });
    }
    return out;
}

void write_results(const std::vector<Trajectory>& tracks, std::ostream& out) {
    struct Line {
        int frame;
        int id;
        const Detection* det;
    };
    std::vector<Line> lines;
    for (const auto& t : tracks)
        for (const auto& d : t.detections)
            lines.push_back({d.frame, t.id, &d});
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
        if (a.frame != b.frame)
            return a.frame < b.frame;
        return a.id < b.id;
    });
    for (const auto& l : lines) {
        out << l.frame << ',' << l.id << ',' << format_real(l.det->box.left) << ','
            << format_real(l.det->box.top) << ',' << format_real(l.det->box.width) << ','
            << format_real(l.det->box.height) << ',' << format_real(l.det->score)
            << ",-1,-1,-1\n";
    }
}

std::vector<Trajectory> group_tracks(const std::vector<GtEntry>& entries) {
    std::map<int, Trajectory> by_id;
    for (const auto& e : entries) {
        auto& t = by_id[e.track_id];
        t.id = e.track_id;
        t.detections.push_back(e.det);
    }
    std::vector<Trajectory> out;
    for (auto& [id, t] : by_id) {
        std::stable_sort(t.detections.begin(), t.detections.end(),
                         [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<ScoreRecord> parse_score_file(std::istream& in) {
    std::vector<ScoreRecord> out;
    std::string line;
    int line_no = 0;
    size_t arity = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line))
            continue;
        auto fields = split_csv(line);
        if (fields.size() < 5)
            throw ParseError("line " + std::to_string(line_no) + ": expected at least 5 fields");
        ScoreRecord r;
        r.frame_a = parse_int(fields[0], line_no);
        r.index_a = parse_int(fields[1], line_no);
        r.frame_b = parse_int(fields[2], line_no);
        r.index_b = parse_int(fields[3], line_no);
        if (r.frame_a >= r.frame_b)
            throw ParseError("line " + std::to_string(line_no) + ": requires frame_a < frame_b");
        for (size_t i = 4; i < fields.size(); ++i)
            r.values.push_back(parse_real(fields[i], line_no));
        if (arity == 0)
            arity = r.values.size();
        else if (r.values.size() != arity)
            throw ParseError("line " + std::to_string(line_no) + ": value count " +
                             std::to_string(r.values.size()) + " differs from " +
                             std::to_string(arity));
        out.push_back(std::move(r));
    }
    return out;
}

std::map<PairKey, std::vector<double>> bind_scores(const std::vector<ScoreRecord>& records,
                                                   const Sequence& seq) {
    std::map<std::pair<int, int>, bool> known;
    for (const auto& d : seq.detections)
        known[{d.frame, d.source_index}] = true;

    std::map<PairKey, std::vector<double>> out;
    for (const auto& r : records) {
        if (!known.count({r.frame_a, r.index_a}) || !known.count({r.frame_b, r.index_b}))
            throw ParseError("score record (" + std::to_string(r.frame_a) + "," +
                             std::to_string(r.index_a) + ")-(" + std::to_string(r.frame_b) +
                             "," + std::to_string(r.index_b) +
                             ") references a missing detection");
        PairKey key{r.frame_a, r.index_a, r.frame_b, r.index_b};
        if (!out.emplace(key, r.values).second)
            throw ParseError("duplicate score record for (" + std::to_string(r.frame_a) + "," +
                             std::to_string(r.index_a) + ")-(" + std::to_string(r.frame_b) +
                             "," + std::to_string(r.index_b) + ")");
    }
    return out;
}

void write_model(const gbm::GbmModel& model, std::ostream& out) {
    out << "gbm-v1\n";
    out << "feature_count " << model.feature_count << '\n';
    out << "learning_rate " << format_real(model.learning_rate) << '\n';
    out << "base_score " << format_real(model.base_score) << '\n';
    out << "degenerate " << (model.degenerate ? 1 : 0) << '\n';
    out << "trees " << model.trees.size() << '\n';
    for (const auto& t : model.trees) {
        out << "tree " << t.nodes.size() << '\n';
        for (size_t i = 0; i < t.nodes.size(); ++i) {
            const auto& n = t.nodes[i];
            if (n.is_leaf())
                out << i << " leaf " << format_real(n.value) << '\n';
            else
                out << i << " split " << n.feature << ' ' << format_real(n.threshold) << ' '
                    << n.left << ' ' << n.right << '\n';
        }
    }
}

gbm::GbmModel read_model(std::istream& in) {
    std::string line;
    int line_no = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line))
            throw ParseError("model file truncated at line " + std::to_string(line_no + 1));
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        return line;
    };
    auto header_field = [&](const std::string& key) {
        next_line();
        if (line.rfind(key + ' ', 0) != 0)
            throw ParseError("line " + std::to_string(line_no) + ": expected '" + key + "'");
        return line.substr(key.size() + 1);
    };

    if (next_line() != "gbm-v1")
        throw ParseError("unsupported model format (expected gbm-v1 header)");

    gbm::GbmModel model;
    model.feature_count = parse_int(header_field("feature_count"), line_no);
    model.learning_rate = parse_real(header_field("learning_rate"), line_no);
    model.base_score = parse_real(header_field("base_score"), line_no);
    model.degenerate = parse_int(header_field("degenerate"), line_no) != 0;
    const int n_trees = parse_int(header_field("trees"), line_no);
    if (n_trees < 0)
        throw ParseError("negative tree count");

    for (int t = 0; t < n_trees; ++t) {
        std::istringstream hdr(next_line());
        std::string tag;
        int n_nodes = 0;
        if (!(hdr >> tag >> n_nodes) || tag != "tree" || n_nodes <= 0)
            throw ParseError("line " + std::to_string(line_no) + ": expected 'tree <count>'");
        gbm::RegressionTree tree;
        tree.nodes.resize(n_nodes);
        for (int i = 0; i < n_nodes; ++i) {
            std::istringstream row(next_line());
            int id;
            std::string kind;
            if (!(row >> id >> kind) || id != i)
                throw ParseError("line " + std::to_string(line_no) + ": bad tree node row");
            if (kind == "leaf") {
                std::string v;
                if (!(row >> v))
                    throw ParseError("line " + std::to_string(line_no) + ": bad leaf row");
                tree.nodes[i].value = parse_real(v, line_no);
            } else if (kind == "split") {
                std::string thr;
                auto& n = tree.nodes[i];
                if (!(row >> n.feature >> thr >> n.left >> n.right))
                    throw ParseError("line " + std::to_string(line_no) + ": bad split row");
                n.threshold = parse_real(thr, line_no);
                if (n.feature < 0 || n.feature >= model.feature_count || n.left < 0 ||
                    n.left >= n_nodes || n.right < 0 || n.right >= n_nodes)
                    throw ParseError("line " + std::to_string(line_no) +
                                     ": split indices out of range");
            } else {
                throw ParseError("line " + std::to_string(line_no) + ": unknown node kind '" +
                                 kind + "'");
            }
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

}  // namespace flowtrack::io
