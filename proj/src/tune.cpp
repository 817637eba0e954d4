#include "flowtrack/tune.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>

namespace flowtrack::tune {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

std::vector<GridAxis> parse_grid(const std::string& spec) {
    std::vector<GridAxis> axes;
    for (const std::string& part : split(spec, ',')) {
        if (part.empty())
            continue;
        const size_t eq = part.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("grid: expected key=start:stop:step in '" + part + "'");
        GridAxis axis;
        axis.key = part.substr(0, eq);
        if (axis.key != "vdet" && axis.key != "vlink" && axis.key != "cinout")
            throw std::invalid_argument("grid: unknown key '" + axis.key + "'");
        const auto range = split(part.substr(eq + 1), ':');
        try {
            if (range.size() == 1) {
                axis.values.push_back(std::stod(range[0]));
            } else if (range.size() == 3) {
                const double start = std::stod(range[0]);
                const double stop = std::stod(range[1]);
                const double step = std::stod(range[2]);
                if (!(step > 0.0))
                    throw std::invalid_argument("grid: step must be > 0");
                for (double v = start; v <= stop + 1e-9; v += step)
                    axis.values.push_back(v);
            } else {
                throw std::invalid_argument("grid: bad range in '" + part + "'");
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (...) {
            throw std::invalid_argument("grid: bad number in '" + part + "'");
        }
        if (axis.values.empty())
            throw std::invalid_argument("grid: empty axis '" + axis.key + "'");
        axes.push_back(std::move(axis));
    }
    if (axes.empty())
        throw std::invalid_argument("grid: empty grid");
    return axes;
}

TuneResult sweep(const std::vector<Sequence>& seqs, const flow::PairScorer& scorer,
                 const flow::CostConfig& base, const std::vector<GridAxis>& grid,
                 bool parallel) {
    if (seqs.empty())
        throw std::invalid_argument("sweep: no sequences");
    for (const auto& s : seqs)
        if (!s.has_ground_truth())
            throw std::invalid_argument("sweep: sequence '" + s.name + "' has no ground truth");

    // cartesian product, first axis slowest
    std::vector<flow::CostConfig> points{base};
    for (const auto& axis : grid) {
        std::vector<flow::CostConfig> next;
        for (const auto& cfg : points)
            for (double v : axis.values) {
                flow::CostConfig c = cfg;
                if (axis.key == "vdet")
                    c.v_det = v;
                else if (axis.key == "vlink")
                    c.v_link = v;
                else
                    c.c_in_out = v;
                next.push_back(c);
            }
        points = std::move(next);
    }
    for (const auto& p : points)
        p.validate();

    TuneResult result;
    result.table.resize(points.size());
    const int np = static_cast<int>(points.size());

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (int p = 0; p < np; ++p) {
        TunePoint pt;
        pt.cfg = points[p];
        double mota_sum = 0.0;
        for (const auto& seq : seqs) {
            // sequences of one grid point run serially; points already span
            // the workers
            flow::FlowSolution sol = flow::track_sequence(seq, scorer, pt.cfg, false);
            clearmot::EvalReport rep = clearmot::evaluate_sequence(seq.ground_truth,
                                                                   sol.trajectories);
            mota_sum += rep.mota;
            pt.id_switches += rep.id_switches;
            pt.fp += rep.fp;
            pt.trajectories += static_cast<int>(sol.trajectories.size());
        }
        pt.mean_mota = mota_sum / static_cast<double>(seqs.size());
        result.table[p] = pt;
    }

    for (int p = 0; p < np; ++p) {
        if (result.best_index < 0) {
            result.best_index = p;
            continue;
        }
        const TunePoint& best = result.table[result.best_index];
        const TunePoint& cand = result.table[p];
        if (std::tuple(-cand.mean_mota, cand.id_switches, cand.fp) <
            std::tuple(-best.mean_mota, best.id_switches, best.fp))
            result.best_index = p;
    }
    return result;
}

}  // namespace flowtrack::tune
