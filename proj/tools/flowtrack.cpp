#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "flowtrack/assoc.hpp"
#include "flowtrack/clearmot.hpp"
#include "flowtrack/flow.hpp"
#include "flowtrack/gbm.hpp"
#include "flowtrack/mot_io.hpp"
#include "flowtrack/parallel.hpp"
#include "flowtrack/tune.hpp"

namespace fs = std::filesystem;
using namespace flowtrack;

namespace {

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return in;
}

Sequence load_sequence(const std::string& det_path, const std::string& gt_path) {
    Sequence seq;
    seq.name = fs::path(det_path).stem().string();
    {
        auto in = open_input(det_path);
        auto parsed = io::parse_mot_file(in, io::MotKind::detections);
        if (parsed.rejected > 0)
            std::cerr << "warning: " << parsed.rejected << " detection record(s) rejected in "
                      << det_path << "\n";
        seq.detections = std::move(parsed.detections);
        seq.frame_count = parsed.frame_count;
    }
    if (!gt_path.empty()) {
        auto in = open_input(gt_path);
        auto parsed = io::parse_mot_file(in, io::MotKind::ground_truth);
        if (parsed.rejected > 0)
            std::cerr << "warning: " << parsed.rejected << " gt record(s) rejected in "
                      << gt_path << "\n";
        seq.ground_truth = std::move(parsed.entries);
        seq.frame_count = std::max(seq.frame_count, parsed.frame_count);
    }
    return seq;
}

std::map<io::PairKey, std::vector<double>> load_scores(const std::string& path,
                                                       const Sequence& seq) {
    auto in = open_input(path);
    return io::bind_scores(io::parse_score_file(in), seq);
}

gbm::GbmModel load_model(const std::string& path) {
    auto in = open_input(path);
    return io::read_model(in);
}

// Pair rows: label, dframe, 6 contextual features, optional external values.
struct PairFile {
    gbm::Dataset data;  // feature layout: external ++ contextual
    int ext_dim = 0;
};

PairFile read_pair_file(const std::string& path) {
    PairFile out;
    auto in = open_input(path);
    std::string line;
    int line_no = 0;
    int arity = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<double> cols;
        while (std::getline(ss, field, ','))
            cols.push_back(io::parse_real(field, line_no));
        if (cols.size() < 8)
            throw io::ParseError(path + " line " + std::to_string(line_no) +
                                 ": expected at least 8 columns");
        if (arity < 0)
            arity = static_cast<int>(cols.size());
        else if (static_cast<int>(cols.size()) != arity)
            throw io::ParseError(path + " line " + std::to_string(line_no) +
                                 ": inconsistent column count");
        const int label = static_cast<int>(cols[0]);
        if (label != 0 && label != 1)
            throw io::ParseError(path + " line " + std::to_string(line_no) + ": label must be 0/1");
        std::vector<double> feat(cols.begin() + 8, cols.end());  // external first
        feat.insert(feat.end(), cols.begin() + 2, cols.begin() + 8);
        out.data.features.push_back(std::move(feat));
        out.data.labels.push_back(label);
    }
    out.ext_dim = arity < 0 ? 0 : arity - 8;
    return out;
}

io::PairKey pair_key(const Detection& a, const Detection& b) {
    return {a.frame, a.source_index, b.frame, b.source_index};
}

flow::PairScorer make_gbm_scorer(const gbm::GbmModel& model,
                                 const std::map<io::PairKey, std::vector<double>>* external) {
    return [&model, external](const Detection& a,
                              const Detection& b) -> std::optional<double> {
        assoc::PairSample s;
        s.a = a;
        s.b = b;
        s.context = assoc::contextual_features(a, b);
        if (external) {
            auto it = external->find(pair_key(a, b));
            if (it == external->end())
                return std::nullopt;  // no candidate without an external record
            s.external = it->second;
        }
        return model.predict(assoc::assemble_feature_vector(s));
    };
}

flow::PairScorer make_external_scorer(const std::map<io::PairKey, std::vector<double>>& scores) {
    return [&scores](const Detection& a, const Detection& b) -> std::optional<double> {
        auto it = scores.find(pair_key(a, b));
        if (it == scores.end())
            return std::nullopt;
        return it->second.front();
    };
}

void print_report(const clearmot::EvalReport& r) {
    std::cout << std::left;
    std::cout << std::setw(14) << "MOTA" << io::format_real(r.mota) << "\n";
    std::cout << std::setw(14) << "MOTP" << io::format_real(r.motp) << "\n";
    std::cout << std::setw(14) << "MT" << r.mt << " (" << io::format_real(r.mt_fraction * 100.0)
              << "%)\n";
    std::cout << std::setw(14) << "ML" << r.ml << " (" << io::format_real(r.ml_fraction * 100.0)
              << "%)\n";
    std::cout << std::setw(14) << "ID switches" << r.id_switches << "\n";
    std::cout << std::setw(14) << "FP" << r.fp << "\n";
    std::cout << std::setw(14) << "FN" << r.fn << "\n";
    std::cout << std::setw(14) << "GT boxes" << r.gt_count << "\n";
    std::cout << "\n";
    std::cout << "metric,value\n";
    std::cout << "mota," << io::format_real(r.mota) << "\n";
    std::cout << "motp," << io::format_real(r.motp) << "\n";
    std::cout << "mt," << r.mt << "\n";
    std::cout << "ml," << r.ml << "\n";
    std::cout << "mt_fraction," << io::format_real(r.mt_fraction) << "\n";
    std::cout << "ml_fraction," << io::format_real(r.ml_fraction) << "\n";
    std::cout << "id_switches," << r.id_switches << "\n";
    std::cout << "fp," << r.fp << "\n";
    std::cout << "fn," << r.fn << "\n";
    std::cout << "gt_count," << r.gt_count << "\n";
}

struct CommonCostFlags {
    double v_det = 0.5;
    double v_link = 0.35;
    double c_in_out = 0.5;
    int max_gap = 15;

    void attach(CLI::App* cmd) {
        const auto open_unit =
            CLI::Range(std::nextafter(0.0, 1.0), std::nextafter(1.0, 0.0)).description("(0,1)");
        cmd->add_option("--vdet", v_det, "Detection cost threshold")->check(open_unit);
        cmd->add_option("--vlink", v_link, "Link cost threshold")->check(open_unit);
        cmd->add_option("--cinout", c_in_out, "Entry/exit cost")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--maxgap", max_gap, "Maximum link frame gap")
            ->check(CLI::PositiveNumber);
    }

    flow::CostConfig config() const { return {v_det, v_link, c_in_out, max_gap}; }
};

int run(int argc, char** argv) {
    CLI::App app{"Linear-programming multi-person tracker over MOTChallenge data"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value configuration file (flags override)");

    // pairs
    auto* pairs_cmd = app.add_subcommand("pairs", "Generate labeled training pairs");
    std::string det_path, gt_path, scores_path, out_path;
    assoc::PairGenConfig pair_cfg;
    double neg_ratio = 1.0;
    pairs_cmd->add_option("--det", det_path, "Detection file")->required();
    pairs_cmd->add_option("--gt", gt_path, "Ground truth file")->required();
    pairs_cmd->add_option("--scores", scores_path, "External score file");
    pairs_cmd->add_option("--out", out_path, "Output pair CSV")->required();
    pairs_cmd->add_option("--rewind", pair_cfg.rewind_window, "Maximum frame gap N")
        ->check(CLI::PositiveNumber);
    pairs_cmd->add_option("--match-iou", pair_cfg.gt_match_iou, "GT assignment IoU threshold");
    pairs_cmd->add_option("--neg-ratio", neg_ratio, "Negatives per class as multiple of positives")
        ->check(CLI::NonNegativeNumber);
    pairs_cmd->add_option("--seed", pair_cfg.seed, "Negative subsample seed");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train the pairwise GBM classifier");
    std::vector<std::string> pair_paths;
    std::string model_out;
    gbm::GbmConfig gbm_cfg;
    bool stacked = false;
    train_cmd->add_option("--pairs", pair_paths, "Pair CSV files")->required();
    train_cmd->add_option("--out", model_out, "Output model file")->required();
    train_cmd->add_option("--trees", gbm_cfg.n_trees, "Number of boosting stages")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--depth", gbm_cfg.max_depth, "Maximum tree depth")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", gbm_cfg.learning_rate, "Shrinkage")->check(CLI::PositiveNumber);
    train_cmd->add_option("--min-leaf", gbm_cfg.min_samples_leaf, "Minimum samples per leaf")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--subsample", gbm_cfg.subsample, "Per-stage sample fraction")
        ->check(CLI::Range(std::nextafter(0.0, 1.0), 1.0));
    train_cmd->add_option("--seed", gbm_cfg.seed, "Subsample seed");
    train_cmd->add_flag("--stacked", stacked, "Leave-one-file-out AUC diagnostics");

    // track
    auto* track_cmd = app.add_subcommand("track", "Track a sequence");
    std::string track_det, track_model, track_scores, track_out, baseline;
    CommonCostFlags track_costs;
    double lp2d_tau = 100.0;
    track_cmd->add_option("--det", track_det, "Detection file")->required();
    track_cmd->add_option("--model", track_model, "GBM model file");
    track_cmd->add_option("--scores", track_scores, "External score file");
    track_cmd->add_option("--baseline", baseline, "Baseline scorer (lp2d)")
        ->check(CLI::IsMember({"lp2d"}));
    track_cmd->add_option("--out", track_out, "Output MOT results file")->required();
    track_cmd->add_option("--lp2d-tau", lp2d_tau, "LP2D distance scale (pixels)")
        ->check(CLI::PositiveNumber);
    track_costs.attach(track_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "CLEAR MOT evaluation");
    std::string eval_gt, eval_res;
    double eval_iou = 0.5;
    eval_cmd->add_option("--gt", eval_gt, "Ground truth file")->required();
    eval_cmd->add_option("--res", eval_res, "Results file")->required();
    eval_cmd->add_option("--iou", eval_iou, "Matching IoU threshold");

    // tune
    auto* tune_cmd = app.add_subcommand("tune", "Parameter sweep over training sequences");
    std::string train_dir, tune_model, tune_baseline, grid_spec;
    CommonCostFlags tune_costs;
    double tune_tau = 100.0;
    tune_cmd->add_option("--train-dir", train_dir,
                         "Directory of sequences (<seq>/det/det.txt, <seq>/gt/gt.txt)")
        ->required();
    tune_cmd->add_option("--model", tune_model, "GBM model file");
    tune_cmd->add_option("--baseline", tune_baseline, "Baseline scorer (lp2d)")
        ->check(CLI::IsMember({"lp2d"}));
    tune_cmd->add_option("--grid", grid_spec, "e.g. vdet=0.3:0.7:0.1,cinout=0.2:2:0.2")
        ->required();
    tune_cmd->add_option("--lp2d-tau", tune_tau, "LP2D distance scale (pixels)")
        ->check(CLI::PositiveNumber);
    tune_costs.attach(tune_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        app.exit(e);
        return 2;
    }

    apply_thread_cap();

    if (pairs_cmd->parsed()) {
        pair_cfg.negative_ratio = {neg_ratio, neg_ratio, neg_ratio};
        Sequence seq = load_sequence(det_path, gt_path);
        std::map<io::PairKey, std::vector<double>> external;
        const bool with_scores = !scores_path.empty();
        if (with_scores)
            external = load_scores(scores_path, seq);

        auto samples = assoc::generate_pairs(seq, pair_cfg);
        int dropped = 0;
        std::ofstream out(out_path);
        if (!out)
            throw std::runtime_error("cannot write " + out_path);
        for (auto& s : samples) {
            if (with_scores) {
                auto it = external.find(pair_key(s.a, s.b));
                if (it == external.end()) {
                    ++dropped;
                    continue;
                }
                s.external = it->second;
            }
            out << static_cast<int>(s.label) << ',' << (s.b.frame - s.a.frame);
            out << ',' << io::format_real(s.context.rel_size_change[0]) << ','
                << io::format_real(s.context.rel_size_change[1]) << ','
                << io::format_real(s.context.position_change[0]) << ','
                << io::format_real(s.context.position_change[1]) << ','
                << io::format_real(s.context.rel_velocity[0]) << ','
                << io::format_real(s.context.rel_velocity[1]);
            if (s.external)
                for (double v : *s.external)
                    out << ',' << io::format_real(v);
            out << '\n';
        }
        if (dropped > 0)
            std::cerr << "warning: " << dropped << " pair(s) without a score record dropped\n";
        std::cout << "wrote " << samples.size() - dropped << " pairs to " << out_path << "\n";
        return 0;
    }

    if (train_cmd->parsed()) {
        gbm::Dataset all;
        std::vector<int> groups;
        int ext_dim = -1;
        for (size_t f = 0; f < pair_paths.size(); ++f) {
            PairFile pf = read_pair_file(pair_paths[f]);
            if (ext_dim < 0)
                ext_dim = pf.ext_dim;
            else if (pf.ext_dim != ext_dim)
                throw std::runtime_error("pair files disagree on external feature count");
            for (size_t i = 0; i < pf.data.features.size(); ++i) {
                all.features.push_back(std::move(pf.data.features[i]));
                all.labels.push_back(pf.data.labels[i]);
                groups.push_back(static_cast<int>(f));
            }
        }
        if (all.features.empty())
            throw std::runtime_error("no training pairs found");

        gbm::GbmModel model = gbm::train(all, gbm_cfg);
        if (model.degenerate)
            std::cerr << "warning: single-class training data, constant model written\n";

        std::vector<double> train_scores(all.features.size());
        for (size_t i = 0; i < all.features.size(); ++i)
            train_scores[i] = model.predict(all.features[i]);
        try {
            std::cout << "training AUC: " << io::format_real(gbm::evaluate_auc(all.labels,
                                                                               train_scores))
                      << "\n";
        } catch (const std::invalid_argument&) {
            std::cout << "training AUC: n/a (single class)\n";
        }

        if (stacked) {
            if (pair_paths.size() < 2)
                throw std::runtime_error("--stacked requires at least two pair files");
            auto oof = gbm::cross_val_predict(all, groups, gbm_cfg);
            std::cout << "fold,auc\n";
            for (size_t f = 0; f < pair_paths.size(); ++f) {
                std::vector<int> labels;
                std::vector<double> scores;
                for (size_t i = 0; i < groups.size(); ++i)
                    if (groups[i] == static_cast<int>(f)) {
                        labels.push_back(all.labels[i]);
                        scores.push_back(oof[i]);
                    }
                std::cout << pair_paths[f] << ',';
                try {
                    std::cout << io::format_real(gbm::evaluate_auc(labels, scores));
                } catch (const std::invalid_argument&) {
                    std::cout << "n/a";
                }
                std::cout << "\n";
            }
            try {
                std::cout << "out-of-fold AUC: "
                          << io::format_real(gbm::evaluate_auc(all.labels, oof)) << "\n";
            } catch (const std::invalid_argument&) {
            }
        }

        std::ofstream out(model_out);
        if (!out)
            throw std::runtime_error("cannot write " + model_out);
        io::write_model(model, out);
        std::cout << "wrote model (" << model.trees.size() << " trees, "
                  << model.feature_count << " features) to " << model_out << "\n";
        return 0;
    }

    if (track_cmd->parsed()) {
        const int scorer_kinds = (!track_model.empty() ? 1 : 0) +
                                 (!baseline.empty() ? 1 : 0) +
                                 (track_model.empty() && !track_scores.empty() ? 1 : 0);
        if (scorer_kinds != 1)
            throw CLI::ValidationError(
                "track", "exactly one of --model, --scores, --baseline must select the scorer");

        Sequence seq = load_sequence(track_det, "");
        std::map<io::PairKey, std::vector<double>> external;
        gbm::GbmModel model;
        flow::PairScorer scorer;
        if (!track_model.empty()) {
            model = load_model(track_model);
            if (!track_scores.empty()) {
                external = load_scores(track_scores, seq);
                if (external.empty())
                    throw std::runtime_error("score file has no records");
                const int ext_dim = static_cast<int>(external.begin()->second.size());
                if (model.feature_count != ext_dim + 6)
                    throw std::runtime_error("model expects " +
                                             std::to_string(model.feature_count) +
                                             " features but scores provide " +
                                             std::to_string(ext_dim) + " + 6 contextual");
                scorer = make_gbm_scorer(model, &external);
            } else {
                if (model.feature_count != 6)
                    throw std::runtime_error("model expects external features; pass --scores");
                scorer = make_gbm_scorer(model, nullptr);
            }
        } else if (!track_scores.empty()) {
            external = load_scores(track_scores, seq);
            if (!external.empty() && external.begin()->second.size() != 1)
                throw std::runtime_error("--scores without --model requires single-value records");
            scorer = make_external_scorer(external);
        } else {
            scorer = flow::make_lp2d_scorer(lp2d_tau);
        }

        flow::FlowSolution sol = flow::track_sequence(seq, scorer, track_costs.config());
        std::ofstream out(track_out);
        if (!out)
            throw std::runtime_error("cannot write " + track_out);
        io::write_results(sol.trajectories, out);
        std::cout << sol.trajectories.size() << " trajectories, total cost "
                  << io::format_real(sol.total_cost) << "\n";
        return 0;
    }

    if (eval_cmd->parsed()) {
        auto gt_in = open_input(eval_gt);
        auto gt = io::parse_mot_file(gt_in, io::MotKind::ground_truth);
        auto res_in = open_input(eval_res);
        auto res = io::parse_mot_file(res_in, io::MotKind::results);
        auto report = clearmot::evaluate_sequence(gt.entries, io::group_tracks(res.entries),
                                                  eval_iou);
        print_report(report);
        return 0;
    }

    if (tune_cmd->parsed()) {
        if (tune_model.empty() == tune_baseline.empty())
            throw CLI::ValidationError("tune", "exactly one of --model, --baseline is required");

        std::vector<Sequence> seqs;
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(train_dir))
            if (entry.is_directory())
                dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
            const fs::path det = dir / "det" / "det.txt";
            const fs::path gt = dir / "gt" / "gt.txt";
            if (!fs::exists(det) || !fs::exists(gt))
                continue;
            Sequence seq = load_sequence(det.string(), gt.string());
            seq.name = dir.filename().string();
            seqs.push_back(std::move(seq));
        }
        if (seqs.empty())
            throw std::runtime_error("no sequences found under " + train_dir);

        gbm::GbmModel model;
        flow::PairScorer scorer;
        if (!tune_model.empty()) {
            model = load_model(tune_model);
            if (model.feature_count != 6)
                throw std::runtime_error("tune supports contextual-only models (6 features)");
            scorer = make_gbm_scorer(model, nullptr);
        } else {
            scorer = flow::make_lp2d_scorer(tune_tau);
        }

        auto grid = tune::parse_grid(grid_spec);
        auto result = tune::sweep(seqs, scorer, tune_costs.config(), grid);

        std::cout << "vdet,vlink,cinout,mean_mota,id_switches,fp,trajectories\n";
        for (const auto& pt : result.table)
            std::cout << io::format_real(pt.cfg.v_det) << ',' << io::format_real(pt.cfg.v_link)
                      << ',' << io::format_real(pt.cfg.c_in_out) << ','
                      << io::format_real(pt.mean_mota) << ',' << pt.id_switches << ',' << pt.fp
                      << ',' << pt.trajectories << "\n";
        const auto& best = result.table[result.best_index];
        std::cout << "best: vdet=" << io::format_real(best.cfg.v_det)
                  << " vlink=" << io::format_real(best.cfg.v_link)
                  << " cinout=" << io::format_real(best.cfg.c_in_out)
                  << " mean_mota=" << io::format_real(best.mean_mota) << "\n";
        return 0;
    }

    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
