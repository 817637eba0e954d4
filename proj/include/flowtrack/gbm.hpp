#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace flowtrack::gbm {

struct GbmConfig {
    int n_trees = 400;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 20;
    double subsample = 1.0;  // fraction of samples drawn per stage, in (0,1]
    std::uint64_t seed = 0;
};

// Internal node when feature >= 0, leaf otherwise.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    double eval(std::span<const double> x) const;
};

struct GbmModel {
    double base_score = 0.0;  // log-odds of the positive rate
    double learning_rate = 0.1;
    int feature_count = 0;
    std::vector<RegressionTree> trees;
    std::vector<double> stage_deviance;  // training log-loss after each stage
    bool degenerate = false;             // single-class training data

    // sigma(base_score + learning_rate * sum of tree outputs), strictly in (0,1)
    double predict(std::span<const double> x) const;
};

struct Dataset {
    std::vector<std::vector<double>> features;
    std::vector<int> labels;  // 0 or 1
};

GbmModel train(const Dataset& data, const GbmConfig& cfg);

// Leave-one-group-out predictions aligned with the input order.
// groups[i] is the fold id of sample i; requires at least two distinct groups.
std::vector<double> cross_val_predict(const Dataset& data,
                                      const std::vector<int>& groups,
                                      const GbmConfig& cfg);

// Mann-Whitney AUC with ties counted 0.5. Requires both classes present.
double evaluate_auc(const std::vector<int>& labels, const std::vector<double>& scores);

double sigmoid(double x);

}  // namespace flowtrack::gbm
