#include "flowtrack/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace flowtrack::gbm {

namespace {

constexpr double kBaseClamp = 15.0;   // degenerate single-class log-odds
constexpr double kLeafClamp = 4.0;    // Newton leaf step saturation bound
constexpr double kMarginClamp = 30.0; // keeps sigmoid strictly inside (0,1)
constexpr double kGainEps = 1e-12;

double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

// Lexicographic (features, label) ordering makes training independent of the
// input row order when subsample = 1.
std::vector<int> canonical_order(const Dataset& data) {
    std::vector<int> order(data.features.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (data.features[a] != data.features[b])
            return data.features[a] < data.features[b];
        return data.labels[a] < data.labels[b];
    });
    return order;
}

struct SplitCandidate {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // sum_l^2/n_l + sum_r^2/n_r
};

// Best split for one feature; thresholds are midpoints between consecutive
// distinct values, rule "x < threshold goes left".
SplitCandidate best_split_for_feature(const Dataset& data,
                                      const std::vector<double>& residual,
                                      const std::vector<int>& node_samples,
                                      int feature, int min_leaf,
                                      double parent_score) {
    const int n = static_cast<int>(node_samples.size());
    std::vector<std::pair<double, int>> vals(n);
    for (int k = 0; k < n; ++k)
        vals[k] = {data.features[node_samples[k]][feature], k};
    std::stable_sort(vals.begin(), vals.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> prefix(n + 1, 0.0);
    for (int k = 0; k < n; ++k)
        prefix[k + 1] = prefix[k] + residual[node_samples[vals[k].second]];

    SplitCandidate best;
    best.feature = feature;
    for (int k = 0; k + 1 < n; ++k) {
        const double lo = vals[k].first;
        const double hi = vals[k + 1].first;
        if (!(lo < hi))
            continue;
        const double thr = (lo + hi) / 2.0;
        if (!(lo < thr && thr <= hi))
            continue;  // midpoint collapsed onto lo
        const int nl = k + 1;
        const int nr = n - nl;
        if (nl < min_leaf || nr < min_leaf)
            continue;
        const double sl = prefix[nl];
        const double sr = prefix[n] - sl;
        const double score = sl * sl / nl + sr * sr / nr;
        if (score > parent_score + kGainEps && (!best.found || score > best.score)) {
            best.found = true;
            best.threshold = thr;
            best.score = score;
        }
    }
    return best;
}

struct TreeBuilder {
    const Dataset& data;
    const std::vector<double>& residual;
    const std::vector<double>& hessian;
    const GbmConfig& cfg;
    RegressionTree tree;

    int build(const std::vector<int>& samples, int depth) {
        const int n = static_cast<int>(samples.size());
        double sum_r = 0.0;
        for (int i : samples)
            sum_r += residual[i];

        SplitCandidate best;
        if (depth < cfg.max_depth && n >= 2 * cfg.min_samples_leaf) {
            const double parent_score = sum_r * sum_r / n;
            const int d = static_cast<int>(data.features.front().size());
            std::vector<SplitCandidate> per_feature(d);
#pragma omp parallel for schedule(dynamic)
            for (int f = 0; f < d; ++f)
                per_feature[f] = best_split_for_feature(data, residual, samples, f,
                                                        cfg.min_samples_leaf, parent_score);
            // ascending feature order with strict improvement keeps the
            // lowest-feature, lowest-threshold winner on ties
            for (const auto& cand : per_feature) {
                if (!cand.found)
                    continue;
                if (!best.found || cand.score > best.score)
                    best = cand;
            }
        }

        if (!best.found) {
            double sum_h = 0.0;
            for (int i : samples)
                sum_h += hessian[i];
            double value = 0.0;
            if (sum_h > 1e-12)
                value = sum_r / sum_h;
            value = std::clamp(value, -kLeafClamp, kLeafClamp);
            TreeNode leaf;
            leaf.value = value;
            tree.nodes.push_back(leaf);
            return static_cast<int>(tree.nodes.size()) - 1;
        }

        std::vector<int> left_samples, right_samples;
        for (int i : samples) {
            if (data.features[i][best.feature] < best.threshold)
                left_samples.push_back(i);
            else
                right_samples.push_back(i);
        }

        const int self = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[self].feature = best.feature;
        tree.nodes[self].threshold = best.threshold;
        const int l = build(left_samples, depth + 1);
        const int r = build(right_samples, depth + 1);
        tree.nodes[self].left = l;
        tree.nodes[self].right = r;
        return self;
    }
};

// Fisher-Yates draw of k indices out of order.size(), independent of platform
// distribution implementations.
std::vector<int> draw_subsample(const std::vector<int>& order, int k, std::mt19937_64& rng) {
    std::vector<int> pool = order;
    const int n = static_cast<int>(pool.size());
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace

double sigmoid(double x) {
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double RegressionTree::eval(std::span<const double> x) const {
    int node = 0;
    while (!nodes[node].is_leaf())
        node = x[nodes[node].feature] < nodes[node].threshold ? nodes[node].left
                                                              : nodes[node].right;
    return nodes[node].value;
}

double GbmModel::predict(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != feature_count)
        throw std::invalid_argument("predict: feature dimension mismatch");
    double margin = base_score;
    double sum = 0.0;
    for (const auto& t : trees)
        sum += t.eval(x);
    margin += learning_rate * sum;
    return sigmoid(std::clamp(margin, -kMarginClamp, kMarginClamp));
}

GbmModel train(const Dataset& data, const GbmConfig& cfg) {
    const int n = static_cast<int>(data.features.size());
    if (n == 0 || data.labels.size() != data.features.size())
        throw std::invalid_argument("train: empty or mismatched dataset");
    const int d = static_cast<int>(data.features.front().size());
    for (const auto& row : data.features)
        if (static_cast<int>(row.size()) != d)
            throw std::invalid_argument("train: inconsistent feature dimensionality");
    if (cfg.n_trees < 0 || cfg.max_depth < 1 || !(cfg.learning_rate > 0.0) ||
        !(cfg.subsample > 0.0 && cfg.subsample <= 1.0))
        throw std::invalid_argument("train: invalid configuration");

    GbmModel model;
    model.learning_rate = cfg.learning_rate;
    model.feature_count = d;

    int n_pos = 0;
    for (int y : data.labels)
        n_pos += y;
    if (n_pos == 0 || n_pos == n) {
        model.base_score = n_pos == 0 ? -kBaseClamp : kBaseClamp;
        model.degenerate = true;
        return model;
    }
    const double p = static_cast<double>(n_pos) / n;
    model.base_score = std::log(p / (1.0 - p));

    const std::vector<int> order = canonical_order(data);
    std::vector<double> margin(n, model.base_score);
    std::vector<double> residual(n), hessian(n);
    std::mt19937_64 rng(cfg.seed);

    const int n_draw = std::max(1, static_cast<int>(cfg.subsample * n));

    for (int stage = 0; stage < cfg.n_trees; ++stage) {
        for (int i : order) {
            const double q = sigmoid(margin[i]);
            residual[i] = data.labels[i] - q;
            hessian[i] = q * (1.0 - q);
        }

        std::vector<int> stage_samples =
            cfg.subsample < 1.0 ? draw_subsample(order, n_draw, rng) : order;

        TreeBuilder builder{data, residual, hessian, cfg, {}};
        builder.build(stage_samples, 0);
        model.trees.push_back(std::move(builder.tree));

        const RegressionTree& t = model.trees.back();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i)
            margin[i] += cfg.learning_rate * t.eval(data.features[i]);

        double loss = 0.0;
        for (int i : order)
            loss += data.labels[i] == 1 ? softplus(-margin[i]) : softplus(margin[i]);
        model.stage_deviance.push_back(loss / n);
    }
    return model;
}

std::vector<double> cross_val_predict(const Dataset& data,
                                      const std::vector<int>& groups,
                                      const GbmConfig& cfg) {
    if (groups.size() != data.features.size())
        throw std::invalid_argument("cross_val_predict: group/sample count mismatch");
    std::vector<int> distinct = groups;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2)
        throw std::invalid_argument("cross_val_predict: needs at least two groups");

    std::vector<double> out(data.features.size(), 0.0);
    for (int g : distinct) {
        Dataset fold;
        for (size_t i = 0; i < groups.size(); ++i) {
            if (groups[i] != g) {
                fold.features.push_back(data.features[i]);
                fold.labels.push_back(data.labels[i]);
            }
        }
        GbmModel model = train(fold, cfg);
        for (size_t i = 0; i < groups.size(); ++i)
            if (groups[i] == g)
                out[i] = model.predict(data.features[i]);
    }
    return out;
}

double evaluate_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size() || labels.empty())
        throw std::invalid_argument("evaluate_auc: size mismatch");
    const int n = static_cast<int>(labels.size());
    int n_pos = 0;
    for (int y : labels)
        n_pos += y;
    const int n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("evaluate_auc: both classes required");

    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](int a, int b) { return scores[a] < scores[b]; });

    // rank sum of positives with average ranks over ties
    double rank_sum = 0.0;
    int i = 0;
    while (i < n) {
        int j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]])
            ++j;
        const double avg_rank = (i + 1 + j) / 2.0;  // 1-based ranks i+1 .. j
        for (int k = i; k < j; ++k)
            if (labels[idx[k]] == 1)
                rank_sum += avg_rank;
        i = j;
    }
    const double u = rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * n_neg);
}

}  // namespace flowtrack::gbm
