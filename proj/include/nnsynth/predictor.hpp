// SPDX-License-Identifier: Apache-2.0
#pragma once

/// @file predictor.hpp Accuracy predictor: depth-limited CART regression
/// trees boosted with AdaBoost.R2 (linear loss, weighted-median aggregation),
/// a linear ridge baseline, and the leave-one-out evaluation harness.
///
/// Genes enter the regressors as raw grid indices; the trees split on index
/// space directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnsynth/common.hpp"
#include "nnsynth/search_space.hpp"

namespace nnsynth {

struct AccuracyRecord {
    ArchitectureGene gene;
    double accuracy = 0.0;           // validation accuracy in [0, 1]
    std::string source_tag;          // "initial_random" or "iteration_k"
};

inline std::vector<double> gene_features(const ArchitectureGene& gene) {
    std::vector<double> f;
    f.reserve(gene.indices.size());
    for (auto idx : gene.indices) f.push_back(static_cast<double>(idx));
    return f;
}

// ---------------------------------------------------------------------------
// CART regression tree
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;     // leaf prediction (weighted mean)

    bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
public:
    std::vector<TreeNode> nodes;
    int max_depth = 5;

    double predict(const std::vector<double>& features) const {
        if (nodes.empty()) throw std::logic_error("tree: not fitted");
        int at = 0;
        while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
            const TreeNode& n = nodes[static_cast<std::size_t>(at)];
            at = features[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(at)].value;
    }

    double predict(const ArchitectureGene& gene) const { return predict(gene_features(gene)); }
};

namespace detail {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // impurity reduction
};

/// Weighted sum of squared deviations from the weighted mean.
inline double node_impurity(const std::vector<double>& y, const std::vector<double>& w,
                            const std::vector<std::size_t>& idx) {
    double sw = 0.0, swy = 0.0, swyy = 0.0;
    for (std::size_t i : idx) {
        sw += w[i];
        swy += w[i] * y[i];
        swyy += w[i] * y[i] * y[i];
    }
    if (sw <= 0.0) return 0.0;
    return swyy - swy * swy / sw;
}

}  // namespace detail

/// Greedy variance-reduction CART fit. Thresholds are midpoints of
/// consecutive distinct observed feature values; splitting stops at
/// max_depth, fewer than two samples, or zero impurity. Leaves predict the
/// weighted mean. Ties between splits resolve to the lowest feature index,
/// then the lowest threshold.
inline RegressionTree fit_tree(const std::vector<AccuracyRecord>& records,
                               const std::vector<double>& sample_weights, int max_depth) {
    if (records.empty()) throw std::invalid_argument("fit_tree: empty records");
    if (sample_weights.size() != records.size())
        throw std::invalid_argument("fit_tree: weight count != record count");
    double wsum = 0.0;
    for (double w : sample_weights) {
        if (w < 0.0) throw std::invalid_argument("fit_tree: negative weight");
        wsum += w;
    }
    if (wsum <= 0.0) throw std::invalid_argument("fit_tree: all weights zero");

    const std::size_t n = records.size();
    const std::size_t dims = records[0].gene.indices.size();
    std::vector<std::vector<double>> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = gene_features(records[i].gene);
        y[i] = records[i].accuracy;
    }

    RegressionTree tree;
    tree.max_depth = max_depth;

    struct Job {
        int node;
        std::vector<std::size_t> idx;
        int depth;
    };
    std::vector<Job> stack;

    auto leaf_value = [&](const std::vector<std::size_t>& idx) {
        double sw = 0.0, swy = 0.0;
        for (std::size_t i : idx) {
            sw += sample_weights[i];
            swy += sample_weights[i] * y[i];
        }
        return sw > 0.0 ? swy / sw : 0.0;
    };

    std::vector<std::size_t> root(n);
    std::iota(root.begin(), root.end(), 0);
    tree.nodes.push_back({});
    stack.push_back({0, std::move(root), 0});

    while (!stack.empty()) {
        Job job = std::move(stack.back());
        stack.pop_back();

        const double impurity = detail::node_impurity(y, sample_weights, job.idx);
        if (job.depth >= max_depth || job.idx.size() < 2 || impurity <= 1e-12) {
            tree.nodes[static_cast<std::size_t>(job.node)].value = leaf_value(job.idx);
            continue;
        }

        detail::SplitChoice best;
        std::vector<std::size_t> order = job.idx;
        for (std::size_t f = 0; f < dims; ++f) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (x[a][f] != x[b][f]) return x[a][f] < x[b][f];
                return a < b;
            });
            double sw_total = 0.0, swy_total = 0.0, swyy_total = 0.0;
            for (std::size_t i : order) {
                sw_total += sample_weights[i];
                swy_total += sample_weights[i] * y[i];
                swyy_total += sample_weights[i] * y[i] * y[i];
            }
            double sw_l = 0.0, swy_l = 0.0, swyy_l = 0.0;
            for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
                const std::size_t i = order[pos];
                sw_l += sample_weights[i];
                swy_l += sample_weights[i] * y[i];
                swyy_l += sample_weights[i] * y[i] * y[i];
                if (x[order[pos]][f] == x[order[pos + 1]][f]) continue;
                const double sw_r = sw_total - sw_l;
                if (sw_l <= 0.0 || sw_r <= 0.0) continue;
                const double imp_l = swyy_l - swy_l * swy_l / sw_l;
                const double swy_r = swy_total - swy_l;
                const double imp_r = (swyy_total - swyy_l) - swy_r * swy_r / sw_r;
                const double score = impurity - imp_l - imp_r;
                if (score > best.score + 1e-15) {
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (x[order[pos]][f] + x[order[pos + 1]][f]);
                    best.score = score;
                }
            }
        }

        if (best.feature < 0) {
            tree.nodes[static_cast<std::size_t>(job.node)].value = leaf_value(job.idx);
            continue;
        }

        std::vector<std::size_t> left, right;
        for (std::size_t i : job.idx)
            (x[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right)
                .push_back(i);

        const int left_id = static_cast<int>(tree.nodes.size());
        const int right_id = left_id + 1;
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        TreeNode& node = tree.nodes[static_cast<std::size_t>(job.node)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left_id;
        node.right = right_id;
        stack.push_back({right_id, std::move(right), job.depth + 1});
        stack.push_back({left_id, std::move(left), job.depth + 1});
    }
    return tree;
}

// ---------------------------------------------------------------------------
// AdaBoost.R2 boosting
// ---------------------------------------------------------------------------

class BoostedTreeModel {
public:
    std::vector<RegressionTree> stages;
    std::vector<double> stage_log_weights;  // ln(1/beta_t), positive
    int max_depth = 5;
    int max_stages = 500;
    std::uint64_t seed = 0;

    std::size_t stage_count() const { return stages.size(); }

    /// Weighted median over stage predictions, clamped to [0, 1].
    double predict(const ArchitectureGene& gene) const {
        return predict_with_stages(gene, stages.size());
    }

    double predict_with_stages(const ArchitectureGene& gene, std::size_t use_stages) const {
        if (stages.empty()) throw std::logic_error("boosted model: not fitted");
        use_stages = std::min(use_stages, stages.size());
        const auto features = gene_features(gene);
        std::vector<std::pair<double, double>> scored;  // (prediction, weight)
        scored.reserve(use_stages);
        double total = 0.0;
        for (std::size_t t = 0; t < use_stages; ++t) {
            scored.emplace_back(stages[t].predict(features), stage_log_weights[t]);
            total += stage_log_weights[t];
        }
        std::sort(scored.begin(), scored.end());
        double cum = 0.0;
        double out = scored.back().first;
        for (const auto& [pred, weight] : scored) {
            cum += weight;
            if (cum >= 0.5 * total) {
                out = pred;
                break;
            }
        }
        return std::clamp(out, 0.0, 1.0);
    }
};

/// AdaBoost.R2 with linear loss. Per stage: resample records by instance
/// weight, fit a depth-limited tree, compute per-instance relative losses
/// L_i = |err_i| / max|err|, average loss Lbar = sum w_i L_i, beta =
/// Lbar / (1 - Lbar), multiply w_i by beta^(1 - L_i) and renormalize. Stops
/// early when Lbar >= 0.5 (keeping at least one stage) or when a stage fits
/// the records exactly.
inline BoostedTreeModel fit_boosted(const std::vector<AccuracyRecord>& records,
                                    int max_depth = 5, int max_stages = 500,
                                    std::uint64_t seed = 0) {
    if (records.size() < 2) throw std::invalid_argument("fit_boosted: need >= 2 records");
    const std::size_t n = records.size();
    BoostedTreeModel model;
    model.max_depth = max_depth;
    model.max_stages = max_stages;
    model.seed = seed;

    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<std::vector<double>> features(n);
    for (std::size_t i = 0; i < n; ++i) features[i] = gene_features(records[i].gene);

    for (int t = 0; t < max_stages; ++t) {
        Rng rng(derive_seed(seed, "boost_stage", static_cast<std::uint64_t>(t)));
        // Weighted bootstrap via CDF inversion.
        std::vector<double> cdf(n);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += w[i];
            cdf[i] = acc;
        }
        std::vector<AccuracyRecord> sample;
        sample.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform() * acc;
            const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
            const auto pick = static_cast<std::size_t>(it - cdf.begin());
            sample.push_back(records[std::min(pick, n - 1)]);
        }
        RegressionTree tree = fit_tree(sample, std::vector<double>(n, 1.0), max_depth);

        std::vector<double> err(n);
        double max_err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err[i] = std::abs(tree.predict(features[i]) - records[i].accuracy);
            max_err = std::max(max_err, err[i]);
        }
        if (max_err <= 1e-12) {
            // Exact stage; it alone decides the weighted median.
            model.stages.push_back(std::move(tree));
            model.stage_log_weights.push_back(std::log(1e12));
            break;
        }
        double avg_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) avg_loss += w[i] * (err[i] / max_err);
        if (avg_loss >= 0.5) {
            if (model.stages.empty()) {
                model.stages.push_back(std::move(tree));
                model.stage_log_weights.push_back(std::log((1.0 - avg_loss) / avg_loss +
                                                           1e-12));
            }
            break;
        }
        const double beta = avg_loss / (1.0 - avg_loss);
        model.stages.push_back(std::move(tree));
        model.stage_log_weights.push_back(std::log(1.0 / std::max(beta, 1e-12)));

        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= std::pow(beta, 1.0 - err[i] / max_err);
            wsum += w[i];
        }
        if (!(wsum > 0.0) || !std::isfinite(wsum)) break;
        for (double& wi : w) wi /= wsum;
    }
    return model;
}

// ---------------------------------------------------------------------------
// Linear ridge baseline
// ---------------------------------------------------------------------------

struct RidgeModel {
    std::vector<double> coef;  // length dims + 1, intercept last
    double lambda = 1e-6;

    double predict(const ArchitectureGene& gene) const {
        const auto f = gene_features(gene);
        double out = coef.back();
        for (std::size_t j = 0; j < f.size(); ++j) out += coef[j] * f[j];
        return out;
    }
};

/// Ridge regression on gene features; the intercept is not penalized.
inline RidgeModel fit_ridge(const std::vector<AccuracyRecord>& records, double lambda = 1e-6) {
    if (records.empty()) throw std::invalid_argument("fit_ridge: empty records");
    const std::size_t n = records.size();
    const std::size_t d = records[0].gene.indices.size() + 1;

    std::vector<std::vector<double>> a(d, std::vector<double>(d + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        auto f = gene_features(records[i].gene);
        f.push_back(1.0);
        for (std::size_t r = 0; r < d; ++r) {
            for (std::size_t c = 0; c < d; ++c) a[r][c] += f[r] * f[c];
            a[r][d] += f[r] * records[i].accuracy;
        }
    }
    for (std::size_t r = 0; r + 1 < d; ++r) a[r][r] += lambda;

    // Gaussian elimination with partial pivoting.
    for (std::size_t col = 0; col < d; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < d; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        double diag = a[col][col];
        if (std::abs(diag) < 1e-12) {
            a[col][col] += 1e-9;
            diag = a[col][col];
        }
        for (std::size_t r = 0; r < d; ++r) {
            if (r == col) continue;
            const double factor = a[r][col] / diag;
            if (factor == 0.0) continue;
            for (std::size_t c = col; c <= d; ++c) a[r][c] -= factor * a[col][c];
        }
    }
    RidgeModel model;
    model.lambda = lambda;
    model.coef.resize(d);
    for (std::size_t r = 0; r < d; ++r) model.coef[r] = a[r][d] / a[r][r];
    return model;
}

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

/// Leave-one-out mean squared error. `fit` maps (records-without-i,
/// fold_seed) to a gene->prediction callable. Folds are independent and may
/// run in parallel; fold seeds derive from `seed` and the fold index.
template <typename FitFn>
double loo_mse(const std::vector<AccuracyRecord>& records, FitFn&& fit,
               std::uint64_t seed = 0, int workers = 1) {
    if (records.size() < 2) throw std::invalid_argument("loo_mse: need >= 2 records");
    const std::size_t n = records.size();
    std::vector<double> sq(n, 0.0);
    parallel_for(n, workers, [&](std::size_t i) {
        std::vector<AccuracyRecord> rest;
        rest.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) rest.push_back(records[j]);
        const auto predictor = fit(rest, derive_seed(seed, "loo_fold", i));
        const double e = predictor(records[i].gene) - records[i].accuracy;
        sq[i] = e * e;
    });
    double total = 0.0;
    for (double v : sq) total += v;
    return total / static_cast<double>(n);
}

/// Average ranks with ties sharing the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        return a < b;
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

/// Spearman rank correlation; nullopt when either side is constant.
inline std::optional<double> spearman(const std::vector<double>& a,
                                      const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 3)
        throw std::invalid_argument("spearman: need >= 3 paired values");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va <= 0.0 || vb <= 0.0) return std::nullopt;
    return cov / std::sqrt(va * vb);
}

/// Spearman correlation between model predictions and recorded accuracies on
/// a holdout set.
template <typename Model>
std::optional<double> rank_correlation(const Model& model,
                                       const std::vector<AccuracyRecord>& holdout) {
    std::vector<double> predicted, actual;
    predicted.reserve(holdout.size());
    actual.reserve(holdout.size());
    for (const auto& rec : holdout) {
        predicted.push_back(model.predict(rec.gene));
        actual.push_back(rec.accuracy);
    }
    return spearman(predicted, actual);
}

// ---------------------------------------------------------------------------
// Checkpoint serialization
// ---------------------------------------------------------------------------

inline nlohmann::json tree_to_json(const RegressionTree& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes)
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"value", n.value}});
    return {{"max_depth", tree.max_depth}, {"nodes", nodes}};
}

inline RegressionTree tree_from_json(const nlohmann::json& doc) {
    RegressionTree tree;
    tree.max_depth = doc.at("max_depth").get<int>();
    for (const auto& jn : doc.at("nodes")) {
        TreeNode n;
        n.feature = jn.at("feature").get<int>();
        n.threshold = jn.at("threshold").get<double>();
        n.left = jn.at("left").get<int>();
        n.right = jn.at("right").get<int>();
        n.value = jn.at("value").get<double>();
        tree.nodes.push_back(n);
    }
    return tree;
}

inline nlohmann::json model_to_json(const BoostedTreeModel& model, std::size_t records,
                                    std::uint64_t space_hash) {
    nlohmann::json stages = nlohmann::json::array();
    for (std::size_t t = 0; t < model.stages.size(); ++t)
        stages.push_back({{"log_weight", model.stage_log_weights[t]},
                          {"tree", tree_to_json(model.stages[t])}});
    return {{"format_version", 1},
            {"stages", stages},
            {"metadata",
             {{"records", records},
              {"seed", model.seed},
              {"space_hash", space_hash},
              {"max_depth", model.max_depth},
              {"max_stages", model.max_stages}}}};
}

inline BoostedTreeModel model_from_json(const nlohmann::json& doc) {
    if (doc.at("format_version").get<int>() != 1)
        throw std::runtime_error("predictor: unsupported format version");
    BoostedTreeModel model;
    const auto& meta = doc.at("metadata");
    model.seed = meta.at("seed").get<std::uint64_t>();
    model.max_depth = meta.at("max_depth").get<int>();
    model.max_stages = meta.at("max_stages").get<int>();
    for (const auto& js : doc.at("stages")) {
        model.stage_log_weights.push_back(js.at("log_weight").get<double>());
        model.stages.push_back(tree_from_json(js.at("tree")));
    }
    return model;
}

}  // namespace nnsynth
