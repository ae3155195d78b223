#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "transmode/common.hpp"

namespace transmode {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;               // regression leaf output
    std::vector<double> class_votes;  // classification leaf distribution
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const std::vector<std::vector<double>>& columns, std::size_t row) const {
        int node = 0;
        while (nodes[node].feature >= 0)
            node = columns[nodes[node].feature][row] <= nodes[node].threshold ? nodes[node].left
                                                                              : nodes[node].right;
        return nodes[node].value;
    }

    const std::vector<double>& predict_votes(const std::vector<std::vector<double>>& columns,
                                             std::size_t row) const {
        int node = 0;
        while (nodes[node].feature >= 0)
            node = columns[nodes[node].feature][row] <= nodes[node].threshold ? nodes[node].left
                                                                              : nodes[node].right;
        return nodes[node].class_votes;
    }
};

struct TreeParams {
    int max_depth = 3;
    std::size_t min_leaf = 1;
    std::size_t feature_subsample = 0;  // 0 = use all features
};

namespace detail {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
};

// Best weighted-SSE split over the candidate features; deterministic
// tie-break on first feature / lowest threshold.
inline SplitChoice best_regression_split(const std::vector<std::vector<double>>& columns,
                                         const std::vector<std::size_t>& rows,
                                         const std::vector<double>& target,
                                         const std::vector<double>& weight,
                                         const std::vector<int>& features,
                                         std::size_t min_leaf) {
    SplitChoice best;
    double w_total = 0.0, wy_total = 0.0, wyy_total = 0.0;
    for (std::size_t r : rows) {
        w_total += weight[r];
        wy_total += weight[r] * target[r];
        wyy_total += weight[r] * target[r] * target[r];
    }
    if (w_total <= 0.0) return best;
    double parent_sse = wyy_total - wy_total * wy_total / w_total;

    std::vector<std::size_t> order(rows);
    for (int f : features) {
        const auto& col = columns[f];
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
        double w_left = 0.0, wy_left = 0.0, wyy_left = 0.0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            std::size_t r = order[i];
            w_left += weight[r];
            wy_left += weight[r] * target[r];
            wyy_left += weight[r] * target[r] * target[r];
            if (col[order[i]] == col[order[i + 1]]) continue;
            if (i + 1 < min_leaf || order.size() - i - 1 < min_leaf) continue;
            double w_right = w_total - w_left;
            if (w_left <= 0.0 || w_right <= 0.0) continue;
            double sse_left = wyy_left - wy_left * wy_left / w_left;
            double wy_right = wy_total - wy_left;
            double sse_right = (wyy_total - wyy_left) - wy_right * wy_right / w_right;
            double gain = parent_sse - sse_left - sse_right;
            if (gain > best.gain + 1e-12) {
                best.feature = f;
                best.threshold = 0.5 * (col[order[i]] + col[order[i + 1]]);
                best.gain = gain;
            }
        }
    }
    if (best.feature >= 0) {
        for (std::size_t r : rows)
            (columns[best.feature][r] <= best.threshold ? best.left_rows : best.right_rows)
                .push_back(r);
    }
    return best;
}

}  // namespace detail

// Weighted least-squares regression tree. `leaf_value` maps the rows falling
// into a leaf to its output (boosting supplies the Newton-step formula).
// `split_gain` (optional) accumulates per-feature SSE reduction.
inline Tree fit_regression_tree(
    const std::vector<std::vector<double>>& columns, const std::vector<std::size_t>& rows,
    const std::vector<double>& target, const std::vector<double>& weight, const TreeParams& params,
    const std::function<double(const std::vector<std::size_t>&)>& leaf_value,
    std::vector<double>* split_gain = nullptr, Rng* rng = nullptr) {
    Tree tree;
    struct Work {
        std::vector<std::size_t> rows;
        int depth;
        int node;
    };
    tree.nodes.emplace_back();
    std::vector<Work> stack{{rows, 0, 0}};
    while (!stack.empty()) {
        Work w = std::move(stack.back());
        stack.pop_back();

        std::vector<int> features;
        std::size_t p = columns.size();
        if (params.feature_subsample > 0 && params.feature_subsample < p && rng) {
            std::vector<int> all(p);
            std::iota(all.begin(), all.end(), 0);
            deterministic_shuffle(all, *rng);
            features.assign(all.begin(), all.begin() + params.feature_subsample);
            std::sort(features.begin(), features.end());
        } else {
            features.resize(p);
            std::iota(features.begin(), features.end(), 0);
        }

        detail::SplitChoice split;
        if (w.depth < params.max_depth && w.rows.size() >= 2 * params.min_leaf)
            split = detail::best_regression_split(columns, w.rows, target, weight, features,
                                                  params.min_leaf);
        if (split.feature < 0 || split.left_rows.empty() || split.right_rows.empty()) {
            tree.nodes[w.node].feature = -1;
            tree.nodes[w.node].value = leaf_value(w.rows);
            continue;
        }
        if (split_gain) (*split_gain)[split.feature] += split.gain;
        int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        int right = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[w.node].feature = split.feature;
        tree.nodes[w.node].threshold = split.threshold;
        tree.nodes[w.node].left = left;
        tree.nodes[w.node].right = right;
        stack.push_back({std::move(split.right_rows), w.depth + 1, right});
        stack.push_back({std::move(split.left_rows), w.depth + 1, left});
    }
    return tree;
}

// Gini-impurity classification tree used by the random-forest selector.
// `impurity_decrease` accumulates n_node-weighted Gini reduction per feature.
inline Tree fit_classification_tree(const std::vector<std::vector<double>>& columns,
                                    const std::vector<std::size_t>& rows,
                                    const std::vector<int>& labels, int n_classes,
                                    const TreeParams& params, Rng& rng,
                                    std::vector<double>* impurity_decrease = nullptr) {
    auto gini = [&](const std::vector<double>& counts, double total) {
        if (total <= 0.0) return 0.0;
        double g = 1.0;
        for (double c : counts) g -= (c / total) * (c / total);
        return g;
    };
    auto count_classes = [&](const std::vector<std::size_t>& rs) {
        std::vector<double> counts(n_classes, 0.0);
        for (std::size_t r : rs) counts[labels[r]] += 1.0;
        return counts;
    };

    Tree tree;
    struct Work {
        std::vector<std::size_t> rows;
        int depth;
        int node;
    };
    tree.nodes.emplace_back();
    std::vector<Work> stack{{rows, 0, 0}};
    while (!stack.empty()) {
        Work w = std::move(stack.back());
        stack.pop_back();
        auto parent_counts = count_classes(w.rows);
        double n_node = static_cast<double>(w.rows.size());
        double parent_gini = gini(parent_counts, n_node);

        int best_feature = -1;
        double best_threshold = 0.0, best_gain = 0.0;
        bool pure = std::count_if(parent_counts.begin(), parent_counts.end(),
                                  [](double c) { return c > 0; }) <= 1;
        if (w.depth < params.max_depth && !pure && w.rows.size() >= 2 * params.min_leaf) {
            std::vector<int> features;
            std::size_t p = columns.size();
            if (params.feature_subsample > 0 && params.feature_subsample < p) {
                std::vector<int> all(p);
                std::iota(all.begin(), all.end(), 0);
                deterministic_shuffle(all, rng);
                features.assign(all.begin(), all.begin() + params.feature_subsample);
                std::sort(features.begin(), features.end());
            } else {
                features.resize(p);
                std::iota(features.begin(), features.end(), 0);
            }
            std::vector<std::size_t> order(w.rows);
            for (int f : features) {
                const auto& col = columns[f];
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return col[a] < col[b]; });
                std::vector<double> left_counts(n_classes, 0.0);
                double n_left = 0.0;
                for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                    left_counts[labels[order[i]]] += 1.0;
                    n_left += 1.0;
                    if (col[order[i]] == col[order[i + 1]]) continue;
                    double n_right = n_node - n_left;
                    std::vector<double> right_counts(n_classes);
                    for (int c = 0; c < n_classes; ++c)
                        right_counts[c] = parent_counts[c] - left_counts[c];
                    double gain = parent_gini - (n_left / n_node) * gini(left_counts, n_left) -
                                  (n_right / n_node) * gini(right_counts, n_right);
                    if (gain > best_gain + 1e-12) {
                        best_feature = f;
                        best_threshold = 0.5 * (col[order[i]] + col[order[i + 1]]);
                        best_gain = gain;
                    }
                }
            }
        }
        if (best_feature < 0) {
            tree.nodes[w.node].feature = -1;
            tree.nodes[w.node].class_votes = parent_counts;
            continue;
        }
        if (impurity_decrease) (*impurity_decrease)[best_feature] += n_node * best_gain;
        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : w.rows)
            (columns[best_feature][r] <= best_threshold ? left_rows : right_rows).push_back(r);
        int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        int right = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[w.node].feature = best_feature;
        tree.nodes[w.node].threshold = best_threshold;
        tree.nodes[w.node].left = left;
        tree.nodes[w.node].right = right;
        stack.push_back({std::move(right_rows), w.depth + 1, right});
        stack.push_back({std::move(left_rows), w.depth + 1, left});
    }
    return tree;
}

}  // namespace transmode
