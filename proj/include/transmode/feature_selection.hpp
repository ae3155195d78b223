#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "transmode/baselines.hpp"
#include "transmode/feature_matrix.hpp"

namespace transmode {

struct ImportanceScore {
    std::string selector_name;
    std::map<std::string, double> scores;  // higher = more important
    bool converged = true;
};

struct FeatureRanking {
    std::map<std::string, std::map<std::string, double>> per_selector_ranks;
    std::map<std::string, double> mean_rank;
    std::vector<std::string> selected;  // ascending by mean rank

    nlohmann::json to_json() const {
        nlohmann::json features = nlohmann::json::array();
        std::set<std::string> selected_set(selected.begin(), selected.end());
        for (const auto& [name, mr] : mean_rank) {
            nlohmann::json row;
            row["feature"] = name;
            row["mean_rank"] = mr;
            row["selected"] = selected_set.count(name) > 0;
            nlohmann::json ranks;
            for (const auto& [sel, table] : per_selector_ranks) ranks[sel] = table.at(name);
            row["ranks"] = ranks;
            features.push_back(row);
        }
        return {{"features", features}, {"selected", selected}};
    }
};

// ---- univariate statistical test ------------------------------------------

namespace detail {

inline double anova_f_statistic(const std::vector<double>& x, const std::vector<int>& labels,
                                int n_classes) {
    const std::size_t n = x.size();
    double grand_mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    std::vector<double> sum(n_classes, 0.0), count(n_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        sum[labels[i]] += x[i];
        count[labels[i]] += 1.0;
    }
    double ssb = 0.0, ssw = 0.0;
    int groups = 0;
    for (int k = 0; k < n_classes; ++k) {
        if (count[k] == 0.0) continue;
        ++groups;
        double mean_k = sum[k] / count[k];
        ssb += count[k] * (mean_k - grand_mean) * (mean_k - grand_mean);
    }
    for (std::size_t i = 0; i < n; ++i) {
        double mean_k = sum[labels[i]] / count[labels[i]];
        ssw += (x[i] - mean_k) * (x[i] - mean_k);
    }
    if (groups < 2 || n <= static_cast<std::size_t>(groups)) return 0.0;
    if (ssb <= 0.0) return 0.0;
    double msb = ssb / (groups - 1);
    double msw = ssw / (static_cast<double>(n) - groups);
    return msb / std::max(msw, 1e-12);
}

inline double chi_square_statistic(const std::vector<double>& x, const std::vector<int>& labels,
                                   int n_classes) {
    std::map<double, std::size_t> value_index;
    for (double v : x) value_index.emplace(v, value_index.size());
    if (value_index.size() < 2) return 0.0;
    const std::size_t rows = value_index.size();
    std::vector<std::vector<double>> observed(rows, std::vector<double>(n_classes, 0.0));
    std::vector<double> row_total(rows, 0.0), col_total(n_classes, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t r = value_index[x[i]];
        observed[r][labels[i]] += 1.0;
        row_total[r] += 1.0;
        col_total[labels[i]] += 1.0;
    }
    double n = static_cast<double>(x.size());
    double stat = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
        for (int c = 0; c < n_classes; ++c) {
            double expected = row_total[r] * col_total[c] / n;
            if (expected > 0.0)
                stat += (observed[r][c] - expected) * (observed[r][c] - expected) / expected;
        }
    return stat;
}

}  // namespace detail

inline ImportanceScore univariate_importance(const FeatureMatrix& fm) {
    fm.validate();
    if (detail::distinct_labels(fm.labels) < 2)
        throw DegenerateLabels("univariate test needs at least two classes");
    ImportanceScore out;
    out.selector_name = "univariate";
    for (std::size_t j = 0; j < fm.n_features(); ++j) {
        double s = fm.is_categorical[j]
                       ? detail::chi_square_statistic(fm.columns[j], fm.labels, fm.n_classes)
                       : detail::anova_f_statistic(fm.columns[j], fm.labels, fm.n_classes);
        out.scores[fm.names[j]] = s;
    }
    return out;
}

// ---- L1-regularized logistic regression (one-vs-rest) ---------------------

struct LassoConfig {
    std::vector<double> lambda_grid = {1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001};
    int max_iterations = 500;
    double tolerance = 1e-7;
    std::uint64_t seed = 0;
};

namespace detail {

struct StandardizedMatrix {
    std::vector<std::vector<double>> columns;
    std::vector<double> mean, scale;
};

inline StandardizedMatrix standardize(const std::vector<std::vector<double>>& columns,
                                      const std::vector<std::size_t>& rows) {
    StandardizedMatrix out;
    out.columns.resize(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
        double mean = 0.0;
        for (std::size_t r : rows) mean += columns[j][r];
        mean /= rows.size();
        double var = 0.0;
        for (std::size_t r : rows) var += (columns[j][r] - mean) * (columns[j][r] - mean);
        var /= rows.size();
        double scale = var > 1e-12 ? std::sqrt(var) : 0.0;
        out.mean.push_back(mean);
        out.scale.push_back(scale);
        out.columns[j].reserve(rows.size());
        for (std::size_t r : rows)
            out.columns[j].push_back(scale > 0.0 ? (columns[j][r] - mean) / scale : 0.0);
    }
    return out;
}

inline double soft_threshold(double v, double t) {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

// Cyclic coordinate descent on the quadratic (IRLS) approximation of the
// penalized binary logistic loss. Returns false on non-convergence.
inline bool fit_l1_logistic(const std::vector<std::vector<double>>& x,
                            const std::vector<double>& y, double lambda, int max_iterations,
                            double tolerance, double& intercept, std::vector<double>& beta) {
    const std::size_t n = y.size();
    const std::size_t p = x.size();
    beta.assign(p, 0.0);
    intercept = 0.0;
    std::vector<double> f(n, 0.0);
    for (int outer = 0; outer < max_iterations; ++outer) {
        std::vector<double> w(n), z(n);
        for (std::size_t i = 0; i < n; ++i) {
            double pi = 1.0 / (1.0 + std::exp(-f[i]));
            double wi = std::max(pi * (1.0 - pi), 1e-5);
            w[i] = wi;
            z[i] = f[i] + (y[i] - pi) / wi;
        }
        double max_delta = 0.0;
        // intercept
        {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                num += w[i] * (z[i] - (f[i] - intercept));
                den += w[i];
            }
            double updated = num / den;
            double delta = updated - intercept;
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) f[i] += delta;
                max_delta = std::max(max_delta, std::abs(delta));
                intercept = updated;
            }
        }
        for (std::size_t j = 0; j < p; ++j) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double partial = f[i] - x[j][i] * beta[j];
                num += w[i] * x[j][i] * (z[i] - partial);
                den += w[i] * x[j][i] * x[j][i];
            }
            if (den <= 1e-12) continue;
            double updated = soft_threshold(num / n, lambda) / (den / n);
            double delta = updated - beta[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) f[i] += delta * x[j][i];
                max_delta = std::max(max_delta, std::abs(delta));
                beta[j] = updated;
            }
        }
        if (max_delta < tolerance) return true;
    }
    return false;
}

inline double binary_log_loss(const std::vector<std::vector<double>>& x,
                              const std::vector<double>& y, double intercept,
                              const std::vector<double>& beta) {
    double loss = 0.0;
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) {
        double f = intercept;
        for (std::size_t j = 0; j < x.size(); ++j) f += x[j][i] * beta[j];
        // numerically stable log(1+exp)
        double m = std::max(f, 0.0);
        loss += m + std::log(std::exp(-m) + std::exp(f - m)) - y[i] * f;
    }
    return loss / n;
}

}  // namespace detail

inline ImportanceScore lasso_importance(const FeatureMatrix& fm, const LassoConfig& cfg = {}) {
    fm.validate();
    if (detail::distinct_labels(fm.labels) < 2)
        throw DegenerateLabels("lasso needs at least two classes");
    const std::size_t n = fm.n_rows();

    // internal 80/20 split for lambda selection
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed);
    deterministic_shuffle(order, rng);
    std::size_t n_train = std::max<std::size_t>(1, n - n / 5);
    std::vector<std::size_t> train_rows(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> valid_rows(order.begin() + n_train, order.end());
    if (valid_rows.empty()) valid_rows = train_rows;
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(valid_rows.begin(), valid_rows.end());

    auto train_x = detail::standardize(fm.columns, train_rows);
    // validation columns on the training standardization
    std::vector<std::vector<double>> valid_x(fm.n_features());
    for (std::size_t j = 0; j < fm.n_features(); ++j)
        for (std::size_t r : valid_rows)
            valid_x[j].push_back(train_x.scale[j] > 0.0
                                     ? (fm.columns[j][r] - train_x.mean[j]) / train_x.scale[j]
                                     : 0.0);

    ImportanceScore out;
    out.selector_name = "lasso";
    std::vector<double> best_abs_coef(fm.n_features(), 0.0);

    std::set<int> classes(fm.labels.begin(), fm.labels.end());
    for (int k : classes) {
        std::vector<double> y_train, y_valid;
        for (std::size_t r : train_rows) y_train.push_back(fm.labels[r] == k ? 1.0 : 0.0);
        for (std::size_t r : valid_rows) y_valid.push_back(fm.labels[r] == k ? 1.0 : 0.0);

        double best_loss = std::numeric_limits<double>::infinity();
        std::vector<double> best_beta(fm.n_features(), 0.0);
        for (double lambda : cfg.lambda_grid) {
            double intercept = 0.0;
            std::vector<double> beta;
            bool converged = detail::fit_l1_logistic(train_x.columns, y_train, lambda,
                                                     cfg.max_iterations, cfg.tolerance,
                                                     intercept, beta);
            if (!converged) out.converged = false;
            double loss = detail::binary_log_loss(valid_x, y_valid, intercept, beta);
            if (loss < best_loss - 1e-12) {
                best_loss = loss;
                best_beta = beta;
            }
        }
        for (std::size_t j = 0; j < fm.n_features(); ++j)
            best_abs_coef[j] = std::max(best_abs_coef[j], std::abs(best_beta[j]));
    }
    for (std::size_t j = 0; j < fm.n_features(); ++j) out.scores[fm.names[j]] = best_abs_coef[j];
    return out;
}

// ---- random forest --------------------------------------------------------

struct ForestConfig {
    int n_trees = 200;
    int max_depth = 6;
    std::uint64_t seed = 0;
};

inline ImportanceScore forest_importance(const FeatureMatrix& fm, const ForestConfig& cfg = {}) {
    fm.validate();
    if (detail::distinct_labels(fm.labels) < 2)
        throw DegenerateLabels("random forest needs at least two classes");
    const std::size_t n = fm.n_rows();
    const std::size_t p = fm.n_features();

    TreeParams tp;
    tp.max_depth = cfg.max_depth;
    tp.feature_subsample =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(double(p)))));

    Rng rng(cfg.seed);
    std::vector<double> decrease(p, 0.0);
    for (int t = 0; t < cfg.n_trees; ++t) {
        std::vector<std::size_t> bootstrap(n);
        for (std::size_t i = 0; i < n; ++i) bootstrap[i] = uniform_index(rng, n);
        fit_classification_tree(fm.columns, bootstrap, fm.labels, fm.n_classes, tp, rng, &decrease);
    }
    double total = std::accumulate(decrease.begin(), decrease.end(), 0.0);
    ImportanceScore out;
    out.selector_name = "random_forest";
    for (std::size_t j = 0; j < p; ++j)
        out.scores[fm.names[j]] = total > 0.0 ? decrease[j] / total : 0.0;
    return out;
}

// ---- gradient-boosting gain -----------------------------------------------

inline ImportanceScore boosting_importance(const FeatureMatrix& fm, const BoostParams& params = {
                                                                        .n_rounds = 50}) {
    auto model = train_gradient_boosting(fm, params);
    ImportanceScore out;
    out.selector_name = "gradient_boosting";
    for (std::size_t j = 0; j < fm.n_features(); ++j)
        out.scores[fm.names[j]] = model.feature_gain[j];
    return out;
}

// ---- rank aggregation -----------------------------------------------------

// Fractional (average) ranks by descending score within one selector.
inline std::map<std::string, double> fractional_ranks(const ImportanceScore& score) {
    std::vector<std::pair<std::string, double>> items(score.scores.begin(), score.scores.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::map<std::string, double> ranks;
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i;
        while (j < items.size() && items[j].second == items[i].second) ++j;
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t t = i; t < j; ++t) ranks[items[t].first] = avg;
        i = j;
    }
    return ranks;
}

inline FeatureRanking aggregate_mean_rank(const std::vector<ImportanceScore>& scores,
                                          std::size_t k) {
    if (scores.empty()) throw SchemaError("no importance scores to aggregate");
    std::set<std::string> reference;
    for (const auto& [f, s] : scores.front().scores) reference.insert(f);
    for (const auto& sc : scores) {
        std::set<std::string> features;
        for (const auto& [f, s] : sc.scores) features.insert(f);
        if (features != reference)
            throw SchemaError("importance scores cover different feature sets");
    }
    if (k > reference.size()) throw SchemaError("top-k exceeds feature count");

    FeatureRanking ranking;
    for (const auto& sc : scores) ranking.per_selector_ranks[sc.selector_name] = fractional_ranks(sc);
    for (const auto& f : reference) {
        double sum = 0.0;
        for (const auto& sc : scores) sum += ranking.per_selector_ranks[sc.selector_name][f];
        ranking.mean_rank[f] = sum / scores.size();
    }
    std::vector<std::string> order(reference.begin(), reference.end());
    std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
        if (ranking.mean_rank[a] != ranking.mean_rank[b])
            return ranking.mean_rank[a] < ranking.mean_rank[b];
        return a < b;
    });
    ranking.selected.assign(order.begin(), order.begin() + k);
    return ranking;
}

inline std::vector<std::string> select_top_k(const FeatureRanking& ranking) {
    return ranking.selected;
}

}  // namespace transmode
