#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "transmode/feature_matrix.hpp"
#include "transmode/tree.hpp"

namespace transmode {

enum class BoostAlgorithm { GradientBoosting, LogitBoost };

struct BoostParams {
    int n_rounds = 200;
    double learning_rate = 0.1;
    int max_depth = 3;
    std::uint64_t seed = 0;
};

struct BoostedModel {
    BoostAlgorithm algorithm = BoostAlgorithm::GradientBoosting;
    BoostParams params;
    int n_classes = 0;
    std::size_t n_features = 0;
    std::vector<double> base_score;              // log class priors
    std::vector<std::vector<Tree>> rounds;       // rounds[t][k]
    std::vector<double> training_loss_curve;     // initial loss + one entry per round
    std::vector<double> feature_gain;            // accumulated split gain per feature

    std::vector<double> raw_scores(const std::vector<std::vector<double>>& columns,
                                   std::size_t row) const {
        std::vector<double> f(base_score);
        const int K = n_classes;
        for (const auto& round : rounds) {
            if (algorithm == BoostAlgorithm::GradientBoosting) {
                for (int k = 0; k < K; ++k)
                    f[k] += params.learning_rate * round[k].predict(columns, row);
            } else {
                // LogitBoost symmetric centering of the per-class fits
                std::vector<double> fit(K);
                double mean = 0.0;
                for (int k = 0; k < K; ++k) {
                    fit[k] = round[k].predict(columns, row);
                    mean += fit[k];
                }
                mean /= K;
                for (int k = 0; k < K; ++k)
                    f[k] += params.learning_rate * (double(K - 1) / K) * (fit[k] - mean);
            }
        }
        return f;
    }

    std::vector<double> predict_proba(const std::vector<std::vector<double>>& columns,
                                      std::size_t row) const {
        auto f = raw_scores(columns, row);
        double fmax = *std::max_element(f.begin(), f.end());
        double z = 0.0;
        for (double& v : f) {
            v = std::exp(v - fmax);
            z += v;
        }
        for (double& v : f) v /= z;
        return f;
    }

    // Lowest class index wins ties.
    int predict_class(const std::vector<std::vector<double>>& columns, std::size_t row) const {
        auto p = predict_proba(columns, row);
        return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format_version"] = 1;
        j["algorithm"] = algorithm == BoostAlgorithm::GradientBoosting ? "gradient_boosting"
                                                                       : "logitboost";
        j["n_classes"] = n_classes;
        j["n_features"] = n_features;
        j["learning_rate"] = params.learning_rate;
        j["base_score"] = base_score;
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& round : rounds) {
            nlohmann::json jr = nlohmann::json::array();
            for (const auto& t : round) {
                nlohmann::json jn = nlohmann::json::array();
                for (const auto& n : t.nodes)
                    jn.push_back({{"f", n.feature},
                                  {"t", n.threshold},
                                  {"l", n.left},
                                  {"r", n.right},
                                  {"v", n.value}});
                jr.push_back(jn);
            }
            trees.push_back(jr);
        }
        j["rounds"] = trees;
        return j;
    }

    static BoostedModel from_json(const nlohmann::json& j) {
        if (j.at("format_version").get<int>() != 1)
            throw ConfigError("unsupported model format version");
        BoostedModel m;
        m.algorithm = j.at("algorithm") == "logitboost" ? BoostAlgorithm::LogitBoost
                                                        : BoostAlgorithm::GradientBoosting;
        m.n_classes = j.at("n_classes").get<int>();
        m.n_features = j.at("n_features").get<std::size_t>();
        m.params.learning_rate = j.at("learning_rate").get<double>();
        m.base_score = j.at("base_score").get<std::vector<double>>();
        for (const auto& jr : j.at("rounds")) {
            std::vector<Tree> round;
            for (const auto& jt : jr) {
                Tree t;
                for (const auto& jn : jt) {
                    TreeNode n;
                    n.feature = jn.at("f").get<int>();
                    n.threshold = jn.at("t").get<double>();
                    n.left = jn.at("l").get<int>();
                    n.right = jn.at("r").get<int>();
                    n.value = jn.at("v").get<double>();
                    t.nodes.push_back(n);
                }
                round.push_back(std::move(t));
            }
            m.rounds.push_back(std::move(round));
        }
        m.params.n_rounds = static_cast<int>(m.rounds.size());
        return m;
    }
};

namespace detail {

inline std::vector<double> class_priors(const std::vector<int>& labels, int n_classes) {
    std::vector<double> prior(n_classes, 0.0);
    for (int y : labels) prior[y] += 1.0;
    for (double& p : prior) p /= static_cast<double>(labels.size());
    return prior;
}

inline int distinct_labels(const std::vector<int>& labels) {
    std::vector<int> seen;
    for (int y : labels)
        if (std::find(seen.begin(), seen.end(), y) == seen.end()) seen.push_back(y);
    return static_cast<int>(seen.size());
}

inline double multinomial_loss(const std::vector<std::vector<double>>& f,
                               const std::vector<int>& labels) {
    double loss = 0.0;
    const std::size_t n = labels.size();
    const std::size_t K = f.size();
    for (std::size_t i = 0; i < n; ++i) {
        double fmax = f[0][i];
        for (std::size_t k = 1; k < K; ++k) fmax = std::max(fmax, f[k][i]);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(f[k][i] - fmax);
        loss += std::log(z) - (f[labels[i]][i] - fmax);
    }
    return loss / static_cast<double>(n);
}

}  // namespace detail

inline BoostedModel train_gradient_boosting(const FeatureMatrix& fm, const BoostParams& params) {
    fm.validate();
    const std::size_t n = fm.n_rows();
    const int K = fm.n_classes;
    if (n == 0) throw DegenerateLabels("empty training set");
    if (detail::distinct_labels(fm.labels) < 2)
        throw DegenerateLabels("gradient boosting needs at least two classes");

    BoostedModel model;
    model.algorithm = BoostAlgorithm::GradientBoosting;
    model.params = params;
    model.n_classes = K;
    model.n_features = fm.n_features();
    model.feature_gain.assign(fm.n_features(), 0.0);

    auto prior = detail::class_priors(fm.labels, K);
    model.base_score.resize(K);
    for (int k = 0; k < K; ++k)
        model.base_score[k] = std::log(std::max(prior[k], 1e-12));

    std::vector<std::vector<double>> f(K, std::vector<double>(n));
    for (int k = 0; k < K; ++k)
        std::fill(f[k].begin(), f[k].end(), model.base_score[k]);

    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::vector<double> unit_weight(n, 1.0);
    TreeParams tp;
    tp.max_depth = params.max_depth;

    model.training_loss_curve.push_back(detail::multinomial_loss(f, fm.labels));

    std::vector<double> residual(n);
    std::vector<std::vector<double>> p(K, std::vector<double>(n));
    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double fmax = f[0][i];
            for (int k = 1; k < K; ++k) fmax = std::max(fmax, f[k][i]);
            double z = 0.0;
            for (int k = 0; k < K; ++k) z += std::exp(f[k][i] - fmax);
            for (int k = 0; k < K; ++k) p[k][i] = std::exp(f[k][i] - fmax) / z;
        }
        std::vector<Tree> trees;
        trees.reserve(K);
        for (int k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < n; ++i)
                residual[i] = (fm.labels[i] == k ? 1.0 : 0.0) - p[k][i];
            // Newton leaf step for the softmax objective, clipped against
            // divergence on pure leaves.
            auto leaf_value = [&](const std::vector<std::size_t>& rows) {
                double num = 0.0, den = 0.0;
                for (std::size_t r : rows) {
                    num += residual[r];
                    den += std::abs(residual[r]) * (1.0 - std::abs(residual[r]));
                }
                if (den < 1e-10) return 0.0;
                double v = (double(K - 1) / K) * num / den;
                return std::clamp(v, -4.0, 4.0);
            };
            Tree tree = fit_regression_tree(fm.columns, all_rows, residual, unit_weight, tp,
                                            leaf_value, &model.feature_gain);
            for (std::size_t i = 0; i < n; ++i)
                f[k][i] += params.learning_rate * tree.predict(fm.columns, i);
            trees.push_back(std::move(tree));
        }
        model.rounds.push_back(std::move(trees));
        model.training_loss_curve.push_back(detail::multinomial_loss(f, fm.labels));
    }
    return model;
}

inline BoostedModel train_logitboost(const FeatureMatrix& fm, const BoostParams& params) {
    fm.validate();
    const std::size_t n = fm.n_rows();
    const int K = fm.n_classes;
    if (n == 0) throw DegenerateLabels("empty training set");
    if (detail::distinct_labels(fm.labels) < 2)
        throw DegenerateLabels("logitboost needs at least two classes");

    constexpr double kMinWeight = 1e-5;
    constexpr double kMaxResponse = 4.0;

    BoostedModel model;
    model.algorithm = BoostAlgorithm::LogitBoost;
    model.params = params;
    model.n_classes = K;
    model.n_features = fm.n_features();
    model.feature_gain.assign(fm.n_features(), 0.0);

    auto prior = detail::class_priors(fm.labels, K);
    model.base_score.resize(K);
    for (int k = 0; k < K; ++k)
        model.base_score[k] = std::log(std::max(prior[k], 1e-12));

    std::vector<std::vector<double>> f(K, std::vector<double>(n));
    for (int k = 0; k < K; ++k)
        std::fill(f[k].begin(), f[k].end(), model.base_score[k]);

    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    TreeParams tp;
    tp.max_depth = params.max_depth;

    model.training_loss_curve.push_back(detail::multinomial_loss(f, fm.labels));

    std::vector<double> z(n), w(n);
    std::vector<std::vector<double>> p(K, std::vector<double>(n));
    std::vector<std::vector<double>> fit(K, std::vector<double>(n));
    for (int round = 0; round < params.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double fmax = f[0][i];
            for (int k = 1; k < K; ++k) fmax = std::max(fmax, f[k][i]);
            double zsum = 0.0;
            for (int k = 0; k < K; ++k) zsum += std::exp(f[k][i] - fmax);
            for (int k = 0; k < K; ++k) p[k][i] = std::exp(f[k][i] - fmax) / zsum;
        }
        std::vector<Tree> trees;
        trees.reserve(K);
        for (int k = 0; k < K; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                double pk = p[k][i];
                double y = fm.labels[i] == k ? 1.0 : 0.0;
                double var = pk * (1.0 - pk);
                w[i] = std::max(var, kMinWeight);
                z[i] = std::clamp((y - pk) / std::max(var, kMinWeight), -kMaxResponse,
                                  kMaxResponse);
            }
            auto leaf_value = [&](const std::vector<std::size_t>& rows) {
                double num = 0.0, den = 0.0;
                for (std::size_t r : rows) {
                    num += w[r] * z[r];
                    den += w[r];
                }
                return den > 0.0 ? num / den : 0.0;
            };
            Tree tree = fit_regression_tree(fm.columns, all_rows, z, w, tp, leaf_value,
                                            &model.feature_gain);
            for (std::size_t i = 0; i < n; ++i) fit[k][i] = tree.predict(fm.columns, i);
            trees.push_back(std::move(tree));
        }
        for (std::size_t i = 0; i < n; ++i) {
            double mean = 0.0;
            for (int k = 0; k < K; ++k) mean += fit[k][i];
            mean /= K;
            for (int k = 0; k < K; ++k)
                f[k][i] += params.learning_rate * (double(K - 1) / K) * (fit[k][i] - mean);
        }
        model.rounds.push_back(std::move(trees));
        model.training_loss_curve.push_back(detail::multinomial_loss(f, fm.labels));
    }
    return model;
}

// Prediction against a row vector with training-time schema checking.
inline std::pair<int, std::vector<double>> predict(const BoostedModel& model,
                                                   const std::vector<double>& row) {
    if (row.size() != model.n_features)
        throw SchemaError("prediction row has " + std::to_string(row.size()) +
                          " features, model expects " + std::to_string(model.n_features));
    std::vector<std::vector<double>> columns(row.size(), std::vector<double>(1));
    for (std::size_t i = 0; i < row.size(); ++i) columns[i][0] = row[i];
    auto proba = model.predict_proba(columns, 0);
    int cls = static_cast<int>(std::max_element(proba.begin(), proba.end()) - proba.begin());
    return {cls, proba};
}

}  // namespace transmode
