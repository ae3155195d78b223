#include <doctest.h>

#include <cmath>

#include "transmode/baselines.hpp"

using namespace transmode;

namespace {

FeatureMatrix make_matrix(std::vector<std::vector<double>> columns, std::vector<int> labels,
                          int n_classes) {
    FeatureMatrix fm;
    for (std::size_t j = 0; j < columns.size(); ++j)
        fm.add_column("f" + std::to_string(j), std::move(columns[j]), false);
    fm.labels = std::move(labels);
    fm.n_classes = n_classes;
    return fm;
}

FeatureMatrix random_matrix(Rng& rng, std::size_t n, std::size_t p, int n_classes) {
    std::vector<std::vector<double>> columns(p, std::vector<double>(n));
    for (auto& col : columns)
        for (auto& v : col) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i)
        labels[i] = static_cast<int>(uniform_index(rng, n_classes));
    // guarantee at least two classes
    labels[0] = 0;
    labels[1] = 1;
    return make_matrix(std::move(columns), std::move(labels), n_classes);
}

// Exhaustive stump search over all midpoint thresholds: unit-weight SSE gain,
// computed directly from the definition.
struct StumpOracle {
    double threshold = 0.0;
    double gain = 0.0;
    bool found = false;
};

StumpOracle exhaustive_stump(const std::vector<double>& x, const std::vector<double>& target) {
    auto sse = [&](const std::vector<std::size_t>& rows) {
        if (rows.empty()) return 0.0;
        double mean = 0.0;
        for (std::size_t r : rows) mean += target[r];
        mean /= rows.size();
        double s = 0.0;
        for (std::size_t r : rows) s += (target[r] - mean) * (target[r] - mean);
        return s;
    };
    std::vector<std::size_t> all(x.size());
    std::iota(all.begin(), all.end(), 0);
    double parent = sse(all);
    std::vector<double> values(x);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    StumpOracle best;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        double threshold = 0.5 * (values[i] + values[i + 1]);
        std::vector<std::size_t> left, right;
        for (std::size_t r = 0; r < x.size(); ++r)
            (x[r] <= threshold ? left : right).push_back(r);
        double gain = parent - sse(left) - sse(right);
        if (!best.found || gain > best.gain + 1e-12) {
            best.threshold = threshold;
            best.gain = gain;
            best.found = true;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("training loss is monotone non-increasing for both algorithms") {
    Rng rng(5150);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 20 + uniform_index(rng, 30);
        std::size_t p = 2 + uniform_index(rng, 4);
        int K = 2 + static_cast<int>(uniform_index(rng, 3));
        auto fm = random_matrix(rng, n, p, K);
        BoostParams params;
        params.n_rounds = 12;
        params.max_depth = 2;
        for (auto algorithm : {BoostAlgorithm::GradientBoosting, BoostAlgorithm::LogitBoost}) {
            auto model = algorithm == BoostAlgorithm::GradientBoosting
                             ? train_gradient_boosting(fm, params)
                             : train_logitboost(fm, params);
            REQUIRE(model.training_loss_curve.size() == 13);
            for (std::size_t t = 0; t + 1 < model.training_loss_curve.size(); ++t)
                CHECK(model.training_loss_curve[t + 1] <= model.training_loss_curve[t] + 1e-9);
        }
    }
}

TEST_CASE("separable toy set reaches training accuracy 1.0 within 50 rounds") {
    // three well-separated clusters on one feature
    std::vector<double> x;
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) {
        x.push_back(0.0 + 0.05 * i);
        y.push_back(0);
        x.push_back(5.0 + 0.05 * i);
        y.push_back(1);
        x.push_back(10.0 + 0.05 * i);
        y.push_back(2);
    }
    auto fm = make_matrix({x}, y, 3);
    BoostParams params;
    params.n_rounds = 50;
    params.max_depth = 2;
    for (auto algorithm : {BoostAlgorithm::GradientBoosting, BoostAlgorithm::LogitBoost}) {
        auto model = algorithm == BoostAlgorithm::GradientBoosting
                         ? train_gradient_boosting(fm, params)
                         : train_logitboost(fm, params);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < fm.n_rows(); ++i)
            if (model.predict_class(fm.columns, i) == fm.labels[i]) ++correct;
        CHECK(correct == fm.n_rows());
    }
}

TEST_CASE("depth-1 single-round model matches the exhaustive stump oracle") {
    std::vector<double> x = {0.3, 1.1, 2.4, 3.0, 4.7, 5.2, 6.6, 7.1};
    std::vector<int> y = {0, 0, 0, 1, 0, 1, 1, 1};
    auto fm = make_matrix({x}, y, 2);

    BoostParams params;
    params.n_rounds = 1;
    params.max_depth = 1;
    params.learning_rate = 1.0;
    auto model = train_gradient_boosting(fm, params);
    REQUIRE(model.rounds.size() == 1);

    // residuals after the prior-only model: y_k - prior_k
    auto prior = detail::class_priors(y, 2);
    for (int k = 0; k < 2; ++k) {
        std::vector<double> residual(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            residual[i] = (y[i] == k ? 1.0 : 0.0) - prior[k];
        auto oracle = exhaustive_stump(x, residual);
        REQUIRE(oracle.found);

        const Tree& tree = model.rounds[0][k];
        REQUIRE(tree.nodes[0].feature == 0);
        CHECK(tree.nodes[0].threshold == doctest::Approx(oracle.threshold).epsilon(1e-12));

        // leaf values follow the Newton formula on the oracle partition
        for (int side = 0; side < 2; ++side) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                bool left = x[i] <= oracle.threshold;
                if ((side == 0) != left) continue;
                num += residual[i];
                den += std::abs(residual[i]) * (1.0 - std::abs(residual[i]));
            }
            double expected = std::clamp(0.5 * num / den, -4.0, 4.0);
            int node = side == 0 ? tree.nodes[0].left : tree.nodes[0].right;
            CHECK(tree.nodes[node].value == doctest::Approx(expected).epsilon(1e-9));
        }
    }
}

TEST_CASE("logitboost matches a six-point three-round hand trace within 1e-6") {
    // binary problem on one feature; the trace below follows the published
    // update rules with an independent weighted-stump fit
    std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    std::vector<int> y = {0, 0, 1, 0, 1, 1};
    const int K = 2;
    const double lr = 0.5;

    auto fm = make_matrix({x}, y, K);
    BoostParams params;
    params.n_rounds = 3;
    params.max_depth = 1;
    params.learning_rate = lr;
    auto model = train_logitboost(fm, params);

    // --- independent trace ---------------------------------------------
    auto stump_fit = [&](const std::vector<double>& z, const std::vector<double>& w) {
        // weighted SSE split with the same midpoint candidates; returns the
        // fitted value per point (weighted mean of its side), or the global
        // weighted mean when no split improves
        auto wmean = [&](auto pred) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                if (pred(i)) {
                    num += w[i] * z[i];
                    den += w[i];
                }
            return den > 0 ? num / den : 0.0;
        };
        auto wsse = [&](auto pred) {
            double mean = wmean(pred);
            double s = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i)
                if (pred(i)) s += w[i] * (z[i] - mean) * (z[i] - mean);
            return s;
        };
        double parent = wsse([](std::size_t) { return true; });
        double best_gain = 0.0, best_threshold = 0.0;
        bool found = false;
        for (std::size_t i = 0; i + 1 < x.size(); ++i) {
            double threshold = 0.5 * (x[i] + x[i + 1]);
            double gain = parent - wsse([&](std::size_t r) { return x[r] <= threshold; }) -
                          wsse([&](std::size_t r) { return x[r] > threshold; });
            if (gain > best_gain + 1e-12) {
                best_gain = gain;
                best_threshold = threshold;
                found = true;
            }
        }
        std::vector<double> fitted(x.size());
        if (!found) {
            double mean = wmean([](std::size_t) { return true; });
            std::fill(fitted.begin(), fitted.end(), mean);
            return fitted;
        }
        double left = wmean([&](std::size_t r) { return x[r] <= best_threshold; });
        double right = wmean([&](std::size_t r) { return x[r] > best_threshold; });
        for (std::size_t i = 0; i < x.size(); ++i)
            fitted[i] = x[i] <= best_threshold ? left : right;
        return fitted;
    };

    std::vector<std::vector<double>> f(K, std::vector<double>(x.size(), std::log(0.5)));
    for (int round = 0; round < 3; ++round) {
        std::vector<std::vector<double>> p(K, std::vector<double>(x.size()));
        for (std::size_t i = 0; i < x.size(); ++i) {
            double e0 = std::exp(f[0][i]), e1 = std::exp(f[1][i]);
            p[0][i] = e0 / (e0 + e1);
            p[1][i] = e1 / (e0 + e1);
        }
        std::vector<std::vector<double>> fit(K);
        for (int k = 0; k < K; ++k) {
            std::vector<double> z(x.size()), w(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) {
                double pk = p[k][i];
                double yk = y[i] == k ? 1.0 : 0.0;
                double var = std::max(pk * (1.0 - pk), 1e-5);
                w[i] = var;
                z[i] = std::clamp((yk - pk) / var, -4.0, 4.0);
            }
            fit[k] = stump_fit(z, w);
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            double mean = (fit[0][i] + fit[1][i]) / 2.0;
            for (int k = 0; k < K; ++k)
                f[k][i] += lr * 0.5 * (fit[k][i] - mean);
        }
    }

    for (std::size_t i = 0; i < x.size(); ++i) {
        double e0 = std::exp(f[0][i]), e1 = std::exp(f[1][i]);
        std::vector<double> expected = {e0 / (e0 + e1), e1 / (e0 + e1)};
        auto got = model.predict_proba(fm.columns, i);
        CHECK(std::abs(got[0] - expected[0]) < 1e-6);
        CHECK(std::abs(got[1] - expected[1]) < 1e-6);
    }
}

TEST_CASE("zero rounds reduces to class priors") {
    Rng rng(9);
    auto fm = random_matrix(rng, 40, 3, 4);
    BoostParams params;
    params.n_rounds = 0;
    auto prior = detail::class_priors(fm.labels, 4);
    for (auto algorithm : {BoostAlgorithm::GradientBoosting, BoostAlgorithm::LogitBoost}) {
        auto model = algorithm == BoostAlgorithm::GradientBoosting
                         ? train_gradient_boosting(fm, params)
                         : train_logitboost(fm, params);
        auto proba = model.predict_proba(fm.columns, 0);
        for (int k = 0; k < 4; ++k) CHECK(proba[k] == doctest::Approx(prior[k]).epsilon(1e-9));
    }
}

TEST_CASE("probabilities are a distribution and training is deterministic") {
    Rng rng(31);
    auto fm = random_matrix(rng, 60, 4, 3);
    BoostParams params;
    params.n_rounds = 10;
    auto a = train_gradient_boosting(fm, params);
    auto b = train_gradient_boosting(fm, params);
    for (std::size_t i = 0; i < fm.n_rows(); ++i) {
        auto pa = a.predict_proba(fm.columns, i);
        double sum = 0.0;
        for (double v : pa) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pa == b.predict_proba(fm.columns, i));
    }
}

TEST_CASE("degenerate labels are rejected") {
    auto fm = make_matrix({{1.0, 2.0, 3.0}}, {1, 1, 1}, 3);
    BoostParams params;
    CHECK_THROWS_AS(train_gradient_boosting(fm, params), DegenerateLabels);
    CHECK_THROWS_AS(train_logitboost(fm, params), DegenerateLabels);
}

TEST_CASE("serialization round trip preserves predictions") {
    Rng rng(123);
    auto fm = random_matrix(rng, 50, 4, 3);
    BoostParams params;
    params.n_rounds = 8;
    for (auto algorithm : {BoostAlgorithm::GradientBoosting, BoostAlgorithm::LogitBoost}) {
        auto model = algorithm == BoostAlgorithm::GradientBoosting
                         ? train_gradient_boosting(fm, params)
                         : train_logitboost(fm, params);
        auto restored = BoostedModel::from_json(model.to_json());
        for (std::size_t i = 0; i < fm.n_rows(); ++i)
            CHECK(restored.raw_scores(fm.columns, i) == model.raw_scores(fm.columns, i));
    }
    nlohmann::json bad = {{"format_version", 2}};
    CHECK_THROWS_AS(BoostedModel::from_json(bad), ConfigError);
}

TEST_CASE("row prediction validates the schema") {
    Rng rng(4);
    auto fm = random_matrix(rng, 30, 3, 2);
    BoostParams params;
    params.n_rounds = 3;
    auto model = train_gradient_boosting(fm, params);
    auto [cls, proba] = predict(model, {0.1, 0.2, 0.3});
    CHECK(cls >= 0);
    CHECK(proba.size() == 2);
    CHECK_THROWS_AS(predict(model, {0.1, 0.2}), SchemaError);
}
