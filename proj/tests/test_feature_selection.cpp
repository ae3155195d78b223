#include <doctest.h>

#include <cmath>

#include "transmode/feature_selection.hpp"

using namespace transmode;

namespace {

FeatureMatrix make_matrix(std::vector<std::vector<double>> columns, std::vector<int> labels,
                          int n_classes, std::vector<bool> categorical = {}) {
    FeatureMatrix fm;
    for (std::size_t j = 0; j < columns.size(); ++j)
        fm.add_column("f" + std::to_string(j), std::move(columns[j]),
                      j < categorical.size() && categorical[j]);
    fm.labels = std::move(labels);
    fm.n_classes = n_classes;
    return fm;
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// 3 informative features plus pure-noise features. Each signal column is a
// noisy one-vs-rest indicator for a different class, so no single column
// subsumes the others and every selector must credit all three.
FeatureMatrix planted_signal(std::uint64_t seed, std::size_t n, std::size_t noise_features) {
    Rng rng(seed);
    const int K = 3;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(uniform_index(rng, K));
    std::vector<std::vector<double>> columns;
    for (int s = 0; s < 3; ++s) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i)
            col[i] = (labels[i] == s ? 1.0 : 0.0) + 0.15 * (uniform01(rng) - 0.5);
        columns.push_back(std::move(col));
    }
    for (std::size_t j = 0; j < noise_features; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = uniform01(rng) * 3.0;
        columns.push_back(std::move(col));
    }
    return make_matrix(std::move(columns), std::move(labels), K);
}

}  // namespace

TEST_CASE("ANOVA F statistic matches a hand computation") {
    // two groups: {1, 2, 3} and {5, 6, 7}
    std::vector<double> x = {1, 2, 3, 5, 6, 7};
    std::vector<int> labels = {0, 0, 0, 1, 1, 1};
    // grand mean 4; SSB = 3*(2-4)^2 + 3*(6-4)^2 = 24; SSW = 2 + 2 = 4
    // F = (24/1) / (4/4) = 24
    CHECK(detail::anova_f_statistic(x, labels, 2) == doctest::Approx(24.0).epsilon(1e-12));
    // constant feature scores zero
    CHECK(detail::anova_f_statistic({2, 2, 2, 2}, {0, 0, 1, 1}, 2) == 0.0);
}

TEST_CASE("chi-square statistic matches a hand computation") {
    // 2x2 table: value 0 -> classes {3, 1}, value 1 -> classes {1, 3}
    std::vector<double> x = {0, 0, 0, 0, 1, 1, 1, 1};
    std::vector<int> labels = {0, 0, 0, 1, 0, 1, 1, 1};
    // expected = 2 everywhere; chi2 = 4 * (1)^2/2 = 2
    CHECK(detail::chi_square_statistic(x, labels, 2) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(detail::chi_square_statistic({1, 1, 1, 1}, {0, 0, 1, 1}, 2) == 0.0);
}

TEST_CASE("univariate selector dispatches by feature type") {
    std::vector<double> numeric = {1, 2, 3, 5, 6, 7};
    std::vector<double> categorical = {0, 0, 0, 1, 1, 1};
    std::vector<int> labels = {0, 0, 0, 1, 1, 1};
    auto fm = make_matrix({numeric, categorical}, labels, 2, {false, true});
    auto score = univariate_importance(fm);
    CHECK(score.selector_name == "univariate");
    CHECK(score.scores.at("f0") == doctest::Approx(detail::anova_f_statistic(numeric, labels, 2)));
    CHECK(score.scores.at("f1") ==
          doctest::Approx(detail::chi_square_statistic(categorical, labels, 2)));

    auto degenerate = make_matrix({numeric}, {0, 0, 0, 0, 0, 0}, 2);
    CHECK_THROWS_AS(univariate_importance(degenerate), DegenerateLabels);
}

TEST_CASE("l1 logistic coordinate descent matches a brute-force penalized fit") {
    // single standardized feature, separably-informative labels
    std::vector<double> raw = {-1.5, -1.0, -0.5, 0.5, 1.0, 1.5, -1.2, 1.2};
    std::vector<double> y = {0, 0, 0, 1, 1, 1, 0, 1};
    std::vector<std::size_t> rows(raw.size());
    std::iota(rows.begin(), rows.end(), 0);
    auto std_x = detail::standardize({raw}, rows);

    for (double lambda : {0.3, 0.1, 0.03}) {
        double intercept = 0.0;
        std::vector<double> beta;
        bool converged =
            detail::fit_l1_logistic(std_x.columns, y, lambda, 2000, 1e-10, intercept, beta);
        CHECK(converged);

        // brute force: coarse-to-fine grid over (intercept, beta) on the
        // penalized objective mean_logloss + lambda * |beta|
        auto objective = [&](double b0, double b1) {
            return detail::binary_log_loss(std_x.columns, y, b0, {b1}) + lambda * std::abs(b1);
        };
        // wide first window: small penalties on separable data push beta far out
        double best0 = 0.0, best1 = 0.0, step = 2.0;
        for (int refine = 0; refine < 24; ++refine) {
            double c0 = best0, c1 = best1;
            for (int i = -8; i <= 8; ++i)
                for (int j = -8; j <= 8; ++j) {
                    double b0 = c0 + step * i, b1 = c1 + step * j;
                    if (objective(b0, b1) < objective(best0, best1) - 1e-15) {
                        best0 = b0;
                        best1 = b1;
                    }
                }
            step /= 2.0;
        }
        CHECK(std::abs(beta[0] - best1) < 1e-3);
        CHECK(std::abs(intercept - best0) < 1e-3);
    }
}

TEST_CASE("soft threshold operator") {
    CHECK(detail::soft_threshold(3.0, 1.0) == 2.0);
    CHECK(detail::soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(detail::soft_threshold(0.5, 1.0) == 0.0);
}

TEST_CASE("lasso shrinks noise below signal") {
    auto fm = planted_signal(17, 200, 5);
    LassoConfig cfg;
    cfg.seed = 2;
    auto score = lasso_importance(fm, cfg);
    CHECK(score.selector_name == "lasso");
    double min_signal = std::min({score.scores.at("f0"), score.scores.at("f1"),
                                  score.scores.at("f2")});
    for (std::size_t j = 3; j < fm.n_features(); ++j)
        CHECK(score.scores.at("f" + std::to_string(j)) < min_signal);
}

TEST_CASE("forest importances are normalized and favor signal") {
    auto fm = planted_signal(23, 200, 5);
    ForestConfig cfg;
    cfg.n_trees = 40;
    cfg.seed = 11;
    auto score = forest_importance(fm, cfg);
    double total = 0.0;
    for (const auto& [name, v] : score.scores) {
        CHECK(v >= 0.0);
        total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    double min_signal = std::min({score.scores.at("f0"), score.scores.at("f1"),
                                  score.scores.at("f2")});
    for (std::size_t j = 3; j < fm.n_features(); ++j)
        CHECK(score.scores.at("f" + std::to_string(j)) < min_signal);

    // deterministic under a fixed seed
    auto again = forest_importance(fm, cfg);
    CHECK(again.scores == score.scores);
}

TEST_CASE("boosting importance accumulates split gain on signal features") {
    auto fm = planted_signal(29, 200, 5);
    BoostParams params;
    params.n_rounds = 20;
    auto score = boosting_importance(fm, params);
    double min_signal = std::min({score.scores.at("f0"), score.scores.at("f1"),
                                  score.scores.at("f2")});
    for (std::size_t j = 3; j < fm.n_features(); ++j)
        CHECK(score.scores.at("f" + std::to_string(j)) < min_signal);
}

TEST_CASE("fractional ranks average ties and always sum to p(p+1)/2") {
    ImportanceScore score;
    score.scores = {{"a", 5.0}, {"b", 3.0}, {"c", 3.0}, {"d", 1.0}};
    auto ranks = fractional_ranks(score);
    CHECK(ranks.at("a") == 1.0);
    CHECK(ranks.at("b") == 2.5);
    CHECK(ranks.at("c") == 2.5);
    CHECK(ranks.at("d") == 4.0);

    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        ImportanceScore s;
        std::size_t p = 2 + uniform_index(rng, 12);
        for (std::size_t j = 0; j < p; ++j)
            s.scores["x" + std::to_string(j)] =
                static_cast<double>(uniform_index(rng, 5));  // force ties
        auto r = fractional_ranks(s);
        double sum = 0.0;
        for (const auto& [name, v] : r) sum += v;
        CHECK(sum == doctest::Approx(p * (p + 1) / 2.0).epsilon(1e-12));
    }
}

TEST_CASE("mean-rank aggregation selects by ascending mean rank") {
    ImportanceScore s1{"s1", {{"a", 9.0}, {"b", 5.0}, {"c", 1.0}}, true};
    ImportanceScore s2{"s2", {{"a", 2.0}, {"b", 8.0}, {"c", 1.0}}, true};
    auto ranking = aggregate_mean_rank({s1, s2}, 2);
    // a: ranks 1,2 -> 1.5; b: 2,1 -> 1.5; c: 3,3 -> 3
    CHECK(ranking.mean_rank.at("a") == 1.5);
    CHECK(ranking.mean_rank.at("b") == 1.5);
    CHECK(ranking.mean_rank.at("c") == 3.0);
    // lexicographic tie-break
    CHECK(ranking.selected == std::vector<std::string>{"a", "b"});

    // selector order is irrelevant
    auto flipped = aggregate_mean_rank({s2, s1}, 2);
    CHECK(flipped.mean_rank == ranking.mean_rank);
    CHECK(flipped.selected == ranking.selected);

    // a feature dominating every selector lands at mean rank 1
    ImportanceScore d1{"s1", {{"a", 9.0}, {"b", 5.0}, {"c", 1.0}}, true};
    ImportanceScore d2{"s2", {{"a", 9.0}, {"b", 1.0}, {"c", 5.0}}, true};
    auto dominated = aggregate_mean_rank({d1, d2}, 1);
    CHECK(dominated.mean_rank.at("a") == 1.0);
    CHECK(dominated.selected == std::vector<std::string>{"a"});

    ImportanceScore mismatched{"s3", {{"a", 1.0}, {"z", 2.0}, {"c", 0.5}}, true};
    CHECK_THROWS_AS(aggregate_mean_rank({s1, mismatched}, 2), SchemaError);
    CHECK_THROWS_AS(aggregate_mean_rank({s1, s2}, 4), SchemaError);
    CHECK_THROWS_AS(aggregate_mean_rank({}, 1), SchemaError);
}

TEST_CASE("ranking report serializes selection flags") {
    ImportanceScore s1{"s1", {{"a", 9.0}, {"b", 5.0}, {"c", 1.0}}, true};
    ImportanceScore s2{"s2", {{"a", 8.0}, {"b", 6.0}, {"c", 2.0}}, true};
    auto ranking = aggregate_mean_rank({s1, s2}, 2);
    auto j = ranking.to_json();
    CHECK(j.at("selected") == nlohmann::json({"a", "b"}));
    for (const auto& row : j.at("features")) {
        bool expect = row.at("feature") != "c";
        CHECK(row.at("selected") == expect);
        CHECK(row.at("ranks").size() == 2);
    }
}

TEST_CASE("planted signal recovered by all four selectors") {
    auto fm = planted_signal(101, 250, 17);
    REQUIRE(fm.n_features() == 20);

    std::vector<ImportanceScore> scores;
    scores.push_back(univariate_importance(fm));
    LassoConfig lasso;
    lasso.seed = 1;
    scores.push_back(lasso_importance(fm, lasso));
    ForestConfig forest;
    forest.n_trees = 50;
    forest.seed = 1;
    scores.push_back(forest_importance(fm, forest));
    BoostParams boost;
    boost.n_rounds = 20;
    scores.push_back(boosting_importance(fm, boost));

    for (const auto& score : scores) {
        auto ranks = fractional_ranks(score);
        for (const auto& signal : {"f0", "f1", "f2"})
            CHECK(ranks.at(signal) <= 5.0);
    }
    auto ranking = aggregate_mean_rank(scores, 15);
    for (const auto& signal : {"f0", "f1", "f2"})
        CHECK(std::find(ranking.selected.begin(), ranking.selected.end(), signal) !=
              ranking.selected.end());
    CHECK(select_top_k(ranking) == ranking.selected);
}
