#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "transmode/baselines.hpp"
#include "transmode/evaluation.hpp"
#include "transmode/feature_selection.hpp"
#include "transmode/llm_backend.hpp"
#include "transmode/narrative.hpp"
#include "transmode/prompting.hpp"
#include "transmode/survey_data.hpp"
#include "transmode/synthetic.hpp"

namespace transmode {

enum class BackendKind { Mock, Network, Offline };

struct RequestBudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    // data source: either a CSV path or a synthetic generator spec
    std::string csv_path;
    ColumnMapping column_mapping = ColumnMapping::identity();
    std::optional<SyntheticSpec> synthetic;

    SpeedLimits speed_limits;
    SociodemographicLimits socio_limits;

    std::size_t feature_k = 15;
    std::vector<Strategy> strategies;
    std::vector<std::string> models;
    std::vector<std::size_t> sample_sizes;
    std::uint64_t seed = 1;

    BackendKind backend = BackendKind::Mock;
    BackendConfig backend_config;
    std::filesystem::path cache_dir;
    std::filesystem::path output_dir;
    std::size_t parallelism = 4;
    bool run_baselines = true;
    int baseline_rounds = 50;
    int baseline_max_depth = 3;
    double baseline_learning_rate = 0.1;
    bool dump_prompts = false;

    // optional cost cap: abort (resumably) once this many live fetches happen
    std::optional<std::size_t> request_budget;

    void validate() const {
        if (strategies.empty()) throw ConfigError("config requires at least one strategy");
        if (models.empty() && !run_baselines)
            throw ConfigError("config requires at least one model or baselines");
        if (sample_sizes.empty()) throw ConfigError("config requires at least one sample size");
        if (output_dir.empty()) throw ConfigError("config requires an output directory");
        if (csv_path.empty() == !synthetic.has_value())
            throw ConfigError("config requires exactly one of csv_path or synthetic spec");
    }

    static ExperimentConfig from_json(const nlohmann::json& j);
};

inline Strategy strategy_from_json(const nlohmann::json& j) {
    Strategy s;
    s.shots = j.value("shots", 0);
    s.domain_enhanced = j.value("domain_enhanced", false);
    if (s.shots < 0) throw ConfigError("strategy shots must be >= 0");
    return s;
}

inline ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    if (j.contains("csv_path")) cfg.csv_path = j.at("csv_path").get<std::string>();
    if (j.contains("column_mapping"))
        for (const auto& [field, col] : j.at("column_mapping").items())
            cfg.column_mapping.columns[field] = col.get<std::string>();
    if (j.contains("synthetic")) {
        SyntheticSpec spec;
        const auto& js = j.at("synthetic");
        spec.n = js.value("n", spec.n);
        spec.seed = js.value("seed", spec.seed);
        if (js.contains("mode_shares")) {
            spec.mode_shares.clear();
            spec.renormalize = false;
            for (const auto& [name, share] : js.at("mode_shares").items()) {
                Mode m = mode_from_name(name);
                if (m == Mode::Excluded) throw ConfigError("unknown mode in shares: " + name);
                spec.mode_shares[m] = share.get<double>();
            }
        }
        cfg.synthetic = spec;
    }
    if (j.contains("filters")) {
        const auto& jf = j.at("filters");
        cfg.speed_limits.walk_max_mph = jf.value("walk_max_mph", cfg.speed_limits.walk_max_mph);
        cfg.speed_limits.motorized_min_mph =
            jf.value("motorized_min_mph", cfg.speed_limits.motorized_min_mph);
        cfg.speed_limits.motorized_max_mph =
            jf.value("motorized_max_mph", cfg.speed_limits.motorized_max_mph);
        cfg.socio_limits.min_driving_age =
            jf.value("min_driving_age", cfg.socio_limits.min_driving_age);
        cfg.socio_limits.min_unaccompanied_transit_age = jf.value(
            "min_unaccompanied_transit_age", cfg.socio_limits.min_unaccompanied_transit_age);
    }
    cfg.feature_k = j.value("feature_k", cfg.feature_k);
    if (j.contains("strategies"))
        for (const auto& js : j.at("strategies")) cfg.strategies.push_back(strategy_from_json(js));
    if (j.contains("models"))
        for (const auto& jm : j.at("models")) cfg.models.push_back(jm.get<std::string>());
    if (j.contains("sample_sizes"))
        for (const auto& js : j.at("sample_sizes")) cfg.sample_sizes.push_back(js.get<std::size_t>());
    cfg.seed = j.value("seed", cfg.seed);
    std::string backend = j.value("backend", "mock");
    if (backend == "mock")
        cfg.backend = BackendKind::Mock;
    else if (backend == "network")
        cfg.backend = BackendKind::Network;
    else if (backend == "offline")
        cfg.backend = BackendKind::Offline;
    else
        throw ConfigError("unknown backend: " + backend);
    if (j.contains("endpoint")) cfg.backend_config.endpoint = j.at("endpoint").get<std::string>();
    if (j.contains("api_key_env"))
        cfg.backend_config.api_key_env = j.at("api_key_env").get<std::string>();
    if (j.contains("cache_dir")) cfg.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    cfg.run_baselines = j.value("run_baselines", cfg.run_baselines);
    cfg.baseline_rounds = j.value("baseline_rounds", cfg.baseline_rounds);
    cfg.baseline_max_depth = j.value("baseline_max_depth", cfg.baseline_max_depth);
    cfg.baseline_learning_rate = j.value("baseline_learning_rate", cfg.baseline_learning_rate);
    cfg.dump_prompts = j.value("dump_prompts", cfg.dump_prompts);
    if (j.contains("request_budget"))
        cfg.request_budget = j.at("request_budget").get<std::size_t>();
    cfg.validate();
    return cfg;
}

struct ResultRow {
    std::string model_id;
    std::string strategy;
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;
    std::string trip_id;
    Mode truth = Mode::Excluded;
    std::optional<Mode> prediction;  // nullopt = invalid prediction
    double latency_ms = 0.0;
    bool cache_hit = false;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"model", model_id},
                            {"strategy", strategy},
                            {"sample_size", sample_size},
                            {"seed", seed},
                            {"trip_id", trip_id},
                            {"truth", mode_name(truth)},
                            {"latency_ms", latency_ms},
                            {"cache_hit", cache_hit}};
        j["prediction"] = prediction ? mode_name(*prediction) : "Invalid";
        return j;
    }
};

namespace detail {

inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag) {
    return master ^ fnv1a64(tag);
}

// Invalid predictions are scored as wrong: they enter the confusion matrix
// as the lowest-index mode that differs from the truth and are counted.
inline EvaluationReport score_rows(const std::vector<ResultRow>& rows) {
    std::vector<Mode> truth, pred;
    std::size_t invalid = 0;
    for (const auto& r : rows) {
        truth.push_back(r.truth);
        if (r.prediction) {
            pred.push_back(*r.prediction);
        } else {
            ++invalid;
            pred.push_back(r.truth == Mode::Car ? Mode::Van : Mode::Car);
        }
    }
    auto report = score(truth, pred);
    report.invalid_prediction_count = invalid;
    return report;
}

}  // namespace detail

// Loads or generates the experiment dataset, applying both consistency
// filters and the study-mode restriction.
inline Dataset prepare_dataset(const ExperimentConfig& cfg) {
    Dataset ds;
    if (cfg.synthetic) {
        ds = generate_synthetic(*cfg.synthetic);
    } else {
        auto [loaded, report] = load_records(cfg.csv_path, cfg.column_mapping);
        ds = std::move(loaded);
        for (const auto& ev : report.rejections) ds.filter_log.push_back(ev);
    }
    ds = speed_consistency_filter(ds, cfg.speed_limits);
    ds = sociodemographic_filter(ds, cfg.socio_limits);
    ds = restrict_modes(ds);
    return ds;
}

class ExperimentRunner {
  public:
    explicit ExperimentRunner(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        if (cfg_.cache_dir.empty()) cfg_.cache_dir = cfg_.output_dir / "cache";
    }

    // Runs the full grid; writes per-cell reports, the results log, and the
    // feature-ranking report under output_dir. Throws RequestBudgetExceeded
    // (resumable) when the live-request cap trips.
    void run() {
        std::filesystem::create_directories(cfg_.output_dir);
        std::filesystem::create_directories(cfg_.cache_dir);
        Dataset ds = prepare_dataset(cfg_);

        std::ofstream results_log(cfg_.output_dir / "results.jsonl", std::ios::app);
        std::atomic<std::size_t> live_requests{0};

        for (std::size_t size : cfg_.sample_sizes) {
            SplitSpec split_spec{size, detail::derive_seed(cfg_.seed, "split:" + std::to_string(size))};
            Split split = stratified_split(ds, split_spec);

            auto ranking = rank_features(split.train);
            {
                std::ofstream out(cfg_.output_dir / ("feature_ranking_" + std::to_string(size) +
                                                     ".json"));
                out << ranking.to_json().dump(2) << "\n";
            }
            DomainKnowledge dk = default_domain_knowledge(ranking.selected);

            std::vector<TripNarrative> test_narratives;
            test_narratives.reserve(split.test.size());
            for (const auto& r : split.test.records) test_narratives.push_back(encode_trip(r));

            for (const auto& model_id : cfg_.models)
                for (const auto& strategy : cfg_.strategies)
                    run_llm_cell(model_id, strategy, size, split, dk, test_narratives,
                                 results_log, live_requests);

            if (cfg_.run_baselines) run_baseline_cells(size, split, results_log);
        }
    }

    FeatureRanking rank_features(const Dataset& train) const {
        FeatureMatrix fm = build_feature_matrix(train);
        std::vector<ImportanceScore> scores;
        scores.push_back(univariate_importance(fm));
        LassoConfig lasso;
        lasso.seed = detail::derive_seed(cfg_.seed, "lasso");
        scores.push_back(lasso_importance(fm, lasso));
        ForestConfig forest;
        forest.n_trees = 50;
        forest.seed = detail::derive_seed(cfg_.seed, "forest");
        scores.push_back(forest_importance(fm, forest));
        BoostParams boost;
        boost.n_rounds = 30;
        boost.seed = detail::derive_seed(cfg_.seed, "boost");
        scores.push_back(boosting_importance(fm, boost));
        std::size_t k = std::min(cfg_.feature_k, fm.n_features());
        return aggregate_mean_rank(scores, k);
    }

  private:
    void write_report(const std::string& model_id, const std::string& strategy_label,
                      std::size_t size, const std::vector<ResultRow>& rows) {
        auto report = detail::score_rows(rows);
        auto dir = cfg_.output_dir / "reports" / std::to_string(size);
        std::filesystem::create_directories(dir);
        std::string file = model_id + "__" + strategy_label + ".json";
        for (char& c : file)
            if (c == '/' || c == ' ') c = '-';
        nlohmann::json j = report.to_json();
        j["model"] = model_id;
        j["strategy"] = strategy_label;
        j["sample_size"] = size;
        std::ofstream out(dir / file);
        out << j.dump(2) << "\n";
    }

    void run_llm_cell(const std::string& model_id, const Strategy& strategy, std::size_t size,
                      const Split& split, const DomainKnowledge& dk,
                      const std::vector<TripNarrative>& test_narratives,
                      std::ofstream& results_log, std::atomic<std::size_t>& live_requests) {
        ModelProfile profile = ModelProfile::for_model(model_id);
        std::uint64_t cell_seed = detail::derive_seed(
            cfg_.seed, "demos:" + model_id + ":" + strategy.label() + ":" + std::to_string(size));

        std::vector<Demonstration> demos;
        if (!strategy.zero_shot())
            demos = select_demonstrations(split.train, strategy.shots, cell_seed);

        std::optional<DomainKnowledge> cell_dk;
        if (strategy.domain_enhanced) cell_dk = dk;

        std::vector<ResultRow> rows(test_narratives.size());
        std::atomic<bool> budget_tripped{false};

        auto fetch_with_budget = [&](const PromptSpec& prompt) -> std::string {
            std::size_t used = live_requests.fetch_add(1) + 1;
            if (cfg_.request_budget && used > *cfg_.request_budget) {
                budget_tripped = true;
                throw RequestBudgetExceeded("request budget exhausted");
            }
            switch (cfg_.backend) {
                case BackendKind::Mock: return mock_complete(prompt);
                case BackendKind::Network: return complete(prompt, profile, cfg_.backend_config);
                case BackendKind::Offline:
                    throw TransportError("offline mode: cache miss for prompt");
            }
            throw ConfigError("unreachable backend kind");
        };

        auto run_one = [&](std::size_t i) {
            const auto& narrative = test_narratives[i];
            PromptSpec prompt = build_prompt(strategy, demos, narrative, cell_dk);
            if (cfg_.dump_prompts) dump_prompt(model_id, strategy, size, prompt);

            auto t0 = std::chrono::steady_clock::now();
            auto result = cached_complete(prompt, profile, cfg_.cache_dir,
                                          [&] { return fetch_with_budget(prompt); });
            ResultRow row;
            row.model_id = model_id;
            row.strategy = strategy.label();
            row.sample_size = size;
            row.seed = cell_seed;
            row.trip_id = narrative.record_id;
            row.truth = split.test.records[i].observed_mode;
            row.cache_hit = result.cache_hit;
            try {
                row.prediction = parse_prediction(result.raw_reply);
            } catch (const PredictionParseError&) {
                // one re-prompt with a format reminder, then score as invalid
                PromptSpec retry = prompt;
                retry.answer_format_instruction +=
                    "\nReminder: your final line must be exactly one mode name.";
                auto retried = cached_complete(retry, profile, cfg_.cache_dir,
                                               [&] { return fetch_with_budget(retry); });
                try {
                    row.prediction = parse_prediction(retried.raw_reply);
                } catch (const PredictionParseError&) {
                    row.prediction = std::nullopt;
                }
            }
            row.latency_ms = std::chrono::duration<double, std::milli>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
            rows[i] = std::move(row);
        };

        try {
            parallel_for_each(test_narratives.size(), cfg_.parallelism, run_one);
        } catch (const RequestBudgetExceeded&) {
            throw RequestBudgetExceeded(
                "request budget exhausted; rerun with the same cache to resume");
        }

        for (const auto& row : rows) results_log << row.to_json().dump() << "\n";
        results_log.flush();
        write_report(model_id, strategy.label(), size, rows);
    }

    void run_baseline_cells(std::size_t size, const Split& split, std::ofstream& results_log) {
        FeatureMatrix train_fm = build_feature_matrix(split.train);
        FeatureMatrix test_fm = build_feature_matrix(split.test);

        BoostParams params;
        params.n_rounds = cfg_.baseline_rounds;
        params.max_depth = cfg_.baseline_max_depth;
        params.learning_rate = cfg_.baseline_learning_rate;
        params.seed = detail::derive_seed(cfg_.seed, "baseline:" + std::to_string(size));

        struct Entry {
            std::string name;
            BoostedModel model;
        };
        std::vector<Entry> entries;
        entries.push_back({"baseline-gradient-boosting", train_gradient_boosting(train_fm, params)});
        entries.push_back({"baseline-logitboost", train_logitboost(train_fm, params)});

        for (const auto& [name, model] : entries) {
            std::vector<ResultRow> rows;
            for (std::size_t i = 0; i < split.test.size(); ++i) {
                ResultRow row;
                row.model_id = name;
                row.strategy = "baseline";
                row.sample_size = size;
                row.seed = params.seed;
                row.trip_id = split.test.records[i].trip_id;
                row.truth = split.test.records[i].observed_mode;
                row.prediction = static_cast<Mode>(model.predict_class(test_fm.columns, i));
                rows.push_back(std::move(row));
            }
            for (const auto& row : rows) results_log << row.to_json().dump() << "\n";
            write_report(name, "baseline", size, rows);
        }
        results_log.flush();
    }

    void dump_prompt(const std::string& model_id, const Strategy& strategy, std::size_t size,
                     const PromptSpec& prompt) {
        auto dir = cfg_.output_dir / "prompts" / std::to_string(size);
        std::filesystem::create_directories(dir);
        std::string file = model_id + "__" + strategy.label() + "__" + prompt.query.record_id +
                           ".json";
        for (char& c : file)
            if (c == '/' || c == ' ') c = '-';
        std::lock_guard lock(dump_mutex_);
        std::ofstream out(dir / file);
        out << prompt.to_messages().dump(2) << "\n";
    }

    ExperimentConfig cfg_;
    std::mutex dump_mutex_;
};

inline void run_experiment(const ExperimentConfig& cfg) { ExperimentRunner(cfg).run(); }

// ---- report rendering ------------------------------------------------------

struct ReportCell {
    std::string model;
    std::string strategy;
    std::size_t sample_size = 0;
    double accuracy = 0.0;
    double f1_macro = 0.0;
    double f1_weighted = 0.0;
};

inline std::vector<ReportCell> load_report_cells(const std::filesystem::path& output_dir) {
    std::vector<ReportCell> cells;
    auto reports_dir = output_dir / "reports";
    if (!std::filesystem::exists(reports_dir)) return cells;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(reports_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        auto j = nlohmann::json::parse(in);
        ReportCell cell;
        cell.model = j.at("model").get<std::string>();
        cell.strategy = j.at("strategy").get<std::string>();
        cell.sample_size = j.at("sample_size").get<std::size_t>();
        cell.accuracy = j.at("accuracy").get<double>();
        cell.f1_macro = j.at("f1_macro").get<double>();
        cell.f1_weighted = j.at("f1_weighted").get<double>();
        cells.push_back(cell);
    }
    return cells;
}

namespace detail {

inline std::string fmt4(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << v;
    return ss.str();
}

inline std::string fmt_pct(double v) {
    std::ostringstream ss;
    ss << std::showpos << std::fixed << std::setprecision(1) << v;
    return ss.str();
}

inline void render_table(std::ostream& os, const std::string& title,
                         const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
    os << title << "\n";
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    auto line = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c)
            os << std::left << std::setw(static_cast<int>(width[c]) + 2) << row[c];
        os << "\n";
    };
    line(header);
    for (const auto& row : rows) line(row);
    os << "\n";
}

}  // namespace detail

struct ReportOptions {
    bool strict = false;  // missing cells become an error instead of a gap
};

// Renders the four comparison tables from the stored per-cell reports.
// Returns false when strict mode found missing cells.
inline bool emit_report(const std::filesystem::path& output_dir, std::ostream& os,
                        const ReportOptions& options = {}) {
    auto cells = load_report_cells(output_dir);
    bool complete = true;

    std::set<std::size_t> sizes;
    std::set<std::string> llm_models;
    for (const auto& c : cells) {
        sizes.insert(c.sample_size);
        if (c.strategy != "baseline") llm_models.insert(c.model);
    }
    auto find_cell = [&](const std::string& model, const std::string& strategy,
                         std::size_t size) -> const ReportCell* {
        for (const auto& c : cells)
            if (c.model == model && c.strategy == strategy && c.sample_size == size) return &c;
        return nullptr;
    };
    auto best_few_shot = [&](const std::string& model, std::size_t size,
                             bool domain) -> const ReportCell* {
        const ReportCell* best = nullptr;
        for (const auto& c : cells) {
            bool is_few = c.strategy.rfind("few-shot", 0) == 0;
            bool is_domain = c.strategy.find("+domain") != std::string::npos;
            if (c.model != model || c.sample_size != size || !is_few || is_domain != domain)
                continue;
            if (!best || c.accuracy > best->accuracy) best = &c;
        }
        return best;
    };

    // (a) baselines vs zero-shot
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : cells)
            if (c.strategy == "baseline")
                rows.push_back({c.model, std::to_string(c.sample_size),
                                detail::fmt4(c.accuracy), detail::fmt4(c.f1_macro),
                                detail::fmt4(c.f1_weighted)});
        for (const auto& model : llm_models)
            for (std::size_t size : sizes) {
                const auto* c = find_cell(model, "zero-shot", size);
                if (!c) continue;
                rows.push_back({model, std::to_string(size), detail::fmt4(c->accuracy),
                                detail::fmt4(c->f1_macro), detail::fmt4(c->f1_weighted)});
            }
        detail::render_table(os, "== Baselines vs zero-shot ==",
                             {"model", "n", "accuracy", "f1_macro", "f1_weighted"}, rows);
    }

    // (b) zero-shot vs best few-shot
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& model : llm_models)
            for (std::size_t size : sizes) {
                const auto* zero = find_cell(model, "zero-shot", size);
                const auto* few = best_few_shot(model, size, false);
                if (!zero || !few) {
                    rows.push_back({model, std::to_string(size), zero ? detail::fmt4(zero->accuracy) : "-",
                                    "-", "-", "-"});
                    complete = false;
                    continue;
                }
                rows.push_back({model, std::to_string(size), detail::fmt4(zero->accuracy),
                                detail::fmt4(few->accuracy), few->strategy,
                                detail::fmt_pct(improvement_percent(zero->accuracy, few->accuracy))});
            }
        detail::render_table(os, "== Zero-shot vs best few-shot ==",
                             {"model", "n", "zero-shot", "best few-shot", "config",
                              "improvement %"},
                             rows);
    }

    // (c) with vs without domain knowledge (accuracy and F1)
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& model : llm_models)
            for (std::size_t size : sizes) {
                const auto* plain = best_few_shot(model, size, false);
                const auto* domain = best_few_shot(model, size, true);
                if (!plain || !domain) continue;
                rows.push_back({model, std::to_string(size), detail::fmt4(plain->accuracy),
                                detail::fmt4(domain->accuracy),
                                detail::fmt_pct(improvement_percent(plain->accuracy,
                                                                    domain->accuracy)),
                                detail::fmt4(plain->f1_macro), detail::fmt4(domain->f1_macro),
                                detail::fmt4(plain->f1_weighted),
                                detail::fmt4(domain->f1_weighted)});
            }
        detail::render_table(os, "== Few-shot with vs without domain knowledge ==",
                             {"model", "n", "acc", "acc+dk", "improvement %", "f1m", "f1m+dk",
                              "f1w", "f1w+dk"},
                             rows);
    }

    // (d) accuracy / F1-macro gap analysis
    {
        std::vector<std::vector<std::string>> rows;
        for (const auto& c : cells) {
            if (c.strategy == "baseline") continue;
            std::string gap = c.accuracy > 0.0
                                  ? detail::fmt4(relative_gap(c.accuracy, c.f1_macro))
                                  : "undefined";
            rows.push_back({c.model, c.strategy, std::to_string(c.sample_size),
                            detail::fmt4(c.accuracy), detail::fmt4(c.f1_macro), gap});
        }
        detail::render_table(os, "== Accuracy vs F1-macro gap ==",
                             {"model", "strategy", "n", "accuracy", "f1_macro", "relative gap"},
                             rows);
    }

    return !options.strict || complete;
}

}  // namespace transmode
