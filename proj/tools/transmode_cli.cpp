#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "transmode/transmode.hpp"

namespace {

transmode::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw transmode::ConfigError("cannot open config file: " + path);
    return transmode::ExperimentConfig::from_json(nlohmann::json::parse(in));
}

transmode::Dataset load_csv(const std::string& path) {
    auto [ds, report] = transmode::load_records(path, transmode::ColumnMapping::identity());
    if (report.rejected > 0)
        std::cerr << "note: " << report.rejected << " rows rejected at load\n";
    return ds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"travel mode prediction workbench"};
    app.require_subcommand(1);

    // generate
    auto* generate = app.add_subcommand("generate", "write a synthetic survey CSV");
    std::string gen_out = "survey.csv";
    std::size_t gen_n = 1000;
    std::uint64_t gen_seed = 1;
    generate->add_option("--out", gen_out, "output CSV path");
    generate->add_option("--n", gen_n, "number of records");
    generate->add_option("--seed", gen_seed, "generator seed");

    // filter
    auto* filter = app.add_subcommand("filter", "apply consistency filters to a survey CSV");
    std::string filter_in, filter_out = "filtered.csv", filter_log;
    filter->add_option("--in", filter_in, "input CSV")->required();
    filter->add_option("--out", filter_out, "filtered CSV path");
    filter->add_option("--log", filter_log, "filter log (line JSON) path");

    // select-features
    auto* select = app.add_subcommand("select-features",
                                      "rank features by ensemble mean rank");
    std::string sel_in, sel_out = "feature_ranking.json";
    std::size_t sel_k = 15;
    std::uint64_t sel_seed = 1;
    select->add_option("--in", sel_in, "input CSV (already filtered)")->required();
    select->add_option("--out", sel_out, "ranking JSON path");
    select->add_option("--k", sel_k, "number of features to select");
    select->add_option("--seed", sel_seed, "selector seed");

    // encode
    auto* encode = app.add_subcommand("encode", "render trip narratives as line JSON");
    std::string enc_in, enc_out = "narratives.jsonl", enc_template;
    encode->add_option("--in", enc_in, "input CSV")->required();
    encode->add_option("--out", enc_out, "narratives JSONL path");
    encode->add_option("--template", enc_template, "narrative template file");

    // run
    auto* run = app.add_subcommand("run", "run the experiment grid from a config file");
    std::string run_config;
    std::string run_backend;
    bool run_offline = false;
    std::uint64_t run_seed = 0;
    bool run_seed_set = false;
    run->add_option("--config", run_config, "experiment config (JSON)")->required();
    run->add_option("--backend", run_backend, "backend override: network or mock");
    run->add_flag("--offline", run_offline, "forbid network access; fail on cache miss");
    run->add_option("--seed", run_seed, "master seed override")
        ->each([&](const std::string&) { run_seed_set = true; });

    // report
    auto* report = app.add_subcommand("report", "render comparison tables from results");
    std::string report_dir;
    bool report_strict = false;
    report->add_option("--results", report_dir, "experiment output directory")->required();
    report->add_flag("--strict", report_strict, "missing cells are an error");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            transmode::SyntheticSpec spec;
            spec.n = gen_n;
            spec.seed = gen_seed;
            auto ds = transmode::generate_synthetic(spec);
            std::ofstream out(gen_out);
            transmode::write_csv(ds, out);
            std::cout << "wrote " << ds.size() << " records to " << gen_out << "\n";
        } else if (*filter) {
            auto ds = load_csv(filter_in);
            std::size_t before = ds.size();
            ds = transmode::speed_consistency_filter(ds);
            ds = transmode::sociodemographic_filter(ds);
            ds = transmode::restrict_modes(ds);
            std::ofstream out(filter_out);
            transmode::write_csv(ds, out);
            if (!filter_log.empty()) {
                std::ofstream log(filter_log);
                ds.dump_filter_log(log);
            }
            std::cout << "kept " << ds.size() << " of " << before << " records\n";
        } else if (*select) {
            auto ds = load_csv(sel_in);
            ds = transmode::restrict_modes(ds);
            auto fm = transmode::build_feature_matrix(ds);
            std::vector<transmode::ImportanceScore> scores;
            scores.push_back(transmode::univariate_importance(fm));
            transmode::LassoConfig lasso;
            lasso.seed = sel_seed;
            scores.push_back(transmode::lasso_importance(fm, lasso));
            transmode::ForestConfig forest;
            forest.seed = sel_seed;
            scores.push_back(transmode::forest_importance(fm, forest));
            transmode::BoostParams boost;
            boost.n_rounds = 30;
            boost.seed = sel_seed;
            scores.push_back(transmode::boosting_importance(fm, boost));
            auto ranking = transmode::aggregate_mean_rank(
                scores, std::min(sel_k, fm.n_features()));
            std::ofstream out(sel_out);
            out << ranking.to_json().dump(2) << "\n";
            std::cout << "selected:";
            for (const auto& f : ranking.selected) std::cout << ' ' << f;
            std::cout << "\n";
        } else if (*encode) {
            auto ds = load_csv(enc_in);
            auto tmpl = enc_template.empty()
                            ? transmode::NarrativeTemplate::default_template()
                            : transmode::NarrativeTemplate::load(enc_template);
            std::vector<transmode::TripNarrative> narratives;
            for (const auto& r : ds.records)
                narratives.push_back(transmode::encode_trip(r, tmpl));
            std::ofstream out(enc_out);
            transmode::dump_narratives(narratives, out);
            std::cout << "wrote " << narratives.size() << " narratives to " << enc_out << "\n";
        } else if (*run) {
            auto cfg = load_config(run_config);
            if (run_seed_set) cfg.seed = run_seed;
            if (run_offline)
                cfg.backend = transmode::BackendKind::Offline;
            else if (run_backend == "mock")
                cfg.backend = transmode::BackendKind::Mock;
            else if (run_backend == "network")
                cfg.backend = transmode::BackendKind::Network;
            else if (!run_backend.empty())
                throw transmode::ConfigError("unknown backend: " + run_backend);
            transmode::run_experiment(cfg);
            std::cout << "results written to " << cfg.output_dir.string() << "\n";
        } else if (*report) {
            transmode::ReportOptions options;
            options.strict = report_strict;
            bool ok = transmode::emit_report(report_dir, std::cout, options);
            if (!ok) {
                std::cerr << "error: report incomplete in strict mode\n";
                return 2;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
