#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "transmode/common.hpp"

namespace transmode {

struct ConfusionMatrix {
    // rows = truth, columns = prediction
    std::array<std::array<std::size_t, kNumModes>, kNumModes> counts{};
    std::size_t n = 0;

    std::size_t trace() const {
        std::size_t t = 0;
        for (int i = 0; i < kNumModes; ++i) t += counts[i][i];
        return t;
    }
};

inline ConfusionMatrix confusion(const std::vector<Mode>& truth, const std::vector<Mode>& pred) {
    if (truth.size() != pred.size())
        throw SchemaError("truth and prediction lists differ in length");
    if (truth.empty()) throw SchemaError("cannot build confusion matrix from empty lists");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == Mode::Excluded || pred[i] == Mode::Excluded)
            throw SchemaError("excluded mode in evaluation input");
        ++cm.counts[static_cast<int>(truth[i])][static_cast<int>(pred[i])];
        ++cm.n;
    }
    return cm;
}

struct ModeMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct EvaluationReport {
    double accuracy = 0.0;
    std::map<Mode, ModeMetrics> per_mode;
    double f1_macro = 0.0;
    double f1_weighted = 0.0;
    double gap_macro = 0.0;  // (accuracy - f1_macro) / accuracy
    std::size_t invalid_prediction_count = 0;

    nlohmann::json to_json() const {
        nlohmann::json per;
        for (const auto& [m, v] : per_mode)
            per[mode_name(m)] = {{"precision", v.precision},
                                 {"recall", v.recall},
                                 {"f1", v.f1},
                                 {"support", v.support}};
        return {{"accuracy", accuracy},
                {"f1_macro", f1_macro},
                {"f1_weighted", f1_weighted},
                {"gap_macro", gap_macro},
                {"invalid_prediction_count", invalid_prediction_count},
                {"per_mode", per}};
    }
};

// Accuracy, per-mode precision/recall/F1, macro and support-weighted F1.
// F1 = 0 on zero denominators; the macro average runs over modes with
// nonzero support in the truth labels.
inline EvaluationReport score(const ConfusionMatrix& cm) {
    if (cm.n == 0) throw EmptyEvaluation("empty confusion matrix");
    EvaluationReport report;
    report.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.n);

    double macro_sum = 0.0;
    std::size_t macro_modes = 0;
    for (int k = 0; k < kNumModes; ++k) {
        std::size_t tp = cm.counts[k][k];
        std::size_t fp = 0, fn = 0, support = 0;
        for (int j = 0; j < kNumModes; ++j) {
            if (j != k) {
                fp += cm.counts[j][k];
                fn += cm.counts[k][j];
            }
            support += cm.counts[k][j];
        }
        ModeMetrics mm;
        mm.support = support;
        mm.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        mm.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        mm.f1 = (mm.precision + mm.recall) > 0.0
                    ? 2.0 * mm.precision * mm.recall / (mm.precision + mm.recall)
                    : 0.0;
        report.per_mode[static_cast<Mode>(k)] = mm;
        if (support > 0) {
            macro_sum += mm.f1;
            ++macro_modes;
            report.f1_weighted += static_cast<double>(support) / cm.n * mm.f1;
        }
    }
    report.f1_macro = macro_modes > 0 ? macro_sum / macro_modes : 0.0;
    report.gap_macro =
        report.accuracy > 0.0 ? (report.accuracy - report.f1_macro) / report.accuracy : 0.0;
    return report;
}

inline EvaluationReport score(const std::vector<Mode>& truth, const std::vector<Mode>& pred) {
    return score(confusion(truth, pred));
}

// ---- gap analysis ----------------------------------------------------------

struct GapEntry {
    std::string key;
    double accuracy = 0.0;
    double f1_macro = 0.0;
    bool defined = true;
    double gap = 0.0;
};

inline double relative_gap(double accuracy, double f1_macro) {
    return (accuracy - f1_macro) / accuracy;
}

inline std::vector<GapEntry> gap_report(
    const std::vector<std::pair<std::string, EvaluationReport>>& reports) {
    std::vector<GapEntry> out;
    for (const auto& [key, report] : reports) {
        GapEntry e;
        e.key = key;
        e.accuracy = report.accuracy;
        e.f1_macro = report.f1_macro;
        if (report.accuracy > 0.0) {
            e.gap = relative_gap(report.accuracy, report.f1_macro);
        } else {
            e.defined = false;
        }
        out.push_back(e);
    }
    return out;
}

inline double improvement_percent(double old_value, double new_value) {
    return (new_value - old_value) / old_value * 100.0;
}

}  // namespace transmode
