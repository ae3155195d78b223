#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "transmode/survey_data.hpp"

namespace transmode {

// Numeric-encoded design matrix shared by the selectors and the baseline
// classifiers. Ordered categoricals keep their ordinal codes; unordered
// categoricals get stable integer codes from closed tables.
struct FeatureMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns;  // one vector per feature
    std::vector<bool> is_categorical;
    std::vector<int> labels;  // class index per row
    int n_classes = 0;

    std::size_t n_rows() const { return labels.size(); }
    std::size_t n_features() const { return columns.size(); }

    void add_column(std::string name, std::vector<double> values, bool categorical) {
        if (!columns.empty() && values.size() != columns.front().size())
            throw SchemaError("feature column length mismatch: " + name);
        names.push_back(std::move(name));
        columns.push_back(std::move(values));
        is_categorical.push_back(categorical);
    }

    void validate() const {
        for (const auto& col : columns) {
            if (col.size() != labels.size())
                throw SchemaError("column length does not match label count");
            for (double v : col)
                if (!std::isfinite(v)) throw SchemaError("non-finite feature value");
        }
    }
};

inline int purpose_code(const std::string& purpose) {
    if (purpose == "work") return 0;
    if (purpose == "shopping") return 1;
    if (purpose == "social") return 2;
    if (purpose == "school") return 3;
    return 4;  // other
}

// The 15 narrative features in their template order.
inline const std::vector<std::string>& survey_feature_names() {
    static const std::vector<std::string> names = {
        "age",           "gender",          "has_license",    "employed",
        "household_size", "vehicle_count",  "income_bracket", "home_ownership",
        "trip_purpose",  "distance_miles",  "duration_minutes", "urban_rural",
        "rail_available", "msa_population_bracket", "gas_price_cents"};
    return names;
}

inline FeatureMatrix build_feature_matrix(const Dataset& ds) {
    FeatureMatrix fm;
    const std::size_t n = ds.size();
    auto col = [&](auto getter) {
        std::vector<double> v;
        v.reserve(n);
        for (const auto& r : ds.records) v.push_back(static_cast<double>(getter(r)));
        return v;
    };
    fm.add_column("age", col([](const TripRecord& r) { return r.age; }), false);
    fm.add_column("gender", col([](const TripRecord& r) { return static_cast<int>(r.gender); }),
                  true);
    fm.add_column("has_license", col([](const TripRecord& r) { return r.has_license ? 1 : 0; }),
                  true);
    fm.add_column("employed", col([](const TripRecord& r) { return r.employed ? 1 : 0; }), true);
    fm.add_column("household_size", col([](const TripRecord& r) { return r.household_size; }),
                  false);
    fm.add_column("vehicle_count", col([](const TripRecord& r) { return r.vehicle_count; }), false);
    fm.add_column("income_bracket", col([](const TripRecord& r) { return r.income_bracket; }),
                  false);
    fm.add_column("home_ownership",
                  col([](const TripRecord& r) { return static_cast<int>(r.home_ownership); }),
                  true);
    fm.add_column("trip_purpose",
                  col([](const TripRecord& r) { return purpose_code(r.trip_purpose); }), true);
    fm.add_column("distance_miles", col([](const TripRecord& r) { return r.distance_miles; }),
                  false);
    fm.add_column("duration_minutes", col([](const TripRecord& r) { return r.duration_minutes; }),
                  false);
    fm.add_column("urban_rural",
                  col([](const TripRecord& r) { return r.urban_rural == UrbanRural::Rural ? 1 : 0; }),
                  true);
    fm.add_column("rail_available", col([](const TripRecord& r) { return r.rail_available ? 1 : 0; }),
                  true);
    fm.add_column("msa_population_bracket",
                  col([](const TripRecord& r) { return r.msa_population_bracket; }), false);
    fm.add_column("gas_price_cents", col([](const TripRecord& r) { return r.gas_price_cents; }),
                  false);

    fm.labels.reserve(n);
    for (const auto& r : ds.records) {
        if (r.observed_mode == Mode::Excluded)
            throw SchemaError("excluded mode in feature matrix input");
        fm.labels.push_back(static_cast<int>(r.observed_mode));
    }
    fm.n_classes = kNumModes;
    fm.validate();
    return fm;
}

}  // namespace transmode
