#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "transmode/code_tables.hpp"
#include "transmode/common.hpp"

namespace transmode {

// ---- record model ---------------------------------------------------------

struct TripRecord {
    std::string trip_id;
    int age = 0;
    Gender gender = Gender::OtherUnknown;
    bool has_license = false;
    bool employed = false;
    int household_size = 1;
    int vehicle_count = 0;
    int income_bracket = 1;
    HomeOwnership home_ownership = HomeOwnership::Other;
    std::string trip_purpose;
    double distance_miles = 0.0;
    double duration_minutes = 0.0;
    UrbanRural urban_rural = UrbanRural::Urban;
    int msa_population_bracket = 1;
    bool rail_available = false;
    double gas_price_cents = 0.0;
    bool is_driver = false;
    std::optional<int> companion_count;  // absent when the survey lacks the column
    Mode observed_mode = Mode::Excluded;

    double speed_mph() const { return 60.0 * distance_miles / duration_minutes; }
};

struct FilterEvent {
    std::string trip_id;
    std::string rule;
    std::string detail;

    nlohmann::json to_json() const {
        return {{"trip_id", trip_id}, {"rule", rule}, {"detail", detail}};
    }
};

struct Dataset {
    std::vector<TripRecord> records;
    std::string provenance;
    std::vector<FilterEvent> filter_log;

    std::size_t size() const { return records.size(); }

    std::vector<std::string> trip_ids() const {
        std::vector<std::string> ids;
        ids.reserve(records.size());
        for (const auto& r : records) ids.push_back(r.trip_id);
        return ids;
    }

    std::map<Mode, std::size_t> mode_counts() const {
        std::map<Mode, std::size_t> counts;
        for (const auto& r : records) ++counts[r.observed_mode];
        return counts;
    }

    void dump_filter_log(std::ostream& os) const {
        for (const auto& ev : filter_log) os << ev.to_json().dump() << "\n";
    }
};

struct LoadReport {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::vector<FilterEvent> rejections;
};

// ---- CSV loading ----------------------------------------------------------

// Maps logical field names to CSV column headers; identity by default.
struct ColumnMapping {
    std::map<std::string, std::string> columns;

    static ColumnMapping identity() {
        ColumnMapping m;
        for (const char* f :
             {"trip_id", "age", "gender", "has_license", "employed", "household_size",
              "vehicle_count", "income_bracket", "home_ownership", "trip_purpose",
              "distance_miles", "duration_minutes", "urban_rural", "msa_population_bracket",
              "rail_available", "gas_price_cents", "is_driver", "observed_mode"})
            m.columns[f] = f;
        m.columns["companion_count"] = "companion_count";  // optional column
        return m;
    }

    std::string column_for(const std::string& field) const {
        auto it = columns.find(field);
        if (it == columns.end())
            throw SchemaError("column mapping missing field: " + field);
        return it->second;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    return cells;
}

inline bool parse_bool(const std::string& raw) {
    std::string v = to_lower(trim(raw));
    if (v == "1" || v == "true" || v == "yes" || v == "y") return true;
    if (v == "0" || v == "false" || v == "no" || v == "n") return false;
    throw ParseFailure("not a boolean: " + raw);
}

inline int parse_int(const std::string& raw) {
    std::size_t pos = 0;
    std::string v = trim(raw);
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw ParseFailure("not an integer: " + raw);
    return out;
}

inline double parse_real(const std::string& raw) {
    std::size_t pos = 0;
    std::string v = trim(raw);
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw ParseFailure("not a number: " + raw);
    return out;
}

inline Gender parse_gender(const std::string& raw) {
    std::string v = to_lower(trim(raw));
    if (v == "female" || v == "f") return Gender::Female;
    if (v == "male" || v == "m") return Gender::Male;
    return Gender::OtherUnknown;
}

inline HomeOwnership parse_ownership(const std::string& raw) {
    std::string v = to_lower(trim(raw));
    if (v == "owned_mortgage") return HomeOwnership::OwnedMortgage;
    if (v == "owned_outright") return HomeOwnership::OwnedOutright;
    if (v == "rented") return HomeOwnership::Rented;
    return HomeOwnership::Other;
}

inline std::string ownership_code(HomeOwnership o) {
    switch (o) {
        case HomeOwnership::OwnedMortgage: return "owned_mortgage";
        case HomeOwnership::OwnedOutright: return "owned_outright";
        case HomeOwnership::Rented: return "rented";
        case HomeOwnership::Other: return "other";
    }
    return "other";
}

}  // namespace detail

inline std::pair<Dataset, LoadReport> load_records(const std::string& path,
                                                   const ColumnMapping& mapping) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open survey file: " + path);

    std::string header_line;
    if (!std::getline(in, header_line))
        throw SchemaError("survey file has no header row: " + path);
    auto headers = detail::split_csv_line(header_line);
    std::map<std::string, std::size_t> col_index;
    for (std::size_t i = 0; i < headers.size(); ++i) col_index[trim(headers[i])] = i;

    auto required_index = [&](const std::string& field) {
        auto col = mapping.column_for(field);
        auto it = col_index.find(col);
        if (it == col_index.end())
            throw SchemaError("missing required column '" + col + "' for field " + field);
        return it->second;
    };

    std::map<std::string, std::size_t> idx;
    for (const char* f :
         {"trip_id", "age", "gender", "has_license", "employed", "household_size",
          "vehicle_count", "income_bracket", "home_ownership", "trip_purpose",
          "distance_miles", "duration_minutes", "urban_rural", "msa_population_bracket",
          "rail_available", "gas_price_cents", "is_driver", "observed_mode"})
        idx[f] = required_index(f);

    // companion_count is optional both in the mapping and in the file
    std::optional<std::size_t> companion_idx;
    if (auto it = mapping.columns.find("companion_count"); it != mapping.columns.end()) {
        if (auto cit = col_index.find(it->second); cit != col_index.end())
            companion_idx = cit->second;
    }

    Dataset ds;
    ds.provenance = path;
    LoadReport report;

    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = detail::split_csv_line(line);
        auto cell = [&](const std::string& field) -> const std::string& {
            std::size_t i = idx.at(field);
            if (i >= cells.size())
                throw ParseFailure("row too short for column " + field);
            return cells[i];
        };
        std::string trip_id = "line-" + std::to_string(line_no);
        try {
            TripRecord r;
            r.trip_id = trim(cell("trip_id"));
            if (!r.trip_id.empty()) trip_id = r.trip_id;
            r.age = detail::parse_int(cell("age"));
            if (r.age < 0) throw ParseFailure("negative age");
            r.gender = detail::parse_gender(cell("gender"));
            r.has_license = detail::parse_bool(cell("has_license"));
            r.employed = detail::parse_bool(cell("employed"));
            r.household_size = detail::parse_int(cell("household_size"));
            if (r.household_size < 1) throw ParseFailure("household_size < 1");
            r.vehicle_count = detail::parse_int(cell("vehicle_count"));
            if (r.vehicle_count < 0) throw ParseFailure("negative vehicle_count");
            r.income_bracket = detail::parse_int(cell("income_bracket"));
            format_bracket(r.income_bracket, income_bracket_table());
            r.home_ownership = detail::parse_ownership(cell("home_ownership"));
            r.trip_purpose = to_lower(trim(cell("trip_purpose")));
            r.distance_miles = detail::parse_real(cell("distance_miles"));
            r.duration_minutes = detail::parse_real(cell("duration_minutes"));
            if (r.distance_miles <= 0.0) throw ParseFailure("distance_miles must be > 0");
            if (r.duration_minutes <= 0.0) throw ParseFailure("duration_minutes must be > 0");
            std::string ur = to_lower(trim(cell("urban_rural")));
            r.urban_rural = ur == "rural" ? UrbanRural::Rural : UrbanRural::Urban;
            r.msa_population_bracket = detail::parse_int(cell("msa_population_bracket"));
            format_bracket(r.msa_population_bracket, msa_population_table());
            r.rail_available = detail::parse_bool(cell("rail_available"));
            r.gas_price_cents = detail::parse_real(cell("gas_price_cents"));
            if (r.gas_price_cents <= 0.0) throw ParseFailure("gas_price_cents must be > 0");
            r.is_driver = detail::parse_bool(cell("is_driver"));
            if (companion_idx && *companion_idx < cells.size() &&
                !trim(cells[*companion_idx]).empty())
                r.companion_count = detail::parse_int(cells[*companion_idx]);
            r.observed_mode = mode_from_name(trim(cell("observed_mode")));
            ds.records.push_back(std::move(r));
            ++report.accepted;
        } catch (const std::exception& e) {
            ++report.rejected;
            report.rejections.push_back({trip_id, "ParseFailure", e.what()});
        }
    }
    return {std::move(ds), std::move(report)};
}

// ---- consistency filters --------------------------------------------------

struct SpeedLimits {
    double walk_max_mph = 5.0;
    double motorized_min_mph = 2.0;
    double motorized_max_mph = 90.0;
};

inline Dataset speed_consistency_filter(const Dataset& ds, const SpeedLimits& limits = {}) {
    Dataset out;
    out.provenance = ds.provenance;
    out.filter_log = ds.filter_log;
    for (const auto& r : ds.records) {
        double speed = r.speed_mph();
        if (r.observed_mode == Mode::Walk && speed > limits.walk_max_mph) {
            out.filter_log.push_back({r.trip_id, "SpeedConsistency",
                                      "walking speed " + std::to_string(speed) + " mph exceeds " +
                                          std::to_string(limits.walk_max_mph)});
            continue;
        }
        bool motorized = r.observed_mode != Mode::Walk && r.observed_mode != Mode::Excluded;
        if (motorized && (speed < limits.motorized_min_mph || speed > limits.motorized_max_mph)) {
            out.filter_log.push_back({r.trip_id, "SpeedConsistency",
                                      "motorized speed " + std::to_string(speed) +
                                          " mph outside plausible range"});
            continue;
        }
        out.records.push_back(r);
    }
    return out;
}

struct SociodemographicLimits {
    int min_driving_age = 16;
    int min_unaccompanied_transit_age = 10;
};

inline bool is_private_vehicle_mode(Mode m) {
    return m == Mode::Car || m == Mode::Van || m == Mode::SuvCrossover || m == Mode::PickupTruck;
}

inline Dataset sociodemographic_filter(const Dataset& ds,
                                       const SociodemographicLimits& limits = {}) {
    Dataset out;
    out.provenance = ds.provenance;
    out.filter_log = ds.filter_log;
    for (const auto& r : ds.records) {
        if (r.is_driver && r.age < limits.min_driving_age) {
            out.filter_log.push_back({r.trip_id, "Sociodemographic", "underage driver"});
            continue;
        }
        if (r.is_driver && !r.has_license) {
            out.filter_log.push_back({r.trip_id, "Sociodemographic", "non-driver operating vehicle"});
            continue;
        }
        // Unaccompanied-child transit rule only applies when companion data exists.
        if (r.observed_mode == Mode::SchoolBus && r.companion_count &&
            *r.companion_count == 0 && r.age < limits.min_unaccompanied_transit_age) {
            out.filter_log.push_back(
                {r.trip_id, "Sociodemographic", "young child unaccompanied on transit"});
            continue;
        }
        if (is_private_vehicle_mode(r.observed_mode) && !r.is_driver && r.companion_count &&
            *r.companion_count == 0) {
            out.filter_log.push_back(
                {r.trip_id, "Sociodemographic", "private vehicle trip without identified driver"});
            continue;
        }
        out.records.push_back(r);
    }
    return out;
}

inline Dataset restrict_modes(const Dataset& ds) {
    Dataset out;
    out.provenance = ds.provenance;
    out.filter_log = ds.filter_log;
    for (const auto& r : ds.records) {
        if (r.observed_mode == Mode::Excluded) {
            out.filter_log.push_back({r.trip_id, "ModeRestriction", "mode outside study set"});
            continue;
        }
        out.records.push_back(r);
    }
    return out;
}

// ---- stratified split -----------------------------------------------------

struct SplitSpec {
    std::size_t sample_size = 100;
    std::uint64_t seed = 0;
};

struct Split {
    Dataset train;
    Dataset test;
};

// Test set preserves the full-dataset mode distribution via largest-remainder
// allocation; membership within a mode is a seeded draw. Same seed, same split.
inline Split stratified_split(const Dataset& ds, const SplitSpec& spec) {
    if (spec.sample_size > ds.size())
        throw SizeError("sample_size " + std::to_string(spec.sample_size) +
                        " exceeds dataset size " + std::to_string(ds.size()));

    std::map<Mode, std::vector<std::size_t>> by_mode;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        by_mode[ds.records[i].observed_mode].push_back(i);

    std::vector<Mode> modes;
    std::vector<double> shares;
    for (const auto& [m, idxs] : by_mode) {
        modes.push_back(m);
        shares.push_back(static_cast<double>(idxs.size()));
    }
    auto alloc = largest_remainder(shares, spec.sample_size);

    Rng rng(spec.seed);
    std::vector<bool> in_test(ds.size(), false);
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        auto pool = by_mode[modes[mi]];
        std::size_t take = std::min(alloc[mi], pool.size());
        deterministic_shuffle(pool, rng);
        for (std::size_t j = 0; j < take; ++j) in_test[pool[j]] = true;
    }

    Split split;
    split.train.provenance = ds.provenance + "#train";
    split.test.provenance = ds.provenance + "#test";
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        (in_test[i] ? split.test : split.train).records.push_back(ds.records[i]);
    return split;
}

}  // namespace transmode
