#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "transmode/feature_matrix.hpp"
#include "transmode/survey_data.hpp"

namespace transmode {

struct TripNarrative {
    std::string text;
    std::string record_id;
    std::vector<std::string> features_used;
};

// Plain-text template with {placeholder} slots. The shipped default renders
// the standard narrative wording; alternates can be loaded from a file for
// ablation without code changes.
struct NarrativeTemplate {
    std::string text;

    static NarrativeTemplate default_template() {
        return {
            "Consider a {age}-year-old {gender} who is {license_phrase} and is "
            "{employment_phrase}. {subject_is} living in a household with {household_size} "
            "{people_word}, and {vehicle_count} {vehicle_word}, with a household income of "
            "{income_bracket}, in a home that is {ownership_phrase}. {subject_is} traveling "
            "for {trip_purpose}, for a distance of {distance_miles} miles, with an expected "
            "travel time of {duration_minutes} minutes. {subject_lives} in "
            "{urban_rural_phrase}, with {rail_phrase}, in an MSA of {msa_bracket}, where the "
            "gas price is ${gas_price_dollars} per gallon. What is the most likely "
            "transportation mode {subject} would choose for this trip?"};
    }

    static NarrativeTemplate load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open narrative template: " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
        if (text.empty()) throw ConfigError("empty narrative template: " + path);
        return {text};
    }
};

namespace detail {

// Round half-up to `decimals` places; trailing ".0" dropped for decimals = 1.
inline std::string format_fixed(double value, int decimals, bool drop_trailing_zero) {
    double scale = std::pow(10.0, decimals);
    double rounded = std::floor(value * scale + 0.5) / scale;
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(decimals);
    ss << rounded;
    std::string out = ss.str();
    if (drop_trailing_zero) {
        while (out.find('.') != std::string::npos && out.back() == '0') out.pop_back();
        if (!out.empty() && out.back() == '.') out.pop_back();
    }
    return out;
}

}  // namespace detail

// One rendering slot per selected feature plus the connective pronoun slots.
inline std::map<std::string, std::string> narrative_slots(const TripRecord& record) {
    std::map<std::string, std::string> slots;
    slots["age"] = std::to_string(record.age);
    slots["gender"] = gender_noun(record.gender);
    slots["license_phrase"] = record.has_license ? "a driver" : "not a driver";
    slots["employment_phrase"] = record.employed ? "employed" : "not employed";
    slots["household_size"] = std::to_string(record.household_size);
    slots["people_word"] = record.household_size == 1 ? "person" : "people";
    slots["vehicle_count"] = std::to_string(record.vehicle_count);
    slots["vehicle_word"] = record.vehicle_count == 1 ? "vehicle" : "vehicles";
    slots["income_bracket"] = format_bracket(record.income_bracket, income_bracket_table());
    slots["ownership_phrase"] = ownership_phrase(record.home_ownership);
    slots["trip_purpose"] = record.trip_purpose;
    slots["distance_miles"] = detail::format_fixed(record.distance_miles, 1, true);
    slots["duration_minutes"] = detail::format_fixed(record.duration_minutes, 1, true);
    slots["urban_rural_phrase"] =
        record.urban_rural == UrbanRural::Urban ? "an urban area" : "a rural area";
    slots["rail_phrase"] =
        record.rail_available ? "access to rail transit" : "no access to rail transit";
    slots["msa_bracket"] = format_bracket(record.msa_population_bracket, msa_population_table());
    slots["gas_price_dollars"] = detail::format_fixed(record.gas_price_cents / 100.0, 2, false);
    switch (record.gender) {
        case Gender::Female:
            slots["subject"] = "she";
            slots["subject_is"] = "She is";
            slots["subject_lives"] = "She lives";
            break;
        case Gender::Male:
            slots["subject"] = "he";
            slots["subject_is"] = "He is";
            slots["subject_lives"] = "He lives";
            break;
        case Gender::OtherUnknown:
            slots["subject"] = "they";
            slots["subject_is"] = "They are";
            slots["subject_lives"] = "They live";
            break;
    }
    return slots;
}

inline std::string render_narrative(const NarrativeTemplate& tmpl,
                                    const std::map<std::string, std::string>& slots) {
    std::string out;
    const std::string& t = tmpl.text;
    std::size_t i = 0;
    while (i < t.size()) {
        if (t[i] == '{') {
            std::size_t end = t.find('}', i);
            if (end == std::string::npos) throw ConfigError("unterminated placeholder in template");
            std::string name = t.substr(i + 1, end - i - 1);
            auto it = slots.find(name);
            if (it == slots.end())
                throw EncodingError("missing value for narrative slot '" + name + "'");
            out += it->second;
            i = end + 1;
        } else {
            out.push_back(t[i++]);
        }
    }
    return out;
}

inline TripNarrative encode_trip(const TripRecord& record,
                                 const NarrativeTemplate& tmpl = NarrativeTemplate::default_template()) {
    TripNarrative narrative;
    narrative.record_id = record.trip_id;
    narrative.text = render_narrative(tmpl, narrative_slots(record));
    narrative.features_used = survey_feature_names();
    return narrative;
}

inline void dump_narratives(const std::vector<TripNarrative>& narratives, std::ostream& os) {
    for (const auto& n : narratives)
        os << nlohmann::json{{"trip_id", n.record_id}, {"text", n.text}}.dump() << "\n";
}

}  // namespace transmode
