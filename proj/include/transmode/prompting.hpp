#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "transmode/common.hpp"
#include "transmode/narrative.hpp"

namespace transmode {

struct Strategy {
    int shots = 0;  // 0 = zero-shot
    bool domain_enhanced = false;

    bool zero_shot() const { return shots == 0; }

    std::string label() const {
        std::string s = shots == 0 ? "zero-shot" : "few-shot-" + std::to_string(shots);
        if (domain_enhanced) s += "+domain";
        return s;
    }
};

struct Demonstration {
    TripNarrative narrative;
    Mode answer = Mode::Excluded;
};

struct PromptSpec {
    std::string system_text;
    std::vector<Demonstration> demonstrations;
    TripNarrative query;
    std::string answer_format_instruction;
    bool inline_demonstrations = false;

    // Chat-message JSON consumed by the completion backend. Demonstrations
    // default to alternating user/assistant turns.
    nlohmann::json to_messages() const {
        nlohmann::json messages = nlohmann::json::array();
        messages.push_back({{"role", "system"}, {"content", system_text}});
        if (inline_demonstrations) {
            std::string body;
            for (const auto& d : demonstrations)
                body += "Example:\n" + d.narrative.text + "\nAnswer: " + mode_name(d.answer) +
                        "\n\n";
            body += query.text + "\n\n" + answer_format_instruction;
            messages.push_back({{"role", "user"}, {"content", body}});
        } else {
            for (const auto& d : demonstrations) {
                messages.push_back({{"role", "user"}, {"content", d.narrative.text}});
                messages.push_back({{"role", "assistant"}, {"content", mode_name(d.answer)}});
            }
            messages.push_back(
                {{"role", "user"}, {"content", query.text + "\n\n" + answer_format_instruction}});
        }
        return messages;
    }

    std::string serialized() const { return to_messages().dump(); }
};

struct DomainKnowledge {
    std::map<Mode, std::string> mode_definitions;
    std::vector<std::string> decision_steps;   // exactly three
    std::vector<std::string> feature_priority;  // ascending mean rank

    void validate() const {
        for (Mode m : all_modes())
            if (!mode_definitions.count(m))
                throw ConfigError("domain knowledge missing definition for " + mode_name(m));
        if (decision_steps.size() != 3)
            throw ConfigError("domain knowledge requires exactly three decision steps");
    }
};

inline std::string display_feature_name(const std::string& feature) {
    static const std::map<std::string, std::string> names = {
        {"age", "age"},
        {"gender", "gender"},
        {"has_license", "driving license status"},
        {"employed", "employment status"},
        {"household_size", "household size"},
        {"vehicle_count", "number of household vehicles"},
        {"income_bracket", "household income"},
        {"home_ownership", "homeownership"},
        {"trip_purpose", "trip purpose"},
        {"distance_miles", "trip distance"},
        {"duration_minutes", "travel time"},
        {"urban_rural", "urban or rural location"},
        {"rail_available", "rail transit availability"},
        {"msa_population_bracket", "MSA population size"},
        {"gas_price_cents", "gasoline price"},
    };
    auto it = names.find(feature);
    return it != names.end() ? it->second : feature;
}

inline DomainKnowledge default_domain_knowledge(std::vector<std::string> feature_priority) {
    DomainKnowledge dk;
    dk.mode_definitions = {
        {Mode::Car, "A private passenger automobile such as a sedan, coupe, or hatchback; "
                    "does not include vans, SUVs, crossovers, or pickup trucks."},
        {Mode::Van, "A minivan or full-size van used to carry passengers."},
        {Mode::SuvCrossover, "A sport utility vehicle or crossover with a raised chassis and "
                             "an enclosed cargo area."},
        {Mode::PickupTruck, "A light-duty truck with an open cargo bed behind the cab."},
        {Mode::SchoolBus, "A bus operated to carry students to or from school or "
                          "school-related activities."},
        {Mode::Walk, "Traveling on foot for the entire trip."},
    };
    std::string order;
    for (const auto& f : feature_priority) {
        if (!order.empty()) order += ", ";
        order += display_feature_name(f);
    }
    dk.decision_steps = {
        "Feasibility Check: compute the required travel speed as distance divided by time, "
        "and eliminate modes that are physically infeasible at that speed.",
        "Contextual Analysis: evaluate the trip against the factors in this order of "
        "importance: " + order + ".",
        "Mode Selection: integrate the evaluated factors and choose the single most practical "
        "mode, respecting domain constraints such as School bus only for school-related "
        "trips.",
    };
    dk.feature_priority = std::move(feature_priority);
    return dk;
}

// ---- demonstration selection ----------------------------------------------

// One example per mode first, extra slots by largest-remainder mode frequency;
// with fewer slots than modes, the most frequent modes are covered first.
inline std::vector<Demonstration> select_demonstrations(
    const Dataset& train, std::size_t k, std::uint64_t seed,
    const NarrativeTemplate& tmpl = NarrativeTemplate::default_template()) {
    if (train.size() == 0) throw SizeError("cannot select demonstrations from empty train set");
    if (k > train.size())
        throw SizeError("requested " + std::to_string(k) + " demonstrations from " +
                        std::to_string(train.size()) + " training records");

    std::map<Mode, std::vector<std::size_t>> by_mode;
    for (std::size_t i = 0; i < train.records.size(); ++i)
        by_mode[train.records[i].observed_mode].push_back(i);

    std::vector<Mode> modes;
    for (const auto& [m, idxs] : by_mode) modes.push_back(m);
    // descending frequency, canonical order on ties
    std::stable_sort(modes.begin(), modes.end(), [&](Mode a, Mode b) {
        return by_mode[a].size() > by_mode[b].size();
    });

    std::vector<std::size_t> per_mode(modes.size(), 0);
    if (k >= modes.size()) {
        std::vector<double> shares;
        for (Mode m : modes) shares.push_back(static_cast<double>(by_mode[m].size()));
        auto extra = largest_remainder(shares, k - modes.size());
        for (std::size_t i = 0; i < modes.size(); ++i) per_mode[i] = 1 + extra[i];
    } else {
        for (std::size_t i = 0; i < k; ++i) per_mode[i] = 1;
    }

    Rng rng(seed);
    std::vector<Demonstration> demos;
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        auto pool = by_mode[modes[mi]];
        deterministic_shuffle(pool, rng);
        std::size_t take = std::min(per_mode[mi], pool.size());
        for (std::size_t j = 0; j < take; ++j) {
            const auto& r = train.records[pool[j]];
            demos.push_back({encode_trip(r, tmpl), r.observed_mode});
        }
    }
    deterministic_shuffle(demos, rng);
    return demos;
}

// ---- prompt assembly -------------------------------------------------------

inline PromptSpec build_prompt(const Strategy& strategy, std::vector<Demonstration> demos,
                               TripNarrative query,
                               const std::optional<DomainKnowledge>& dk = std::nullopt) {
    if (strategy.domain_enhanced && !dk)
        throw ConfigError("domain-enhanced strategy requires domain knowledge");
    if (strategy.zero_shot() && !demos.empty())
        throw ConfigError("zero-shot prompt cannot carry demonstrations");
    if (!strategy.zero_shot() && demos.size() != static_cast<std::size_t>(strategy.shots))
        throw ConfigError("demonstration count does not match strategy");
    for (const auto& d : demos)
        if (d.narrative.record_id == query.record_id)
            throw ConfigError("query record leaked into demonstrations");

    PromptSpec prompt;
    prompt.system_text =
        "You are a transportation analyst. Given a description of a traveler and a trip, "
        "predict the travel mode the traveler will choose.";
    if (strategy.domain_enhanced) {
        dk->validate();
        std::string& s = prompt.system_text;
        s += "\n\nMode Definitions:\n";
        for (Mode m : all_modes())
            s += "- " + mode_name(m) + ": " + dk->mode_definitions.at(m) + "\n";
        s += "\nFollow this three-step decision process:\n";
        for (std::size_t i = 0; i < dk->decision_steps.size(); ++i)
            s += "Step " + std::to_string(i + 1) + ": " + dk->decision_steps[i] + "\n";
    }
    prompt.demonstrations = std::move(demos);
    prompt.query = std::move(query);
    prompt.answer_format_instruction =
        "Answer with exactly one of the following mode names as the final line of your reply: "
        "Car, Van, SUV/Crossover, Pickup truck, School bus, Walk.";
    return prompt;
}

// ---- reply parsing ---------------------------------------------------------

namespace detail {

inline bool word_boundary_match(const std::string& haystack, const std::string& needle) {
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !is_word(haystack[pos - 1]);
        std::size_t end = pos + needle.size();
        bool right_ok = end == haystack.size() || !is_word(haystack[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace detail

// Scans the final non-empty line for exactly one mode mention, canonical
// names and common synonyms included.
inline Mode parse_prediction(const std::string& reply) {
    std::string line;
    std::size_t end = reply.size();
    while (end > 0) {
        std::size_t start = reply.find_last_of('\n', end - 1);
        std::size_t begin = start == std::string::npos ? 0 : start + 1;
        line = trim(reply.substr(begin, end - begin));
        if (!line.empty()) break;
        if (begin == 0) break;
        end = begin - 1;
    }
    if (line.empty()) throw PredictionParseError("empty reply", reply);

    std::string lower = to_lower(line);
    static const std::vector<std::pair<std::string, Mode>> patterns = {
        {"suv/crossover", Mode::SuvCrossover}, {"suv", Mode::SuvCrossover},
        {"crossover", Mode::SuvCrossover},     {"pickup truck", Mode::PickupTruck},
        {"pickup", Mode::PickupTruck},         {"school bus", Mode::SchoolBus},
        {"automobile", Mode::Car},             {"car", Mode::Car},
        {"van", Mode::Van},                    {"walk", Mode::Walk},
    };
    std::vector<Mode> matched;
    for (const auto& [pattern, mode] : patterns) {
        if (detail::word_boundary_match(lower, pattern) &&
            std::find(matched.begin(), matched.end(), mode) == matched.end())
            matched.push_back(mode);
    }
    if (matched.size() == 1) return matched.front();
    if (matched.empty())
        throw PredictionParseError("no mode name in reply line: " + line, reply);
    throw PredictionParseError("ambiguous mode names in reply line: " + line, reply);
}

}  // namespace transmode
