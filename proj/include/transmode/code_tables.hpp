#pragma once

#include <map>
#include <string>

#include "transmode/common.hpp"

namespace transmode {

// Closed code tables for the ordered categorical survey attributes. The
// bracket codes follow the household-survey convention of small positive
// integers; the phrases are what the narrative renderer emits.

using CodeTable = std::map<int, std::string>;

inline const CodeTable& income_bracket_table() {
    static const CodeTable table = {
        {1, "less than $10,000"},
        {2, "$10,000 to $14,999"},
        {3, "$15,000 to $24,999"},
        {4, "$25,000 to $34,999"},
        {5, "$35,000 to $49,999"},
        {6, "$50,000 to $74,999"},
        {7, "$75,000 to $99,999"},
        {8, "$100,000 to $124,999"},
        {9, "$125,000 to $149,999"},
        {10, "$150,000 to $199,999"},
        {11, "$200,000 or more"},
    };
    return table;
}

inline const CodeTable& msa_population_table() {
    static const CodeTable table = {
        {1, "less than 250,000"},
        {2, "250,000 to 499,999"},
        {3, "500,000 to 999,999"},
        {4, "1,000,000 to 2,999,999"},
        {5, "3,000,000 or more"},
    };
    return table;
}

inline std::string format_bracket(int code, const CodeTable& table) {
    auto it = table.find(code);
    if (it == table.end())
        throw UnknownCode("unknown bracket code " + std::to_string(code));
    return it->second;
}

enum class Gender { Female, Male, OtherUnknown };
enum class HomeOwnership { OwnedMortgage, OwnedOutright, Rented, Other };
enum class UrbanRural { Urban, Rural };

inline std::string gender_noun(Gender g) {
    switch (g) {
        case Gender::Female: return "female";
        case Gender::Male: return "male";
        case Gender::OtherUnknown: return "person";
    }
    return "person";
}

inline std::string ownership_phrase(HomeOwnership o) {
    switch (o) {
        case HomeOwnership::OwnedMortgage: return "owned with a mortgage";
        case HomeOwnership::OwnedOutright: return "owned free and clear";
        case HomeOwnership::Rented: return "rented";
        case HomeOwnership::Other: return "occupied under another arrangement";
    }
    return "occupied under another arrangement";
}

}  // namespace transmode
