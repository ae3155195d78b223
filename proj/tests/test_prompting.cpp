#include <doctest.h>

#include <set>

#include "transmode/prompting.hpp"
#include "transmode/synthetic.hpp"

using namespace transmode;

namespace {

Dataset train_set() {
    SyntheticSpec spec;
    spec.n = 400;
    spec.seed = 55;
    return generate_synthetic(spec);
}

TripNarrative query_narrative() {
    TripRecord r;
    r.trip_id = "query-1";
    r.age = 30;
    r.gender = Gender::Male;
    r.has_license = true;
    r.employed = true;
    r.household_size = 2;
    r.vehicle_count = 1;
    r.income_bracket = 5;
    r.home_ownership = HomeOwnership::Rented;
    r.trip_purpose = "work";
    r.distance_miles = 6.0;
    r.duration_minutes = 15.0;
    r.msa_population_bracket = 4;
    r.gas_price_cents = 380;
    r.is_driver = true;
    r.observed_mode = Mode::Car;
    return encode_trip(r);
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
    std::size_t count = 0, pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

}  // namespace

TEST_CASE("strategy labels") {
    CHECK(Strategy{0, false}.label() == "zero-shot");
    CHECK(Strategy{3, false}.label() == "few-shot-3");
    CHECK(Strategy{6, true}.label() == "few-shot-6+domain");
    CHECK(Strategy{0, true}.label() == "zero-shot+domain");
    CHECK(Strategy{0, false}.zero_shot());
    CHECK(!Strategy{1, false}.zero_shot());
}

TEST_CASE("zero-shot prompts carry no demonstrations") {
    auto prompt = build_prompt(Strategy{0, false}, {}, query_narrative());
    auto messages = prompt.to_messages();
    REQUIRE(messages.size() == 2);
    CHECK(messages[0].at("role") == "system");
    CHECK(messages[1].at("role") == "user");
    std::string user = messages[1].at("content");
    CHECK(user.find(query_narrative().text) != std::string::npos);
    CHECK(user.find(prompt.answer_format_instruction) != std::string::npos);
}

TEST_CASE("few-shot prompts carry exactly k demonstrations") {
    auto train = train_set();
    for (std::size_t k : {1, 3, 6, 10}) {
        auto demos = select_demonstrations(train, k, 7);
        REQUIRE(demos.size() == k);
        auto prompt = build_prompt(Strategy{static_cast<int>(k), false}, demos, query_narrative());
        auto messages = prompt.to_messages();
        // system + k user/assistant pairs + final query
        CHECK(messages.size() == 2 + 2 * k);
        for (std::size_t i = 0; i < k; ++i) {
            CHECK(messages[1 + 2 * i].at("role") == "user");
            CHECK(messages[2 + 2 * i].at("role") == "assistant");
            // each assistant turn is a bare canonical mode name
            CHECK(mode_from_name(messages[2 + 2 * i].at("content").get<std::string>()) !=
                  Mode::Excluded);
        }
    }
}

TEST_CASE("six or more shots cover all six modes") {
    auto train = train_set();
    for (std::size_t k : {6, 9}) {
        auto demos = select_demonstrations(train, k, 3);
        std::set<Mode> covered;
        for (const auto& d : demos) covered.insert(d.answer);
        CHECK(covered.size() == 6);
    }
}

TEST_CASE("fewer shots than modes favor the most frequent modes") {
    auto train = train_set();
    auto counts = train.mode_counts();
    std::vector<Mode> by_freq;
    for (const auto& [m, c] : counts) by_freq.push_back(m);
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [&](Mode a, Mode b) { return counts[a] > counts[b]; });
    auto demos = select_demonstrations(train, 3, 3);
    std::set<Mode> covered;
    for (const auto& d : demos) covered.insert(d.answer);
    CHECK(covered == std::set<Mode>(by_freq.begin(), by_freq.begin() + 3));
}

TEST_CASE("demonstration selection is deterministic and stratified") {
    auto train = train_set();
    auto a = select_demonstrations(train, 8, 17);
    auto b = select_demonstrations(train, 8, 17);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].narrative.record_id == b[i].narrative.record_id);
        CHECK(a[i].answer == b[i].answer);
    }
    // no duplicate records
    std::set<std::string> ids;
    for (const auto& d : a) ids.insert(d.narrative.record_id);
    CHECK(ids.size() == a.size());

    auto c = select_demonstrations(train, 8, 18);
    std::set<std::string> other;
    for (const auto& d : c) other.insert(d.narrative.record_id);
    CHECK(other != ids);

    CHECK_THROWS_AS(select_demonstrations(Dataset{}, 1, 0), SizeError);
    CHECK_THROWS_AS(select_demonstrations(train, train.size() + 1, 0), SizeError);
}

TEST_CASE("domain-enhanced prompts embed definitions, steps, and priorities") {
    std::vector<std::string> priority = {"distance_miles", "vehicle_count", "trip_purpose"};
    auto dk = default_domain_knowledge(priority);
    dk.validate();
    auto prompt = build_prompt(Strategy{0, true}, {}, query_narrative(), dk);
    const std::string& s = prompt.system_text;

    CHECK(s.find("Mode Definitions:") != std::string::npos);
    for (Mode m : all_modes())
        CHECK(s.find("- " + mode_name(m) + ": ") != std::string::npos);
    for (const char* step : {"Step 1: ", "Step 2: ", "Step 3: "})
        CHECK(count_occurrences(s, step) == 1);
    CHECK(s.find("School bus only for school-related trips") != std::string::npos);

    // priority features appear in mean-rank order inside the contextual step
    std::size_t p1 = s.find("trip distance");
    std::size_t p2 = s.find("number of household vehicles");
    std::size_t p3 = s.find("trip purpose");
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p2 != std::string::npos);
    REQUIRE(p3 != std::string::npos);
    CHECK(p1 < p2);
    CHECK(p2 < p3);

    // plain prompts carry none of the scaffolding
    auto plain = build_prompt(Strategy{0, false}, {}, query_narrative());
    CHECK(plain.system_text.find("Mode Definitions:") == std::string::npos);
    CHECK(plain.system_text.find("Step 1") == std::string::npos);
}

TEST_CASE("prompt assembly rejects inconsistent inputs") {
    auto train = train_set();
    auto demos = select_demonstrations(train, 3, 1);
    CHECK_THROWS_AS(build_prompt(Strategy{0, false}, demos, query_narrative()), ConfigError);
    CHECK_THROWS_AS(build_prompt(Strategy{2, false}, demos, query_narrative()), ConfigError);
    CHECK_THROWS_AS(build_prompt(Strategy{0, true}, {}, query_narrative()), ConfigError);

    // query leaking into the demonstrations
    auto leaked = demos;
    leaked[0].narrative.record_id = query_narrative().record_id;
    CHECK_THROWS_AS(build_prompt(Strategy{3, false}, leaked, query_narrative()), ConfigError);

    DomainKnowledge incomplete = default_domain_knowledge({});
    incomplete.decision_steps.pop_back();
    CHECK_THROWS_AS(build_prompt(Strategy{0, true}, {}, query_narrative(), incomplete),
                    ConfigError);
    DomainKnowledge missing_mode = default_domain_knowledge({});
    missing_mode.mode_definitions.erase(Mode::Van);
    CHECK_THROWS_AS(build_prompt(Strategy{0, true}, {}, query_narrative(), missing_mode),
                    ConfigError);
}

TEST_CASE("no prompt contains its query's label as an answer") {
    auto train = train_set();
    auto demos = select_demonstrations(train, 4, 2);
    auto query = query_narrative();
    auto prompt = build_prompt(Strategy{4, false}, demos, query);
    auto messages = prompt.to_messages();
    // the final user turn asks the question without revealing any answer
    std::string final_turn = messages.back().at("content");
    CHECK(messages.back().at("role") == "user");
    CHECK(final_turn.find(query.text) != std::string::npos);
    CHECK(final_turn.find("Answer: ") == std::string::npos);
}

TEST_CASE("inline demonstration rendering") {
    auto train = train_set();
    auto demos = select_demonstrations(train, 2, 2);
    auto prompt = build_prompt(Strategy{2, false}, demos, query_narrative());
    prompt.inline_demonstrations = true;
    auto messages = prompt.to_messages();
    REQUIRE(messages.size() == 2);
    std::string body = messages[1].at("content");
    CHECK(count_occurrences(body, "Example:\n") == 2);
    CHECK(count_occurrences(body, "Answer: ") == 2);
}

TEST_CASE("prediction parsing accepts canonical names and synonyms") {
    CHECK(parse_prediction("Car") == Mode::Car);
    CHECK(parse_prediction("reasoning...\n\nWalk\n") == Mode::Walk);
    CHECK(parse_prediction("The answer is: Pickup truck") == Mode::PickupTruck);
    CHECK(parse_prediction("pickup") == Mode::PickupTruck);
    CHECK(parse_prediction("SUV/Crossover") == Mode::SuvCrossover);
    CHECK(parse_prediction("An SUV fits best.") == Mode::SuvCrossover);
    CHECK(parse_prediction("a crossover") == Mode::SuvCrossover);
    CHECK(parse_prediction("School bus") == Mode::SchoolBus);
    CHECK(parse_prediction("the automobile") == Mode::Car);
    CHECK(parse_prediction("VAN") == Mode::Van);
    // only the final non-empty line counts
    CHECK(parse_prediction("Could be Walk or Van.\nVan") == Mode::Van);
}

TEST_CASE("prediction parsing rejects junk and ambiguity") {
    CHECK_THROWS_AS(parse_prediction(""), PredictionParseError);
    CHECK_THROWS_AS(parse_prediction("no transport mentioned"), PredictionParseError);
    CHECK_THROWS_AS(parse_prediction("either Car or Walk"), PredictionParseError);
    // word boundaries: substrings of larger words do not match
    CHECK_THROWS_AS(parse_prediction("a minivan or carpool perhaps"), PredictionParseError);
    try {
        parse_prediction("gibberish reply");
        FAIL("expected PredictionParseError");
    } catch (const PredictionParseError& e) {
        CHECK(e.raw_text == "gibberish reply");
    }
}

TEST_CASE("every canonical mode name round-trips through parsing") {
    for (Mode m : all_modes())
        CHECK(parse_prediction("Reasoning first.\n" + mode_name(m)) == m);
}
