#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <vector>

#include "transmode/survey_data.hpp"

namespace transmode {

struct SyntheticSpec {
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    // National-survey-style shares over the six study modes; renormalized
    // to sum to 1 unless renormalize is disabled.
    std::map<Mode, double> mode_shares = {
        {Mode::Car, 0.379},        {Mode::SuvCrossover, 0.335}, {Mode::PickupTruck, 0.107},
        {Mode::Walk, 0.068},       {Mode::Van, 0.060},          {Mode::SchoolBus, 0.021},
    };
    bool renormalize = true;
};

namespace detail {

inline double uniform_real(Rng& rng, double lo, double hi) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
    return lo + u * (hi - lo);
}

inline int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(hi - lo + 1)));
}

}  // namespace detail

// Draws records with correlated, filter-consistent attributes: walking trips
// are short and slow, school-bus riders are school-age on school trips,
// motorized trips have licensed drivers at plausible speeds.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
    double total = 0.0;
    for (const auto& [m, s] : spec.mode_shares) total += s;
    if (!spec.renormalize && std::abs(total - 1.0) > 1e-9)
        throw ConfigError("mode shares must sum to 1");
    if (total <= 0.0) throw ConfigError("mode shares must be positive");

    std::vector<Mode> modes;
    std::vector<double> shares;
    for (const auto& [m, s] : spec.mode_shares) {
        if (s < 0.0) throw ConfigError("negative mode share");
        modes.push_back(m);
        shares.push_back(s);
    }
    auto counts = largest_remainder(shares, spec.n);

    Rng rng(spec.seed);
    Dataset ds;
    ds.provenance = "synthetic(seed=" + std::to_string(spec.seed) + ")";
    std::size_t serial = 0;
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        for (std::size_t c = 0; c < counts[mi]; ++c) {
            TripRecord r;
            char id[32];
            std::snprintf(id, sizeof(id), "syn-%06zu", serial++);
            r.trip_id = id;
            r.observed_mode = modes[mi];

            int g = detail::uniform_int(rng, 0, 9);
            r.gender = g < 5 ? Gender::Female : (g < 9 ? Gender::Male : Gender::OtherUnknown);
            r.household_size = detail::uniform_int(rng, 1, 6);
            r.income_bracket = detail::uniform_int(rng, 1, 11);
            r.home_ownership = static_cast<HomeOwnership>(detail::uniform_int(rng, 0, 3));
            r.urban_rural =
                detail::uniform_int(rng, 0, 3) == 0 ? UrbanRural::Rural : UrbanRural::Urban;
            r.msa_population_bracket = detail::uniform_int(rng, 1, 5);
            r.rail_available = r.urban_rural == UrbanRural::Urban && detail::uniform_int(rng, 0, 2) == 0;
            r.gas_price_cents = std::floor(detail::uniform_real(rng, 300.0, 500.0));

            switch (modes[mi]) {
                case Mode::Walk: {
                    r.age = detail::uniform_int(rng, 18, 75);
                    r.has_license = detail::uniform_int(rng, 0, 1) == 1;
                    r.employed = detail::uniform_int(rng, 0, 1) == 1;
                    r.is_driver = false;
                    r.vehicle_count = 0;
                    r.distance_miles = detail::uniform_real(rng, 0.3, 0.9);
                    double speed = detail::uniform_real(rng, 2.0, 4.5);
                    r.duration_minutes = 60.0 * r.distance_miles / speed;
                    static const char* purposes[] = {"shopping", "social", "other"};
                    r.trip_purpose = purposes[detail::uniform_int(rng, 0, 2)];
                    break;
                }
                case Mode::SchoolBus: {
                    r.age = detail::uniform_int(rng, 6, 17);
                    r.has_license = false;
                    r.employed = false;
                    r.is_driver = false;
                    r.vehicle_count = detail::uniform_int(rng, 0, 2);
                    r.trip_purpose = "school";
                    r.distance_miles = detail::uniform_real(rng, 1.0, 8.0);
                    double speed = detail::uniform_real(rng, 10.0, 30.0);
                    r.duration_minutes = 60.0 * r.distance_miles / speed;
                    r.companion_count = detail::uniform_int(rng, 1, 4);
                    break;
                }
                default: {  // private vehicle modes
                    r.age = detail::uniform_int(rng, 18, 80);
                    r.has_license = true;
                    r.employed = detail::uniform_int(rng, 0, 3) > 0;
                    r.is_driver = true;
                    r.vehicle_count = detail::uniform_int(rng, 1, 3);
                    static const char* purposes[] = {"work", "shopping", "social", "other"};
                    r.trip_purpose = purposes[detail::uniform_int(rng, 0, 3)];
                    r.distance_miles = detail::uniform_real(rng, 1.0, 40.0);
                    double speed = detail::uniform_real(rng, 15.0, 60.0);
                    r.duration_minutes = 60.0 * r.distance_miles / speed;
                    break;
                }
            }
            ds.records.push_back(std::move(r));
        }
    }
    return ds;
}

inline void write_csv(const Dataset& ds, std::ostream& os) {
    os << "trip_id,age,gender,has_license,employed,household_size,vehicle_count,"
          "income_bracket,home_ownership,trip_purpose,distance_miles,duration_minutes,"
          "urban_rural,msa_population_bracket,rail_available,gas_price_cents,is_driver,"
          "companion_count,observed_mode\n";
    for (const auto& r : ds.records) {
        os << r.trip_id << ',' << r.age << ','
           << (r.gender == Gender::Female ? "female"
                                          : r.gender == Gender::Male ? "male" : "other")
           << ',' << (r.has_license ? 1 : 0) << ',' << (r.employed ? 1 : 0) << ','
           << r.household_size << ',' << r.vehicle_count << ',' << r.income_bracket << ','
           << detail::ownership_code(r.home_ownership) << ',' << r.trip_purpose << ',';
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,", r.distance_miles, r.duration_minutes);
        os << buf << (r.urban_rural == UrbanRural::Rural ? "rural" : "urban") << ','
           << r.msa_population_bracket << ',' << (r.rail_available ? 1 : 0) << ','
           << r.gas_price_cents << ',' << (r.is_driver ? 1 : 0) << ',';
        if (r.companion_count) os << *r.companion_count;
        os << ',' << mode_name(r.observed_mode) << "\n";
    }
}

}  // namespace transmode
