#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace transmode {

// ---- error types ----------------------------------------------------------

struct ParseFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateLabels : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EncodingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownCode : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PredictionParseError : std::runtime_error {
    PredictionParseError(const std::string& msg, std::string raw)
        : std::runtime_error(msg), raw_text(std::move(raw)) {}
    std::string raw_text;
};
struct CredentialError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RequestTimeout : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyEvaluation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- travel modes ---------------------------------------------------------

enum class Mode : int {
    Car = 0,
    Van = 1,
    SuvCrossover = 2,
    PickupTruck = 3,
    SchoolBus = 4,
    Walk = 5,
    Excluded = 6,
};

inline constexpr int kNumModes = 6;

inline const std::vector<Mode>& all_modes() {
    static const std::vector<Mode> modes = {Mode::Car,         Mode::Van,
                                            Mode::SuvCrossover, Mode::PickupTruck,
                                            Mode::SchoolBus,    Mode::Walk};
    return modes;
}

inline std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Car: return "Car";
        case Mode::Van: return "Van";
        case Mode::SuvCrossover: return "SUV/Crossover";
        case Mode::PickupTruck: return "Pickup truck";
        case Mode::SchoolBus: return "School bus";
        case Mode::Walk: return "Walk";
        case Mode::Excluded: return "Excluded";
    }
    return "Excluded";
}

inline Mode mode_from_name(std::string_view name) {
    for (Mode m : all_modes())
        if (name == mode_name(m)) return m;
    return Mode::Excluded;
}

// ---- string helpers -------------------------------------------------------

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// ---- deterministic hashing ------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Seeded RNG; mt19937_64 output is identical on every platform.
using Rng = std::mt19937_64;

// Uniform integer in [0, n) independent of library distribution internals.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    if (n == 0) throw SizeError("uniform_index: empty range");
    std::uint64_t limit = ~0ull - (~0ull % n);
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
}

template <typename T>
void deterministic_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

// Largest-remainder allocation of `total` slots by `shares` (need not be
// normalized). Ties broken by lower index.
inline std::vector<std::size_t> largest_remainder(const std::vector<double>& shares,
                                                  std::size_t total) {
    double sum = 0.0;
    for (double s : shares) sum += s;
    std::vector<std::size_t> alloc(shares.size(), 0);
    if (sum <= 0.0) return alloc;
    std::vector<double> remainder(shares.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < shares.size(); ++i) {
        double exact = shares[i] / sum * static_cast<double>(total);
        alloc[i] = static_cast<std::size_t>(exact);
        remainder[i] = exact - static_cast<double>(alloc[i]);
        assigned += alloc[i];
    }
    std::vector<std::size_t> order(shares.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return remainder[a] > remainder[b];
    });
    for (std::size_t i = 0; assigned < total && i < order.size(); ++i, ++assigned)
        ++alloc[order[i]];
    return alloc;
}

}  // namespace transmode
