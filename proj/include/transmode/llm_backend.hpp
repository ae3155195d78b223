#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "transmode/detail/sha256.hpp"
#include "transmode/prompting.hpp"

namespace transmode {

struct ModelProfile {
    std::string model_id;
    bool supports_temperature = true;
    int max_output_tokens = 1024;
    int request_timeout_s = 120;

    // o-series reasoning models run with fixed sampling parameters.
    static ModelProfile for_model(const std::string& model_id) {
        ModelProfile p;
        p.model_id = model_id;
        p.supports_temperature = !(model_id.rfind("o1", 0) == 0 || model_id.rfind("o3", 0) == 0 ||
                                   model_id.rfind("o4", 0) == 0);
        return p;
    }
};

struct BackendConfig {
    std::string endpoint = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    int max_retries = 5;
    int initial_backoff_ms = 500;
    int backoff_cap_ms = 8000;
    bool sleep_on_retry = true;
};

// Monotone, capped exponential backoff schedule.
inline int backoff_ms(const BackendConfig& cfg, int attempt) {
    long long v = cfg.initial_backoff_ms;
    for (int i = 0; i < attempt && v < cfg.backoff_cap_ms; ++i) v *= 2;
    return static_cast<int>(std::min<long long>(v, cfg.backoff_cap_ms));
}

inline nlohmann::json build_request_body(const PromptSpec& prompt, const ModelProfile& profile) {
    nlohmann::json body;
    body["model"] = profile.model_id;
    body["messages"] = prompt.to_messages();
    body["max_tokens"] = profile.max_output_tokens;
    if (profile.supports_temperature) body["temperature"] = 0;
    return body;
}

inline std::string complete(const PromptSpec& prompt, const ModelProfile& profile,
                            const BackendConfig& cfg = {}) {
    const char* key = std::getenv(cfg.api_key_env.c_str());
    if (!key || std::string(key).empty())
        throw CredentialError("no API key in environment variable " + cfg.api_key_env);

    httplib::Client client(cfg.endpoint);
    client.set_connection_timeout(profile.request_timeout_s, 0);
    client.set_read_timeout(profile.request_timeout_s, 0);
    client.set_bearer_token_auth(key);

    std::string body = build_request_body(prompt, profile).dump();
    std::string last_error = "no attempts made";
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0 && cfg.sleep_on_retry)
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms(cfg, attempt - 1)));
        auto res = client.Post(cfg.path, body, "application/json");
        if (!res) {
            if (res.error() == httplib::Error::ConnectionTimeout ||
                res.error() == httplib::Error::Read)
                last_error = "timeout";
            else
                last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw CredentialError("authentication rejected (HTTP " +
                                  std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("unexpected HTTP " + std::to_string(res->status) + ": " +
                                 res->body);
        auto reply = nlohmann::json::parse(res->body);
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    if (last_error == "timeout") throw RequestTimeout("request timed out after retries");
    throw TransportError("retries exhausted: " + last_error);
}

// ---- durable response cache ------------------------------------------------

inline std::string cache_key(const PromptSpec& prompt, const ModelProfile& profile) {
    nlohmann::json params;
    params["model"] = profile.model_id;
    params["max_tokens"] = profile.max_output_tokens;
    if (profile.supports_temperature) params["temperature"] = 0;
    return detail::sha256_hex(profile.model_id + "\n" + prompt.serialized() + "\n" +
                              params.dump());
}

struct CompletionRecord {
    std::string key;
    std::string model_id;
    std::string request_time;  // ISO-8601 UTC
    std::string raw_reply;
};

namespace detail {

inline std::filesystem::path cache_path(const std::filesystem::path& cache_dir,
                                        const std::string& key) {
    return cache_dir / key.substr(0, 2) / key.substr(2, 2) / (key + ".json");
}

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

struct CacheResult {
    std::string raw_reply;
    bool cache_hit = false;
};

// One file per record under a two-level fan-out; writes are atomic
// (temp file + rename) so interrupted runs can resume.
inline CacheResult cached_complete(const PromptSpec& prompt, const ModelProfile& profile,
                                   const std::filesystem::path& cache_dir,
                                   const std::function<std::string()>& fetch,
                                   std::ostream* warn_log = nullptr) {
    std::string key = cache_key(prompt, profile);
    auto path = detail::cache_path(cache_dir, key);

    if (std::filesystem::exists(path)) {
        try {
            std::ifstream in(path);
            auto j = nlohmann::json::parse(in);
            if (j.at("cache_key").get<std::string>() != key)
                throw ConfigError("cache digest mismatch");
            return {j.at("raw_reply").get<std::string>(), true};
        } catch (const std::exception& e) {
            if (warn_log)
                *warn_log << "warning: discarding corrupt cache entry " << path.string() << " ("
                          << e.what() << ")\n";
            std::filesystem::remove(path);
        }
    }

    std::string reply = fetch();
    std::filesystem::create_directories(path.parent_path());
    nlohmann::json record = {{"cache_key", key},
                             {"model_id", profile.model_id},
                             {"request_time", detail::utc_timestamp()},
                             {"raw_reply", reply}};
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        out << record.dump(2);
    }
    std::filesystem::rename(tmp, path);
    return {reply, false};
}

// ---- deterministic offline mock -------------------------------------------

// Rule engine over the query narrative: short zero-vehicle trips walk, school
// trips by minors ride the school bus, everything else picks a private
// vehicle type from a fixed hash of the text.
inline std::string mock_complete(const PromptSpec& prompt) {
    const std::string& text = prompt.query.text;
    std::smatch m;

    double distance = -1.0;
    static const std::regex distance_re(R"(distance of ([0-9]+(?:\.[0-9]+)?) miles)");
    if (std::regex_search(text, m, distance_re)) distance = std::stod(m[1]);

    int vehicles = -1;
    static const std::regex vehicle_re(R"(([0-9]+) vehicles?)");
    if (std::regex_search(text, m, vehicle_re)) vehicles = std::stoi(m[1]);

    int age = -1;
    static const std::regex age_re(R"(([0-9]+)-year-old)");
    if (std::regex_search(text, m, age_re)) age = std::stoi(m[1]);

    bool school_trip = text.find("traveling for school") != std::string::npos;

    Mode choice;
    if (distance >= 0.0 && distance < 1.0 && vehicles == 0) {
        choice = Mode::Walk;
    } else if (school_trip && age >= 0 && age < 18) {
        choice = Mode::SchoolBus;
    } else {
        std::uint64_t h = fnv1a64(text) % 16;
        if (h < 7)
            choice = Mode::Car;
        else if (h < 12)
            choice = Mode::SuvCrossover;
        else if (h < 15)
            choice = Mode::PickupTruck;
        else
            choice = Mode::Van;
    }
    return "Considering the trip characteristics, the most plausible choice follows.\n" +
           mode_name(choice);
}

// ---- bounded-parallel dispatch --------------------------------------------

inline void parallel_for_each(std::size_t count, std::size_t parallelism,
                              const std::function<void(std::size_t)>& fn) {
    parallelism = std::max<std::size_t>(1, std::min(parallelism, count == 0 ? 1 : count));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    for (std::size_t w = 0; w < parallelism; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace transmode
