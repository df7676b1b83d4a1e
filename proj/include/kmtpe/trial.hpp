#pragma once

#include <cstdint>
#include <limits>
#include <string>

#include <json.hpp>

#include "kmtpe/layer_shape.hpp"

namespace kmtpe {

enum class TrialPhase { random, surrogate };

inline std::string to_string(TrialPhase p) {
    return p == TrialPhase::random ? "random" : "surrogate";
}

inline TrialPhase trial_phase_from_string(const std::string& s) {
    if (s == "random") return TrialPhase::random;
    if (s == "surrogate") return TrialPhase::surrogate;
    throw config_error("unknown trial phase: " + s);
}

/// One evaluated configuration. Failed trials (non-finite loss during
/// training) keep a -inf objective sentinel in memory and are excluded from
/// surrogate fitting; everything is still logged.
struct Trial {
    int index = 0;
    Configuration config;
    double objective = 0.0;
    double accuracy = 0.0;
    std::uint64_t model_size_bytes = 0;
    std::uint64_t latency_cycles = 0;
    double penalties = 0.0;
    TrialPhase phase = TrialPhase::random;
    int k_used = 0;  // 0 = not applicable (random phase / classic TPE)
    bool failed = false;
    double wall_time_ms = 0.0;  // in-memory only; kept out of the trial log

    static double failed_objective() { return -std::numeric_limits<double>::infinity(); }
};

/// Log form of a trial. Wall-clock time is deliberately omitted: the trial
/// log is specified to be byte-identical across reruns of the same
/// (config, seed), so only deterministic fields may appear. nlohmann keeps
/// object keys sorted, which makes the dump canonical.
inline nlohmann::json trial_to_json(const Trial& t) {
    nlohmann::json j{{"schema_version", 1},
                     {"index", t.index},
                     {"config", t.config},
                     {"accuracy", t.accuracy},
                     {"model_size_bytes", t.model_size_bytes},
                     {"latency_cycles", t.latency_cycles},
                     {"penalties", t.penalties},
                     {"phase", to_string(t.phase)},
                     {"failed", t.failed}};
    if (t.failed)
        j["objective"] = nullptr;
    else
        j["objective"] = t.objective;
    if (t.k_used > 0)
        j["k_used"] = t.k_used;
    else
        j["k_used"] = nullptr;
    return j;
}

inline Trial trial_from_json(const nlohmann::json& j) {
    Trial t;
    t.index = j.at("index").get<int>();
    t.config = j.at("config").get<Configuration>();
    t.accuracy = j.at("accuracy").get<double>();
    t.model_size_bytes = j.at("model_size_bytes").get<std::uint64_t>();
    t.latency_cycles = j.at("latency_cycles").get<std::uint64_t>();
    t.penalties = j.at("penalties").get<double>();
    t.phase = trial_phase_from_string(j.at("phase").get<std::string>());
    t.failed = j.at("failed").get<bool>();
    t.objective = t.failed ? Trial::failed_objective() : j.at("objective").get<double>();
    t.k_used = j.at("k_used").is_null() ? 0 : j.at("k_used").get<int>();
    return t;
}

}  // namespace kmtpe
