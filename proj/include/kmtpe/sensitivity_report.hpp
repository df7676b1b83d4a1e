#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kmtpe/errors.hpp"

namespace kmtpe {

enum class TraceEstimator { exact, hutchinson };

inline std::string to_string(TraceEstimator e) {
    return e == TraceEstimator::exact ? "exact" : "hutchinson";
}

inline TraceEstimator trace_estimator_from_string(const std::string& s) {
    if (s == "exact") return TraceEstimator::exact;
    if (s == "hutchinson") return TraceEstimator::hutchinson;
    throw config_error("unknown trace estimator: " + s);
}

/// Per-layer Hessian-trace sensitivities with their cluster assignment.
/// Cluster labels are rank-ordered: label 0 is the highest-centroid cluster.
struct SensitivityReport {
    struct Layer {
        std::string name;
        double raw_trace = 0.0;
        double normalized_trace = 0.0;  // raw_trace / weight_count
        int cluster_label = 0;
    };

    std::vector<Layer> layers;
    int cluster_count = 0;
    int probe_count = 0;
    TraceEstimator estimator = TraceEstimator::hutchinson;

    const Layer* find(const std::string& name) const {
        for (const auto& l : layers)
            if (l.name == name) return &l;
        return nullptr;
    }
};

inline void to_json(nlohmann::json& j, const SensitivityReport::Layer& l) {
    j = nlohmann::json{{"name", l.name},
                       {"raw_trace", l.raw_trace},
                       {"normalized_trace", l.normalized_trace},
                       {"cluster_label", l.cluster_label}};
}

inline void from_json(const nlohmann::json& j, SensitivityReport::Layer& l) {
    l.name = j.at("name").get<std::string>();
    l.raw_trace = j.at("raw_trace").get<double>();
    l.normalized_trace = j.at("normalized_trace").get<double>();
    l.cluster_label = j.at("cluster_label").get<int>();
}

inline void to_json(nlohmann::json& j, const SensitivityReport& r) {
    j = nlohmann::json{{"schema_version", 1},
                       {"layers", r.layers},
                       {"cluster_count", r.cluster_count},
                       {"probe_count", r.probe_count},
                       {"estimator", to_string(r.estimator)}};
}

inline void from_json(const nlohmann::json& j, SensitivityReport& r) {
    r.layers = j.at("layers").get<std::vector<SensitivityReport::Layer>>();
    r.cluster_count = j.at("cluster_count").get<int>();
    r.probe_count = j.at("probe_count").get<int>();
    r.estimator = trace_estimator_from_string(j.at("estimator").get<std::string>());
}

}  // namespace kmtpe
