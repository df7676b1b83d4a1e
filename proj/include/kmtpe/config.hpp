#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmtpe/driver.hpp"
#include "kmtpe/errors.hpp"
#include "kmtpe/evaluate.hpp"
#include "kmtpe/hw.hpp"
#include "kmtpe/search_space.hpp"
#include "kmtpe/sensitivity.hpp"
#include "kmtpe/tasks.hpp"
#include "kmtpe/tiny_net.hpp"
#include "kmtpe/tpe.hpp"

namespace kmtpe {

namespace detail {

inline void ensure_parent_dir(const std::string& path) {
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

/// Unknown keys are config errors, not silent no-ops.
inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& context) {
    if (!j.is_object()) throw config_error(context + ": expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key))
            throw config_error(context + ": unknown key '" + key + "'");
}

}  // namespace detail

struct NetConfig {
    Loss loss = Loss::cross_entropy;
    std::vector<int> hidden = {16, 16};
    int pretrain_epochs = 30;
    int trial_epochs = 4;
    double learning_rate = 0.1;
    int batch_size = 32;
    std::string checkpoint_out;
};

struct SpaceConfig {
    std::optional<std::vector<std::vector<int>>> bit_candidates;
    std::optional<std::vector<std::vector<double>>> width_candidates;
    std::vector<std::vector<int>> subsets = {{8, 6}, {6, 4, 3}, {4, 3, 2}, {3, 2}};
    bool exempt_first_last = false;
};

struct SensitivityConfig {
    bool enabled = true;
    std::optional<int> k;  // default: min(subset count, layer count)
    int probes = 100;
    int samples = 512;
    TraceEstimator estimator = TraceEstimator::hutchinson;
    std::string report_out;
    std::string report_in;  // skip analysis, load a previous report
};

struct OutputConfig {
    std::string trial_log = "trials.jsonl";
    std::string state = "state.json";
    std::string summary = "summary.json";
};

struct RunConfig {
    std::uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::kmeans_tpe;
    SyntheticTask task;
    NetConfig net;
    SpaceConfig space;
    SensitivityConfig sensitivity;
    TpeParams tpe;
    ConstraintSet constraints;
    HardwareSpec hardware;
    OutputConfig output;
    std::string fingerprint;  // canonical hash of the parsed JSON
};

inline RunConfig parse_run_config(const nlohmann::json& j) {
    detail::check_keys(j, {"schema_version", "seed", "optimizer", "task", "net", "space",
                           "sensitivity", "tpe", "constraints", "hardware", "output"},
                       "config");
    if (j.value("schema_version", 0) != 1)
        throw config_error("config: schema_version must be 1");

    RunConfig cfg;
    cfg.seed = j.value("seed", 0);
    cfg.optimizer = optimizer_from_string(j.value("optimizer", "kmeans-tpe"));

    if (j.contains("task")) {
        detail::check_keys(j.at("task"),
                           {"kind", "classes", "train_count", "test_count", "noise", "seed"},
                           "task");
        cfg.task = j.at("task").get<SyntheticTask>();
    }

    if (j.contains("net")) {
        const auto& n = j.at("net");
        detail::check_keys(n,
                           {"loss", "hidden", "pretrain_epochs", "trial_epochs", "learning_rate",
                            "batch_size", "checkpoint_out"},
                           "net");
        cfg.net.loss = loss_from_string(n.value("loss", "cross_entropy"));
        cfg.net.hidden = n.value("hidden", std::vector<int>{16, 16});
        cfg.net.pretrain_epochs = n.value("pretrain_epochs", 30);
        cfg.net.trial_epochs = n.value("trial_epochs", 4);
        cfg.net.learning_rate = n.value("learning_rate", 0.1);
        cfg.net.batch_size = n.value("batch_size", 32);
        cfg.net.checkpoint_out = n.value("checkpoint_out", "");
        if (cfg.net.pretrain_epochs < 0 || cfg.net.trial_epochs < 1 || cfg.net.batch_size < 1 ||
            cfg.net.learning_rate <= 0.0)
            throw config_error("net: invalid training parameters");
    }

    if (j.contains("space")) {
        const auto& s = j.at("space");
        detail::check_keys(
            s, {"bit_candidates", "width_candidates", "subsets", "exempt_first_last"}, "space");
        if (s.contains("bit_candidates") && !s.at("bit_candidates").is_null())
            cfg.space.bit_candidates = s.at("bit_candidates").get<std::vector<std::vector<int>>>();
        if (s.contains("width_candidates") && !s.at("width_candidates").is_null())
            cfg.space.width_candidates =
                s.at("width_candidates").get<std::vector<std::vector<double>>>();
        if (s.contains("subsets") && !s.at("subsets").is_null())
            cfg.space.subsets = s.at("subsets").get<std::vector<std::vector<int>>>();
        cfg.space.exempt_first_last = s.value("exempt_first_last", false);
        if (cfg.space.subsets.empty()) throw config_error("space: subsets must be non-empty");
    }

    if (j.contains("sensitivity")) {
        const auto& s = j.at("sensitivity");
        detail::check_keys(
            s, {"enabled", "k", "probes", "samples", "estimator", "report_out", "report_in"},
            "sensitivity");
        cfg.sensitivity.enabled = s.value("enabled", true);
        if (s.contains("k") && !s.at("k").is_null()) cfg.sensitivity.k = s.at("k").get<int>();
        cfg.sensitivity.probes = s.value("probes", 100);
        cfg.sensitivity.samples = s.value("samples", 512);
        cfg.sensitivity.estimator =
            trace_estimator_from_string(s.value("estimator", "hutchinson"));
        cfg.sensitivity.report_out = s.value("report_out", "");
        cfg.sensitivity.report_in = s.value("report_in", "");
        if (cfg.sensitivity.probes < 1 || cfg.sensitivity.samples < 1)
            throw config_error("sensitivity: probes and samples must be >= 1");
    }

    if (j.contains("tpe")) {
        const auto& t = j.at("tpe");
        detail::check_keys(t,
                           {"n0", "n", "c0", "alpha", "maxiters", "n_ei_candidates", "gamma",
                            "anneal_every", "surrogate"},
                           "tpe");
        cfg.tpe.n0 = t.value("n0", 20);
        cfg.tpe.n = t.value("n", 100);
        cfg.tpe.c0 = t.value("c0", 0.25);
        cfg.tpe.alpha = t.value("alpha", 0.98);
        cfg.tpe.maxiters = t.value("maxiters", std::max(100, cfg.tpe.n - cfg.tpe.n0));
        cfg.tpe.n_ei_candidates = t.value("n_ei_candidates", 24);
        cfg.tpe.gamma = t.value("gamma", 0.25);
        cfg.tpe.anneal_every = t.value("anneal_every", 1);
        cfg.tpe.surrogate = surrogate_kind_from_string(t.value("surrogate", "categorical"));
    }
    cfg.tpe.validate();

    if (j.contains("constraints")) {
        detail::check_keys(j.at("constraints"),
                           {"model_size_bytes", "latency_cycles", "energy_proxy",
                            "throughput_proxy", "penalty_lambda"},
                           "constraints");
        cfg.constraints = j.at("constraints").get<ConstraintSet>();
    }

    if (j.contains("hardware")) {
        detail::check_keys(j.at("hardware"), {"rows", "cols", "clock_mhz", "packing_table"},
                           "hardware");
        cfg.hardware = j.at("hardware").get<HardwareSpec>();
    }

    if (j.contains("output")) {
        const auto& o = j.at("output");
        detail::check_keys(o, {"trial_log", "state", "summary"}, "output");
        cfg.output.trial_log = o.value("trial_log", "trials.jsonl");
        cfg.output.state = o.value("state", "state.json");
        cfg.output.summary = o.value("summary", "summary.json");
    }

    cfg.fingerprint = to_hex(fnv1a64(j.dump()));
    return cfg;
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read file: " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("invalid JSON in " + path + ": " + e.what());
    }
}

inline void write_json_file(const nlohmann::json& j, const std::string& path, int indent = 2) {
    detail::ensure_parent_dir(path);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot write file: " + path);
    out << j.dump(indent) << '\n';
}

inline RunConfig load_run_config(const std::string& path) {
    return parse_run_config(load_json_file(path));
}

}  // namespace kmtpe
