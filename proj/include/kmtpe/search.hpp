#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <string>

#include <json.hpp>

#include "kmtpe/config.hpp"
#include "kmtpe/driver.hpp"
#include "kmtpe/evaluate.hpp"
#include "kmtpe/log.hpp"
#include "kmtpe/search_space.hpp"
#include "kmtpe/sensitivity.hpp"
#include "kmtpe/tasks.hpp"

namespace kmtpe {

struct SearchResult {
    SearchState state;
    SearchSpace space;
    std::optional<SensitivityReport> report;
    TinyNet pretrained;
    TaskData data;
};

namespace detail {

inline SearchSpace assemble_space(const RunConfig& cfg, const TinyNet& tmpl,
                                  const TaskData& data,
                                  std::optional<SensitivityReport>& report_out) {
    const auto& layers = tmpl.layers;
    if (cfg.space.bit_candidates) {
        SearchSpace space;
        space.layers = layers;
        space.bit_candidates = *cfg.space.bit_candidates;
        if (space.bit_candidates.size() != layers.size())
            throw config_error("space: explicit bit candidates must cover every layer");
        if (cfg.space.width_candidates) {
            space.width_candidates = *cfg.space.width_candidates;
            if (space.width_candidates.size() != layers.size())
                throw config_error("space: explicit width candidates must cover every layer");
        } else {
            space.width_candidates.assign(layers.size(), default_width_set());
        }
        space.validate();
        return space;
    }

    if (!cfg.sensitivity.enabled) return full_space(layers);

    SensitivityReport report;
    if (!cfg.sensitivity.report_in.empty()) {
        report = load_json_file(cfg.sensitivity.report_in).get<SensitivityReport>();
    } else {
        const int k = cfg.sensitivity.k
                          ? *cfg.sensitivity.k
                          : std::min<int>(static_cast<int>(cfg.space.subsets.size()),
                                          static_cast<int>(layers.size()));
        SensitivityOptions opts;
        opts.estimator = cfg.sensitivity.estimator;
        opts.probes = cfg.sensitivity.probes;
        opts.max_samples = static_cast<std::size_t>(cfg.sensitivity.samples);
        opts.seed = derive_seed(cfg.seed, 0x5e45);
        report = analyze_hessian(tmpl, data.train, k, opts);
        if (!cfg.sensitivity.report_out.empty()) {
            nlohmann::json rj = report;
            write_json_file(rj, cfg.sensitivity.report_out);
        }
    }

    // Fewer clusters than configured subsets (small nets): the most
    // sensitive tiers keep the high-bit subsets, the tail is unused.
    auto subsets = cfg.space.subsets;
    if (report.cluster_count < static_cast<int>(subsets.size()))
        subsets.resize(static_cast<std::size_t>(report.cluster_count));
    if (report.cluster_count > static_cast<int>(subsets.size()))
        throw config_error("space: sensitivity report has more clusters than subsets");
    report_out = report;
    return build_pruned_space(layers, report, static_cast<int>(subsets.size()), subsets,
                              cfg.space.exempt_first_last);
}

}  // namespace detail

/// Builds and pretrains the shared template net for a run configuration.
inline TinyNet build_template(const RunConfig& cfg, const TaskData& data) {
    TinyNet tmpl = make_mlp(2, cfg.net.hidden, cfg.task.class_count(), cfg.net.loss);
    Rng init_rng(derive_seed(cfg.seed, 0x1417));
    init_weights(tmpl, init_rng);
    if (cfg.net.pretrain_epochs > 0) {
        Rng train_rng(derive_seed(cfg.seed, 0x9e7a));
        if (!train_sgd(tmpl, data.train, cfg.net.pretrain_epochs, cfg.net.learning_rate,
                       cfg.net.batch_size, train_rng))
            throw numeric_error("template pretraining diverged");
    }
    return tmpl;
}

/// End-to-end run: task data, pretrained template, (optionally pruned)
/// space, then the sequential search loop. `resume_state_path` continues an
/// interrupted run; `stop_after` truncates (used to exercise interruption).
inline SearchResult run_search(const RunConfig& cfg, const std::string& resume_state_path = "",
                               int stop_after = -1) {
    SearchResult result;
    result.data = make_task_data(cfg.task);
    result.pretrained = build_template(cfg, result.data);
    if (!cfg.net.checkpoint_out.empty()) {
        nlohmann::json nj;
        to_json(nj, result.pretrained);
        write_json_file(nj, cfg.net.checkpoint_out);
    }
    result.space = detail::assemble_space(cfg, result.pretrained, result.data, result.report);
    log_info("search space holds " + space_size(result.space).str() + " configurations");

    EvalOptions eval_opts;
    eval_opts.epochs = cfg.net.trial_epochs;
    eval_opts.learning_rate = cfg.net.learning_rate;
    eval_opts.batch_size = cfg.net.batch_size;

    LoopContext ctx;
    ctx.space = result.space;
    ctx.params = cfg.tpe;
    ctx.optimizer = cfg.optimizer;
    ctx.seed = cfg.seed;
    ctx.trial_log_path = cfg.output.trial_log;
    ctx.state_path = cfg.output.state;
    ctx.config_fingerprint = cfg.fingerprint;
    const std::uint64_t trial_seed_base = derive_seed(cfg.seed, 0x7219);
    ctx.evaluate = [&](const Configuration& c, int index) {
        const auto start = std::chrono::steady_clock::now();
        Trial t = evaluate_configuration(c, result.pretrained, result.data.train,
                                         result.data.test, cfg.constraints, cfg.hardware,
                                         eval_opts, derive_seed(trial_seed_base, index));
        t.wall_time_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
        return t;
    };

    std::optional<SearchState> resume_state;
    if (!resume_state_path.empty()) resume_state = load_state(resume_state_path, cfg.tpe);
    result.state = run_loop(ctx, std::move(resume_state), stop_after);
    return result;
}

inline nlohmann::json search_summary_json(const SearchResult& result) {
    nlohmann::json j{{"schema_version", 1},
                     {"trials", result.state.trials.size()},
                     {"space_size", space_size(result.space).str()},
                     {"optimizer", to_string(result.state.optimizer)},
                     {"seed", result.state.seed}};
    if (const Trial* best = result.state.best()) {
        j["best"] = {{"index", best->index},
                     {"objective", best->objective},
                     {"accuracy", best->accuracy},
                     {"model_size_bytes", best->model_size_bytes},
                     {"latency_cycles", best->latency_cycles},
                     {"penalties", best->penalties},
                     {"config", best->config}};
    }
    if (result.report) {
        nlohmann::json rj = *result.report;
        j["sensitivity"] = rj;
    }
    return j;
}

}  // namespace kmtpe
