#pragma once

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kmtpe/builtin_shapes.hpp"
#include "kmtpe/config.hpp"
#include "kmtpe/driver.hpp"
#include "kmtpe/log.hpp"
#include "kmtpe/search.hpp"

namespace kmtpe {

namespace cli_detail {

inline Dataset dataset_from_json(const nlohmann::json& j) {
    if (j.contains("kind")) {  // task spec: use its training split
        const SyntheticTask task = j.get<SyntheticTask>();
        return make_task_data(task).train;
    }
    Dataset d;
    d.x = j.at("x").get<std::vector<std::vector<double>>>();
    if (j.contains("labels")) d.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("targets"))
        d.targets = j.at("targets").get<std::vector<std::vector<double>>>();
    if (d.x.empty()) throw config_error("dataset: no samples");
    return d;
}

inline std::vector<LayerShape> layers_from_json(const nlohmann::json& j) {
    if (j.contains("builtin")) return builtin::by_name(j.at("builtin").get<std::string>());
    return j.at("layers").get<std::vector<LayerShape>>();
}

inline int run_search_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                              const std::string& resume_path, const std::string& optimizer) {
    nlohmann::json raw = load_json_file(config_path);
    // Overrides are applied to the JSON before parsing so the run
    // fingerprint reflects the effective configuration.
    if (seed) raw["seed"] = *seed;
    if (!optimizer.empty()) raw["optimizer"] = optimizer;
    const RunConfig cfg = parse_run_config(raw);

    const SearchResult result = run_search(cfg, resume_path);
    const nlohmann::json summary = search_summary_json(result);
    if (!cfg.output.summary.empty()) write_json_file(summary, cfg.output.summary);

    if (const Trial* best = result.state.best()) {
        std::cout << "best objective " << best->objective << " (accuracy " << best->accuracy
                  << ", size " << best->model_size_bytes << " B, latency "
                  << best->latency_cycles << " cycles)\n";
        std::cout << "bits:";
        for (int b : best->config.bits) std::cout << ' ' << b;
        std::cout << "\nwidths:";
        for (double w : best->config.widths) std::cout << ' ' << w;
        std::cout << '\n';
    } else {
        std::cout << "no successful trials\n";
    }
    return 0;
}

inline int run_sensitivity_command(const std::string& net_path, const std::string& data_path,
                                   std::optional<int> k, int probes, int samples,
                                   const std::string& estimator, std::uint64_t seed,
                                   const std::string& out_path) {
    const TinyNet net = load_json_file(net_path).get<TinyNet>();
    const Dataset data = dataset_from_json(load_json_file(data_path));
    SensitivityOptions opts;
    opts.estimator = trace_estimator_from_string(estimator);
    opts.probes = probes;
    opts.max_samples = static_cast<std::size_t>(samples);
    opts.seed = seed;
    const int k_eff = k ? *k : std::min<int>(4, static_cast<int>(net.layer_count()));
    const SensitivityReport report = analyze_hessian(net, data, k_eff, opts);
    const nlohmann::json rj = report;
    if (out_path.empty())
        std::cout << rj.dump(2) << '\n';
    else
        write_json_file(rj, out_path);
    return 0;
}

inline int run_cost_command(const std::string& layers_path, const std::string& config_path,
                            const std::string& hw_path, int baseline_bits,
                            const std::string& out_path) {
    const auto layers = layers_from_json(load_json_file(layers_path));
    const Configuration config = load_json_file(config_path).get<Configuration>();
    if (config.bits.size() != layers.size())
        throw config_error("cost: configuration covers " + std::to_string(config.bits.size()) +
                           " layers, architecture has " + std::to_string(layers.size()));
    HardwareSpec hw;
    if (!hw_path.empty()) hw = load_json_file(hw_path).get<HardwareSpec>();
    const CostReport report = cost_report(layers, config, hw, baseline_bits);
    const nlohmann::json rj = report;
    if (out_path.empty())
        std::cout << rj.dump(2) << '\n';
    else
        write_json_file(rj, out_path);
    return 0;
}

inline int run_bench_command(const std::string& objective, int dims, double flat_fraction,
                             int seed_count, std::uint64_t seed_base, int budget, int n0,
                             const std::string& optimizers_csv, const std::string& csv_path,
                             const std::string& summary_path) {
    RaceParams params;
    params.objective = bench_kind_from_string(objective);
    params.dims = dims;
    params.flat_fraction = flat_fraction;
    params.n = budget;
    params.n0 = n0;
    params.optimizers.clear();
    std::string token;
    std::istringstream is(optimizers_csv);
    while (std::getline(is, token, ',')) params.optimizers.push_back(optimizer_from_string(token));
    for (int s = 0; s < seed_count; ++s)
        params.seeds.push_back(seed_base + static_cast<std::uint64_t>(s));
    params.validate();

    const RaceReport report = run_race(params);
    if (!csv_path.empty()) write_race_csv(report, csv_path);
    const nlohmann::json summary = race_summary_json(report);
    if (!summary_path.empty()) write_json_file(summary, summary_path);
    std::cout << summary.dump(2) << '\n';
    return 0;
}

}  // namespace cli_detail

/// CLI entry point; returns the process exit code. Error categories:
/// 2 = configuration/input, 3 = numerical, 4 = I/O and integrity.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Joint bit-width / layer-width search with a cluster-based TPE"};
    app.require_subcommand(1);

    // --- search ---
    auto* search = app.add_subcommand("search", "run the sequential search on a config file");
    std::string config_path, resume_path, optimizer_override;
    std::optional<std::uint64_t> seed_override;
    search->add_option("--config", config_path, "run configuration JSON")->required();
    search->add_option("--seed", seed_override, "override the config seed");
    search->add_option("--resume", resume_path, "state snapshot to continue from");
    search->add_option("--optimizer", optimizer_override,
                       "kmeans-tpe | classic-tpe | random (overrides the config)");

    // --- sensitivity ---
    auto* sens = app.add_subcommand("sensitivity", "per-layer Hessian-trace analysis");
    std::string net_path, data_path, sens_out, estimator = "hutchinson";
    std::optional<int> sens_k;
    int probes = 100, samples = 512;
    std::uint64_t sens_seed = 0;
    sens->add_option("--net", net_path, "net checkpoint JSON")->required();
    sens->add_option("--data", data_path, "dataset or task-spec JSON")->required();
    sens->add_option("--k", sens_k, "cluster count (default: min(4, layers))");
    sens->add_option("--probes", probes, "Hutchinson probes per layer");
    sens->add_option("--samples", samples, "dataset samples backing the estimate");
    sens->add_option("--estimator", estimator, "hutchinson | exact");
    sens->add_option("--seed", sens_seed, "probe RNG seed");
    sens->add_option("--out", sens_out, "report output path (default: stdout)");

    // --- cost ---
    auto* cost = app.add_subcommand("cost", "hardware cost report for a configuration");
    std::string layers_path, cost_config_path, hw_path, cost_out;
    int baseline_bits = 16;
    cost->add_option("--layers", layers_path, "layer shapes JSON or {\"builtin\": name}")
        ->required();
    cost->add_option("--config", cost_config_path, "configuration JSON (bits, widths)")
        ->required();
    cost->add_option("--hw", hw_path, "hardware spec JSON (default: built-in array)");
    cost->add_option("--baseline-bits", baseline_bits, "speedup baseline bit-width");
    cost->add_option("--out", cost_out, "report output path (default: stdout)");

    // --- bench ---
    auto* bench = app.add_subcommand("bench", "optimizer convergence race on a benchmark");
    std::string objective = "plateau_grid", optimizers = "kmeans-tpe,classic-tpe";
    std::string csv_path = "race.csv", bench_summary = "race_summary.json";
    int dims = 3, seed_count = 21, budget = 120, bench_n0 = 20;
    double flat_fraction = 0.6;
    std::uint64_t seed_base = 0;
    bench->add_option("--objective", objective, "plateau_grid | deceptive_flat | quadratic_mixed");
    bench->add_option("--dims", dims, "layers in the synthetic space");
    bench->add_option("--flat-fraction", flat_fraction, "share of the grid on the plateau");
    bench->add_option("--seeds", seed_count, "number of race seeds (>= 20)");
    bench->add_option("--seed-base", seed_base, "first seed value");
    bench->add_option("--budget", budget, "evaluations per run");
    bench->add_option("--n0", bench_n0, "random trials per run");
    bench->add_option("--optimizers", optimizers, "comma-separated optimizer list");
    bench->add_option("--csv", csv_path, "trajectory CSV output");
    bench->add_option("--summary", bench_summary, "summary JSON output");

    std::vector<std::string> argv = args;
    try {
        app.parse(std::vector<std::string>(argv.rbegin(), argv.rend()));
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }

    try {
        if (app.got_subcommand(search))
            return cli_detail::run_search_command(config_path, seed_override, resume_path,
                                                  optimizer_override);
        if (app.got_subcommand(sens))
            return cli_detail::run_sensitivity_command(net_path, data_path, sens_k, probes,
                                                       samples, estimator, sens_seed, sens_out);
        if (app.got_subcommand(cost))
            return cli_detail::run_cost_command(layers_path, cost_config_path, hw_path,
                                                baseline_bits, cost_out);
        if (app.got_subcommand(bench))
            return cli_detail::run_bench_command(objective, dims, flat_fraction, seed_count,
                                                 seed_base, budget, bench_n0, optimizers,
                                                 csv_path, bench_summary);
    } catch (const std::exception& e) {
        log_error(e.what());
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 2;
}

}  // namespace kmtpe
