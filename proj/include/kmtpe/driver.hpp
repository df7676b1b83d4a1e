#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kmtpe/bench.hpp"
#include "kmtpe/errors.hpp"
#include "kmtpe/log.hpp"
#include "kmtpe/rng.hpp"
#include "kmtpe/search_space.hpp"
#include "kmtpe/tpe.hpp"
#include "kmtpe/trial.hpp"

namespace kmtpe {

enum class OptimizerKind { kmeans_tpe, classic_tpe, random_search };

inline std::string to_string(OptimizerKind k) {
    switch (k) {
        case OptimizerKind::kmeans_tpe: return "kmeans-tpe";
        case OptimizerKind::classic_tpe: return "classic-tpe";
        default: return "random";
    }
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "kmeans-tpe") return OptimizerKind::kmeans_tpe;
    if (s == "classic-tpe") return OptimizerKind::classic_tpe;
    if (s == "random") return OptimizerKind::random_search;
    throw config_error("unknown optimizer: " + s);
}

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

/// Mutable search-loop state. Snapshots serialize everything needed so a
/// resumed run continues with results identical to an uninterrupted one.
struct SearchState {
    TpeParams params;
    OptimizerKind optimizer = OptimizerKind::kmeans_tpe;
    std::uint64_t seed = 0;
    std::vector<Trial> trials;
    double c = 0.25;
    int surrogate_iters = 0;
    std::string rng_state;
    std::string config_fingerprint;

    const Trial* best() const {
        const Trial* b = nullptr;
        for (const auto& t : trials)
            if (!t.failed && (!b || t.objective > b->objective)) b = &t;
        return b;
    }

    bool complete() const { return static_cast<int>(trials.size()) >= params.n; }
};

namespace detail {

inline nlohmann::json state_payload(const SearchState& s) {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : s.trials) trials.push_back(trial_to_json(t));
    return nlohmann::json{{"schema_version", 1},
                          {"optimizer", to_string(s.optimizer)},
                          {"seed", s.seed},
                          {"c", s.c},
                          {"surrogate_iters", s.surrogate_iters},
                          {"rng_state", s.rng_state},
                          {"config_fingerprint", s.config_fingerprint},
                          {"n0", s.params.n0},
                          {"n", s.params.n},
                          {"trials", trials}};
}

}  // namespace detail

inline void save_state(const SearchState& s, const std::string& path) {
    nlohmann::json payload = detail::state_payload(s);
    payload["checksum"] = to_hex(fnv1a64(payload.dump()));
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot write state file: " + path);
    out << payload.dump(2) << '\n';
}

/// Loads a snapshot, rejecting tampered or truncated files via checksum.
/// TPE parameters beyond n0/n are not serialized; the caller supplies the
/// original run parameters and the fingerprint check ensures they match.
inline SearchState load_state(const std::string& path, const TpeParams& params) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read state file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw integrity_error("state file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.contains("checksum")) throw integrity_error("state file missing checksum");
    const std::string stored = j.at("checksum").get<std::string>();
    j.erase("checksum");
    if (to_hex(fnv1a64(j.dump())) != stored)
        throw integrity_error("state file checksum mismatch: " + path);

    SearchState s;
    s.params = params;
    try {
        s.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
        s.seed = j.at("seed").get<std::uint64_t>();
        s.c = j.at("c").get<double>();
        s.surrogate_iters = j.at("surrogate_iters").get<int>();
        s.rng_state = j.at("rng_state").get<std::string>();
        s.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        if (j.at("n0").get<int>() != params.n0 || j.at("n").get<int>() != params.n)
            throw integrity_error("state file does not match the run parameters");
        for (const auto& tj : j.at("trials")) s.trials.push_back(trial_from_json(tj));
    } catch (const nlohmann::json::exception& e) {
        throw integrity_error("state file schema mismatch: " + std::string(e.what()));
    }
    return s;
}

/// Everything the sequential loop needs; the evaluator hides whether trials
/// are trained networks or analytic benchmark values.
struct LoopContext {
    SearchSpace space;
    std::function<Trial(const Configuration&, int)> evaluate;
    TpeParams params;
    OptimizerKind optimizer = OptimizerKind::kmeans_tpe;
    std::uint64_t seed = 0;
    std::string trial_log_path;  // empty: no log
    std::string state_path;      // empty: no snapshots
    std::string config_fingerprint;
};

namespace detail {

inline void write_trial_log(const std::vector<Trial>& trials, const std::string& path) {
    if (path.empty()) return;
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot write trial log: " + path);
    for (const auto& t : trials) out << trial_to_json(t).dump() << '\n';
}

inline void append_trial_log(const Trial& t, const std::string& path) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::app);
    if (!out) throw io_error("cannot append trial log: " + path);
    out << trial_to_json(t).dump() << '\n';
}

}  // namespace detail

/// The sequential model-based loop: n0 random trials, then surrogate
/// proposals with the annealed dual-threshold split (or the classic
/// quantile rule / pure random sampling, per optimizer choice).
///
/// `stop_after` truncates the run after that many total trials (snapshot
/// still written), which is how interruption is exercised; -1 runs to
/// completion. Any evaluator exception flushes the log before rethrowing.
inline SearchState run_loop(const LoopContext& ctx, std::optional<SearchState> resume_from = {},
                            int stop_after = -1) {
    ctx.params.validate();
    ctx.space.validate();

    SearchState state;
    Rng rng;
    if (resume_from) {
        state = std::move(*resume_from);
        if (state.config_fingerprint != ctx.config_fingerprint)
            throw integrity_error("state file belongs to a different run configuration");
        rng.restore_state(state.rng_state);
    } else {
        state.params = ctx.params;
        state.optimizer = ctx.optimizer;
        state.seed = ctx.seed;
        state.c = ctx.params.c0;
        state.config_fingerprint = ctx.config_fingerprint;
        rng = Rng(derive_seed(ctx.seed, 0x100b));
    }

    // Resuming rewrites the already-known prefix so the final log is
    // byte-identical to an uninterrupted run's.
    detail::write_trial_log(state.trials, ctx.trial_log_path);

    const int limit = stop_after < 0 ? ctx.params.n : std::min(stop_after, ctx.params.n);
    while (static_cast<int>(state.trials.size()) < limit) {
        const int index = static_cast<int>(state.trials.size());
        const bool random_phase = index < ctx.params.n0;

        Configuration next;
        int k_used = 0;
        if (random_phase || ctx.optimizer == OptimizerKind::random_search) {
            next = sample_configuration(ctx.space, rng);
        } else {
            std::vector<Configuration> configs;
            std::vector<double> objectives;
            for (const auto& t : state.trials)
                if (!t.failed) {
                    configs.push_back(t.config);
                    objectives.push_back(t.objective);
                }
            if (configs.empty()) {
                next = sample_configuration(ctx.space, rng);  // every trial failed so far
            } else {
                Split split;
                if (ctx.optimizer == OptimizerKind::kmeans_tpe) {
                    split = kmeans_split(objectives, state.c);
                    k_used = split.k_used;
                } else {
                    split = classic_threshold(objectives, ctx.params.gamma);
                }
                std::vector<Configuration> good, bad;
                for (auto i : split.desirable) good.push_back(configs[i]);
                for (auto i : split.undesirable) bad.push_back(configs[i]);
                const Surrogate l_model = fit_surrogate(good, ctx.space, ctx.params.surrogate);
                const Surrogate g_model = fit_surrogate(bad, ctx.space, ctx.params.surrogate);
                const auto seen = [&state](const Configuration& c) {
                    for (const auto& t : state.trials)
                        if (t.config == c) return true;
                    return false;
                };
                next = propose(l_model, g_model, ctx.space, ctx.params.n_ei_candidates, rng, seen);
            }
        }

        Trial trial;
        try {
            trial = ctx.evaluate(next, index);
        } catch (...) {
            state.rng_state = rng.save_state();
            if (!ctx.state_path.empty()) save_state(state, ctx.state_path);
            throw;
        }
        trial.index = index;
        trial.config = next;
        trial.phase = random_phase ? TrialPhase::random : TrialPhase::surrogate;
        trial.k_used = k_used;
        state.trials.push_back(trial);
        detail::append_trial_log(trial, ctx.trial_log_path);

        if (!random_phase) {
            ++state.surrogate_iters;
            if (state.surrogate_iters % ctx.params.anneal_every == 0) state.c *= ctx.params.alpha;
            if (state.surrogate_iters >= ctx.params.maxiters &&
                static_cast<int>(state.trials.size()) < ctx.params.n) {
                log_info("surrogate iteration cap reached before n trials");
                break;
            }
        }

        state.rng_state = rng.save_state();
        if (!ctx.state_path.empty()) save_state(state, ctx.state_path);

        if (index == ctx.params.n0 - 1) log_info("random phase complete");
        if ((index + 1) % 20 == 0)
            log_info("trial " + std::to_string(index + 1) + "/" + std::to_string(ctx.params.n));
    }
    state.rng_state = rng.save_state();
    return state;
}

// ---------------------------------------------------------------------------
// Optimizer races on analytic benchmarks
// ---------------------------------------------------------------------------

struct RaceParams {
    BenchKind objective = BenchKind::plateau_grid;
    int dims = 3;
    double flat_fraction = 0.6;
    std::vector<OptimizerKind> optimizers = {OptimizerKind::kmeans_tpe,
                                             OptimizerKind::classic_tpe};
    std::vector<std::uint64_t> seeds;
    int n = 120;
    int n0 = 20;
    double target_tolerance = 0.01;  // "converged" = within 1% of the optimum

    void validate() const {
        if (optimizers.size() < 2) throw config_error("race: need at least 2 optimizers");
        if (seeds.size() < 20) throw config_error("race: need at least 20 seeds");
        if (n <= n0) throw config_error("race: need n > n0");
    }
};

struct RaceArm {
    OptimizerKind optimizer;
    std::uint64_t seed = 0;
    std::vector<double> best_so_far;  // one entry per evaluation
    int evals_to_target = 0;          // censored at the budget when unreached
    bool reached = false;
    double final_best = 0.0;
};

struct RaceSummary {
    OptimizerKind optimizer;
    double median_evals_to_target = 0.0;
    double reach_rate = 0.0;
    double median_final_best = 0.0;
};

struct RaceReport {
    RaceParams params;
    std::vector<RaceArm> arms;
    std::vector<RaceSummary> summaries;

    const RaceSummary& summary(OptimizerKind k) const {
        for (const auto& s : summaries)
            if (s.optimizer == k) return s;
        throw input_error("race summary: optimizer not in report");
    }

    /// Fraction of seeds where `a`'s final best is at least `b`'s.
    double win_rate(OptimizerKind a, OptimizerKind b) const {
        int wins = 0, total = 0;
        for (const auto& arm : arms) {
            if (arm.optimizer != a) continue;
            for (const auto& other : arms)
                if (other.optimizer == b && other.seed == arm.seed) {
                    ++total;
                    if (arm.final_best >= other.final_best) ++wins;
                }
        }
        return total ? static_cast<double>(wins) / total : 0.0;
    }
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Paired convergence race: for each seed, every optimizer searches the
/// same seeded landscape with the same search seed; trajectories record the
/// best value after each evaluation.
inline RaceReport run_race(const RaceParams& params) {
    params.validate();
    RaceReport report;
    report.params = params;
    for (const auto seed : params.seeds) {
        const BenchObjective bench(params.objective, params.dims, params.flat_fraction,
                                   derive_seed(seed, 0x1a2d));
        const double target = bench.optimum_value() * (1.0 - params.target_tolerance);
        for (const auto opt : params.optimizers) {
            LoopContext ctx;
            ctx.space = bench.space();
            ctx.params.n0 = params.n0;
            ctx.params.n = params.n;
            ctx.params.maxiters = params.n - params.n0;
            ctx.optimizer = opt;
            ctx.seed = derive_seed(seed, 0x5ea2);
            ctx.config_fingerprint = "race";
            ctx.evaluate = [&](const Configuration& c, int) {
                Trial t;
                t.objective = bench.value(c);
                t.accuracy = t.objective;
                return t;
            };
            const SearchState state = run_loop(ctx);

            RaceArm arm;
            arm.optimizer = opt;
            arm.seed = seed;
            double best = -std::numeric_limits<double>::infinity();
            for (const auto& t : state.trials) {
                best = std::max(best, t.objective);
                arm.best_so_far.push_back(best);
                if (!arm.reached && best >= target) {
                    arm.reached = true;
                    arm.evals_to_target = t.index + 1;
                }
            }
            if (!arm.reached) arm.evals_to_target = params.n;
            arm.final_best = best;
            report.arms.push_back(std::move(arm));
        }
        log_info("race seed " + std::to_string(seed) + " done");
    }

    for (const auto opt : params.optimizers) {
        RaceSummary s;
        s.optimizer = opt;
        std::vector<double> evals, finals;
        int reached = 0, total = 0;
        for (const auto& arm : report.arms)
            if (arm.optimizer == opt) {
                evals.push_back(static_cast<double>(arm.evals_to_target));
                finals.push_back(arm.final_best);
                reached += arm.reached;
                ++total;
            }
        s.median_evals_to_target = detail::median(evals);
        s.median_final_best = detail::median(finals);
        s.reach_rate = static_cast<double>(reached) / total;
        report.summaries.push_back(s);
    }
    return report;
}

/// Full trajectories as CSV (one row per evaluation per arm).
inline void write_race_csv(const RaceReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot write race csv: " + path);
    out << "optimizer,seed,trial_index,best_so_far\n";
    for (const auto& arm : report.arms)
        for (std::size_t i = 0; i < arm.best_so_far.size(); ++i) {
            nlohmann::json v = arm.best_so_far[i];  // shortest round-trip formatting
            out << to_string(arm.optimizer) << ',' << arm.seed << ',' << i << ',' << v.dump()
                << '\n';
        }
}

inline nlohmann::json race_summary_json(const RaceReport& report) {
    nlohmann::json per_optimizer = nlohmann::json::object();
    for (const auto& s : report.summaries)
        per_optimizer[to_string(s.optimizer)] = {
            {"median_evals_to_target", s.median_evals_to_target},
            {"reach_rate", s.reach_rate},
            {"median_final_best", s.median_final_best}};
    nlohmann::json j{{"schema_version", 1},
                     {"objective", to_string(report.params.objective)},
                     {"dims", report.params.dims},
                     {"seeds", report.params.seeds.size()},
                     {"budget", report.params.n},
                     {"per_optimizer", per_optimizer}};
    const bool has_k = std::count(report.params.optimizers.begin(), report.params.optimizers.end(),
                                  OptimizerKind::kmeans_tpe);
    const bool has_c = std::count(report.params.optimizers.begin(), report.params.optimizers.end(),
                                  OptimizerKind::classic_tpe);
    if (has_k && has_c)
        j["kmeans_vs_classic_win_rate"] =
            report.win_rate(OptimizerKind::kmeans_tpe, OptimizerKind::classic_tpe);
    return j;
}

}  // namespace kmtpe
