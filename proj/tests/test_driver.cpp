#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "kmtpe/bench.hpp"
#include "kmtpe/driver.hpp"
#include "kmtpe/search.hpp"

using namespace kmtpe;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("kmtpe_driver_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

LoopContext bench_context(const BenchObjective& bench, OptimizerKind opt, std::uint64_t seed,
                          int n0, int n) {
    LoopContext ctx;
    ctx.space = bench.space();
    ctx.params.n0 = n0;
    ctx.params.n = n;
    ctx.params.maxiters = std::max(100, n - n0);
    ctx.optimizer = opt;
    ctx.seed = seed;
    ctx.config_fingerprint = "test";
    ctx.evaluate = [&bench](const Configuration& c, int) {
        Trial t;
        t.objective = bench.value(c);
        t.accuracy = t.objective;
        return t;
    };
    return ctx;
}

}  // namespace

TEST_CASE("n equal to n0 is pure random search", "[driver]") {
    const BenchObjective bench(BenchKind::quadratic_mixed, 2, 0.5, 3);
    const auto ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 5, 12, 12);
    const SearchState state = run_loop(ctx);
    REQUIRE(state.trials.size() == 12);
    double best = -1e300;
    for (const auto& t : state.trials) {
        CHECK(t.phase == TrialPhase::random);
        best = std::max(best, t.objective);
    }
    CHECK(state.best()->objective == best);
}

TEST_CASE("loop runs n trials with correct phase labels", "[driver]") {
    const BenchObjective bench(BenchKind::quadratic_mixed, 3, 0.5, 9);
    const auto ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 17, 10, 40);
    const SearchState state = run_loop(ctx);
    REQUIRE(state.trials.size() == 40);
    for (const auto& t : state.trials) {
        CHECK(t.index == &t - state.trials.data());
        CHECK(t.phase == (t.index < 10 ? TrialPhase::random : TrialPhase::surrogate));
    }
}

TEST_CASE("first surrogate iteration uses four clusters and k never shrinks", "[driver]") {
    const BenchObjective bench(BenchKind::quadratic_mixed, 3, 0.5, 23);
    const auto ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 41, 20, 80);
    const SearchState state = run_loop(ctx);
    int prev = 0;
    bool first = true;
    for (const auto& t : state.trials) {
        if (t.phase != TrialPhase::surrogate) continue;
        if (first) {
            CHECK(t.k_used == 4);  // ceil(1 / 0.25)
            first = false;
        }
        CHECK(t.k_used >= prev);
        prev = t.k_used;
    }
    CHECK_FALSE(first);
}

TEST_CASE("best-so-far trajectory is non-decreasing", "[driver]") {
    const BenchObjective bench(BenchKind::plateau_grid, 3, 0.6, 31);
    const auto ctx = bench_context(bench, OptimizerKind::classic_tpe, 77, 15, 60);
    const SearchState state = run_loop(ctx);
    double best = -1e300;
    for (const auto& t : state.trials) {
        best = std::max(best, t.objective);
        CHECK(best >= state.trials.front().objective);
    }
}

TEST_CASE("trial log is byte-identical across reruns", "[driver]") {
    const auto dir = temp_dir("log");
    const BenchObjective bench(BenchKind::plateau_grid, 3, 0.6, 12);
    for (int run = 0; run < 2; ++run) {
        auto ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 7, 10, 50);
        ctx.trial_log_path = (dir / ("run" + std::to_string(run) + ".jsonl")).string();
        run_loop(ctx);
    }
    CHECK(read_file((dir / "run0.jsonl").string()) == read_file((dir / "run1.jsonl").string()));
    fs::remove_all(dir);
}

TEST_CASE("interrupted run resumes to the identical log", "[driver]") {
    const auto dir = temp_dir("resume");
    const BenchObjective bench(BenchKind::plateau_grid, 3, 0.6, 19);

    auto full_ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 29, 10, 60);
    full_ctx.trial_log_path = (dir / "full.jsonl").string();
    const SearchState full = run_loop(full_ctx);

    auto part_ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 29, 10, 60);
    part_ctx.trial_log_path = (dir / "part.jsonl").string();
    part_ctx.state_path = (dir / "state.json").string();
    const SearchState halted = run_loop(part_ctx, {}, 30);
    REQUIRE(halted.trials.size() == 30);

    const SearchState resumed =
        run_loop(part_ctx, load_state(part_ctx.state_path, part_ctx.params));
    REQUIRE(resumed.trials.size() == 60);
    CHECK(read_file((dir / "full.jsonl").string()) == read_file((dir / "part.jsonl").string()));
    for (size_t i = 0; i < 60; ++i)
        CHECK(resumed.trials[i].config == full.trials[i].config);

    // Resuming a completed run is a no-op.
    const SearchState again =
        run_loop(part_ctx, load_state(part_ctx.state_path, part_ctx.params));
    CHECK(again.trials.size() == 60);
    fs::remove_all(dir);
}

TEST_CASE("tampered state files are rejected", "[driver]") {
    const auto dir = temp_dir("tamper");
    const BenchObjective bench(BenchKind::plateau_grid, 2, 0.5, 3);
    auto ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 3, 5, 12);
    ctx.state_path = (dir / "state.json").string();
    run_loop(ctx, {}, 8);

    std::string text = read_file(ctx.state_path);
    const auto pos = text.find("\"c\":");
    REQUIRE(pos != std::string::npos);
    text[pos + 5] = text[pos + 5] == '0' ? '1' : '0';
    std::ofstream(ctx.state_path, std::ios::trunc) << text;
    CHECK_THROWS_AS(load_state(ctx.state_path, ctx.params), integrity_error);

    // Fingerprint mismatches are integrity errors too.
    auto other = ctx;
    other.config_fingerprint = "different";
    std::ofstream(ctx.state_path, std::ios::trunc);
    run_loop(ctx, {}, 8);
    CHECK_THROWS_AS(run_loop(other, load_state(ctx.state_path, ctx.params)), integrity_error);
    fs::remove_all(dir);
}

TEST_CASE("failed trials are logged but excluded from the surrogate data", "[driver]") {
    const BenchObjective bench(BenchKind::quadratic_mixed, 2, 0.5, 8);
    auto ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 13, 6, 24);
    int calls = 0;
    ctx.evaluate = [&](const Configuration& c, int) {
        Trial t;
        if (++calls % 5 == 0) {
            t.failed = true;
            t.objective = Trial::failed_objective();
        } else {
            t.objective = bench.value(c);
        }
        return t;
    };
    const SearchState state = run_loop(ctx);
    REQUIRE(state.trials.size() == 24);
    int failed = 0;
    for (const auto& t : state.trials) failed += t.failed;
    CHECK(failed == 24 / 5);
    CHECK_FALSE(state.best()->failed);
}

TEST_CASE("race trajectories are deterministic", "[driver]") {
    RaceParams params;
    params.objective = BenchKind::quadratic_mixed;
    params.dims = 2;
    params.optimizers = {OptimizerKind::random_search, OptimizerKind::kmeans_tpe};
    for (std::uint64_t s = 0; s < 20; ++s) params.seeds.push_back(s);
    params.n = 40;
    params.n0 = 10;

    const RaceReport a = run_race(params);
    const RaceReport b = run_race(params);
    REQUIRE(a.arms.size() == b.arms.size());
    for (size_t i = 0; i < a.arms.size(); ++i) {
        CHECK(a.arms[i].best_so_far == b.arms[i].best_so_far);
        CHECK(a.arms[i].evals_to_target == b.arms[i].evals_to_target);
    }
}

TEST_CASE("both TPE variants beat random on the smooth benchmark", "[driver]") {
    RaceParams params;
    params.objective = BenchKind::quadratic_mixed;
    params.dims = 3;
    params.optimizers = {OptimizerKind::kmeans_tpe, OptimizerKind::classic_tpe,
                         OptimizerKind::random_search};
    for (std::uint64_t s = 0; s < 21; ++s) params.seeds.push_back(s);
    params.n = 80;
    params.n0 = 15;

    const RaceReport report = run_race(params);
    const double random_best = report.summary(OptimizerKind::random_search).median_final_best;
    CHECK(report.summary(OptimizerKind::kmeans_tpe).median_final_best > random_best);
    CHECK(report.summary(OptimizerKind::classic_tpe).median_final_best > random_best);
}

TEST_CASE("race validation enforces the minimum arms and seeds", "[driver]") {
    RaceParams params;
    params.optimizers = {OptimizerKind::kmeans_tpe};
    for (std::uint64_t s = 0; s < 25; ++s) params.seeds.push_back(s);
    CHECK_THROWS_AS(params.validate(), config_error);
    params.optimizers = {OptimizerKind::kmeans_tpe, OptimizerKind::classic_tpe};
    params.seeds.resize(19);
    CHECK_THROWS_AS(params.validate(), config_error);
}

TEST_CASE("race csv has one row per evaluation", "[driver]") {
    const auto dir = temp_dir("csv");
    RaceParams params;
    params.objective = BenchKind::quadratic_mixed;
    params.dims = 2;
    params.optimizers = {OptimizerKind::kmeans_tpe, OptimizerKind::random_search};
    for (std::uint64_t s = 0; s < 20; ++s) params.seeds.push_back(s);
    params.n = 30;
    params.n0 = 10;
    const RaceReport report = run_race(params);
    const std::string path = (dir / "race.csv").string();
    write_race_csv(report, path);
    const std::string text = read_file(path);
    const long rows = std::count(text.begin(), text.end(), '\n');
    CHECK(rows == 1 + 2 * 20 * 30);  // header + arms * evaluations
    fs::remove_all(dir);
}

TEST_CASE("ordinal-gaussian surrogate mode runs the full loop", "[driver]") {
    const BenchObjective bench(BenchKind::quadratic_mixed, 3, 0.5, 15);
    auto ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 21, 10, 40);
    ctx.params.surrogate = SurrogateKind::ordinal_gaussian;
    const SearchState state = run_loop(ctx);
    REQUIRE(state.trials.size() == 40);
    for (const auto& t : state.trials) CHECK(ctx.space.contains(t.config));
    // Identical setup with the categorical default diverges in the
    // surrogate phase, so the flag demonstrably switches the model.
    auto cat_ctx = bench_context(bench, OptimizerKind::kmeans_tpe, 21, 10, 40);
    const SearchState cat_state = run_loop(cat_ctx);
    bool differs = false;
    for (size_t i = 10; i < 40; ++i)
        differs |= !(state.trials[i].config == cat_state.trials[i].config);
    CHECK(differs);
}
