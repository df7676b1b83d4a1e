#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "kmtpe/errors.hpp"
#include "kmtpe/rng.hpp"
#include "kmtpe/tiny_net.hpp"

namespace kmtpe {

enum class TaskKind { blobs2d, two_spirals };

inline std::string to_string(TaskKind k) {
    return k == TaskKind::blobs2d ? "blobs2d" : "two_spirals";
}

inline TaskKind task_kind_from_string(const std::string& s) {
    if (s == "blobs2d") return TaskKind::blobs2d;
    if (s == "two_spirals") return TaskKind::two_spirals;
    throw config_error("unknown task kind: " + s);
}

/// Built-in 2-feature classification tasks. Generation is deterministic per
/// seed and classes are balanced round-robin.
struct SyntheticTask {
    TaskKind kind = TaskKind::blobs2d;
    int classes = 3;  // blobs2d only; two_spirals is binary
    int train_count = 256;
    int test_count = 128;
    double noise = 0.3;
    std::uint64_t seed = 0;

    int class_count() const { return kind == TaskKind::two_spirals ? 2 : classes; }
};

namespace detail {

inline Dataset generate_samples(const SyntheticTask& task, int count, Rng& rng) {
    Dataset d;
    const int classes = task.class_count();
    for (int i = 0; i < count; ++i) {
        const int label = i % classes;  // balanced by construction
        double x0 = 0.0, x1 = 0.0;
        if (task.kind == TaskKind::blobs2d) {
            const double angle = 2.0 * M_PI * label / classes;
            x0 = 1.5 * std::cos(angle) + task.noise * rng.normal();
            x1 = 1.5 * std::sin(angle) + task.noise * rng.normal();
        } else {
            const double t = rng.uniform01();
            const double radius = 0.3 + 1.7 * t;
            const double angle = 3.0 * M_PI * t + M_PI * label;
            x0 = radius * std::cos(angle) + task.noise * rng.normal();
            x1 = radius * std::sin(angle) + task.noise * rng.normal();
        }
        d.x.push_back({x0, x1});
        d.labels.push_back(label);
    }
    return d;
}

}  // namespace detail

struct TaskData {
    Dataset train;
    Dataset test;
};

inline TaskData make_task_data(const SyntheticTask& task) {
    if (task.train_count < 1 || task.test_count < 1)
        throw config_error("task: sample counts must be >= 1");
    if (task.kind == TaskKind::blobs2d && task.classes < 2)
        throw config_error("task: blobs2d needs >= 2 classes");
    Rng rng(derive_seed(task.seed, 0xb10b));
    TaskData data;
    data.train = detail::generate_samples(task, task.train_count, rng);
    data.test = detail::generate_samples(task, task.test_count, rng);
    return data;
}

inline void to_json(nlohmann::json& j, const SyntheticTask& t) {
    j = nlohmann::json{{"kind", to_string(t.kind)}, {"classes", t.classes},
                       {"train_count", t.train_count}, {"test_count", t.test_count},
                       {"noise", t.noise}, {"seed", t.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticTask& t) {
    t.kind = task_kind_from_string(j.value("kind", "blobs2d"));
    t.classes = j.value("classes", 3);
    t.train_count = j.value("train_count", 256);
    t.test_count = j.value("test_count", 128);
    t.noise = j.value("noise", 0.3);
    t.seed = j.value("seed", 0);
}

}  // namespace kmtpe
