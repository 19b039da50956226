#pragma once

// Synthetic embedding streams with known backbone drift.
//
// Latent model: each sample has a latent row z = mu_c + s * g (g standard
// normal, mu_c uniform on the sphere of radius mean_radius). Its embedding
// under backbone t is z * M_t + c_t + noise, with M_t = A_1 * ... * A_t,
// A_1 = I and the offset c_t nonzero only for affine drift
// (c_t = c_{t-1} * A_t + b_t). Observation noise is drawn independently per
// (sample block, backbone).
//
// Every random number comes from a substream of the scenario seed keyed by
// what it is used for, so any block can be regenerated in isolation.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dpcr/class_stats.hpp"
#include "dpcr/numerics.hpp"

namespace dpcr {

/// Identifier recorded in manifests and result files.
inline constexpr const char* kGeneratorId = "mt19937_64+splitmix64-substreams+box-muller/v1";

/// mt19937_64 seeded from a splitmix64 hash of (seed, stream, a, b). Uniform
/// and normal draws are computed here rather than through <random>
/// distributions, whose output is implementation-defined.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0, std::uint64_t b = 0);

    std::uint64_t next_u64() { return engine_(); }
    double uniform();  // [0, 1)
    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

enum class DriftKind { none, orthogonal, orthogonal_plus_scale, affine };

const char* to_string(DriftKind kind);
DriftKind drift_kind_from_string(const std::string& name);

struct DriftScenario {
    std::uint64_t seed = 0;
    std::size_t dim = 32;
    std::size_t tasks = 5;
    std::size_t classes_per_task = 5;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
    double mean_radius = 4.0;
    double within_class_std = 1.0;
    DriftKind drift_kind = DriftKind::orthogonal;
    double drift_strength = 0.5;
    double observation_noise_std = 0.05;

    void validate() const;
    std::size_t total_classes() const { return tasks * classes_per_task; }

    /// seed 7, d = 32, C = 5, T = 5, 200/100 per class, orthogonal drift of
    /// strength 0.5, observation noise 0.05 * within_class_std.
    static DriftScenario standard();
};

enum class Split { train, test };

const char* to_string(Split split);

struct LabeledEmbeddings {
    Matrix x;                     // n x d
    std::vector<ClassId> labels;  // n
};

/// Class ids of task t: (t-1)*C .. t*C - 1.
std::vector<ClassId> task_classes(const DriftScenario& scenario, TaskIndex task);

/// Data of `task` as seen by `backbone` (both 1-based, any order).
LabeledEmbeddings embed(const DriftScenario& scenario, TaskIndex task, Split split, TaskIndex backbone);

/// Per-task drift map A_t for 2 <= t <= T.
Matrix ground_truth_shift(const DriftScenario& scenario, TaskIndex task);

/// Translation b_t of affine drift (zero for other kinds), 2 <= t <= T.
RowVector ground_truth_offset(const DriftScenario& scenario, TaskIndex task);

/// Cumulative map M_s = A_1 ... A_s.
Matrix backbone_map(const DriftScenario& scenario, TaskIndex backbone);

struct TestBlock {
    TaskIndex task = 0;
    LabeledEmbeddings data;
};

struct TaskBatch {
    TaskIndex task = 0;
    Matrix train_prev;  // task-t training data under backbone t-1; 0 x d at t = 1
    Matrix train_curr;  // same samples under backbone t
    std::vector<ClassId> labels;
    std::vector<TestBlock> tests;  // tasks 1..t under backbone t
};

TaskBatch generate_task(const DriftScenario& scenario, TaskIndex task);

}  // namespace dpcr
