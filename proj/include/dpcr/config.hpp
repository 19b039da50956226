#pragma once

// Run configuration, read from a JSON document. Parsing is strict: unknown
// keys and type mismatches are ConfigErrors carrying the dotted key path.
//
//   {
//     "source": {
//       "kind": "sim" | "dumps",                       default "sim"
//       "scenario": {                                  kind = sim
//         "dim": <int>,                                required
//         "seed": 0, "tasks": 5, "classes_per_task": 5,
//         "train_per_class": 200, "test_per_class": 100,
//         "mean_radius": 4.0, "within_class_std": 1.0,
//         "drift_kind": "orthogonal", "drift_strength": 0.5,
//         "observation_noise_std": 0.05
//       },
//       "directory": "<path>"                          kind = dumps, required
//     },
//     "method": {
//       "name": "DPCR", "gamma": 200, "eps": 1e-9,
//       "rank_policy": {"mode": "relative", "threshold": 1e-6, "k": 0}
//     },
//     "ablation": {"preset": "ladder" | "gamma-sweep" | "custom",
//                  "methods": [...], "gammas": [...]},
//     "output": {"directory": "dpcr-out", "formats": ["json", "csv", "checkpoint"]},
//     "threads": 0                                     0 = machine parallelism
//   }

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpcr/drift_sim.hpp"
#include "dpcr/protocol.hpp"

namespace dpcr {

struct SourceConfig {
    enum class Kind { sim, dumps };
    Kind kind = Kind::sim;
    DriftScenario scenario{};
    std::filesystem::path directory;
};

struct AblationConfig {
    std::string preset = "ladder";
    std::vector<std::string> methods;
    std::vector<double> gammas;

    AblationAxes axes() const;
};

struct OutputConfig {
    std::filesystem::path directory = "dpcr-out";
    std::vector<std::string> formats = {"json", "csv", "checkpoint"};

    bool wants(const std::string& format) const;
};

struct RunConfig {
    SourceConfig source;
    MethodVariant method;
    AblationConfig ablation;
    OutputConfig output;
    std::size_t threads = 0;

    /// Resolved thread count (0 maps to hardware concurrency).
    std::size_t effective_threads() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& doc);
    static RunConfig load(const std::filesystem::path& path);
};

/// Command-line flags; applied after the file so flags win.
struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> method;
    std::optional<double> gamma;
    std::optional<std::size_t> threads;
    std::optional<std::filesystem::path> out;

    void apply(RunConfig& config) const;
};

}  // namespace dpcr
