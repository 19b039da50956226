#pragma once

// Exemplar-free class-incremental protocol over an embedding source.
//
// Per task t: fit the task-wise projection on the paired task-t features
// (t >= 2), calibrate every stored class, accumulate the new classes,
// reconstruct the ridge head (optionally normalized) and evaluate on the
// test sets of tasks 1..t under the current backbone.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpcr/class_stats.hpp"
#include "dpcr/classifier.hpp"
#include "dpcr/drift_sim.hpp"
#include "dpcr/ingestion.hpp"
#include "dpcr/numerics.hpp"
#include "dpcr/shift_estimation.hpp"

namespace dpcr {

enum class MethodName { rrcr, rrcr_tssp, rrcr_tssp_cip, dpcr, dp_ncm, ncm_raw, frozen_ridge };

const char* display_name(MethodName name);
/// Case-insensitive; accepts the display names plus "rrcr+tssp+cip+cn".
MethodName method_from_string(const std::string& name);

struct MethodVariant {
    MethodName name = MethodName::dpcr;
    double gamma = kDefaultGamma;
    double eps = kDefaultTsspEps;
    RankPolicy rank_policy{};

    std::optional<CalibrationMode> calibration() const;
    bool normalizes() const;
    bool uses_ncm() const;
    bool frozen_backbone() const;
    void validate() const;
};

/// Supplies features of task `task` extracted by backbone `backbone`.
class EmbeddingSource {
public:
    virtual ~EmbeddingSource() = default;
    virtual std::size_t task_count() const = 0;
    virtual std::size_t dim() const = 0;
    virtual LabeledEmbeddings train(TaskIndex task, TaskIndex backbone) = 0;
    virtual LabeledEmbeddings test(TaskIndex task, TaskIndex backbone) = 0;
    virtual std::string describe() const = 0;
};

class SimulatorSource final : public EmbeddingSource {
public:
    explicit SimulatorSource(DriftScenario scenario);

    std::size_t task_count() const override { return scenario_.tasks; }
    std::size_t dim() const override { return scenario_.dim; }
    LabeledEmbeddings train(TaskIndex task, TaskIndex backbone) override;
    LabeledEmbeddings test(TaskIndex task, TaskIndex backbone) override;
    std::string describe() const override;

    const DriftScenario& scenario() const { return scenario_; }

private:
    DriftScenario scenario_;
};

class DumpSource final : public EmbeddingSource {
public:
    explicit DumpSource(StreamLayout layout);

    std::size_t task_count() const override { return layout_.tasks; }
    std::size_t dim() const override { return dim_; }
    LabeledEmbeddings train(TaskIndex task, TaskIndex backbone) override;
    LabeledEmbeddings test(TaskIndex task, TaskIndex backbone) override;
    std::string describe() const override;

private:
    LabeledEmbeddings load(TaskIndex task, TaskIndex backbone, Split split);

    StreamLayout layout_;
    std::size_t dim_ = 0;
};

/// Wraps a source and refuses training features of any task other than the
/// current one; every training request is logged.
class EfcilGuard final : public EmbeddingSource {
public:
    explicit EfcilGuard(EmbeddingSource& inner) : inner_(inner) {}

    void begin_task(TaskIndex task) { current_ = task; }

    std::size_t task_count() const override { return inner_.task_count(); }
    std::size_t dim() const override { return inner_.dim(); }
    LabeledEmbeddings train(TaskIndex task, TaskIndex backbone) override;
    LabeledEmbeddings test(TaskIndex task, TaskIndex backbone) override;
    std::string describe() const override { return inner_.describe(); }

    struct Request {
        TaskIndex during = 0;
        TaskIndex task = 0;
        TaskIndex backbone = 0;
    };
    const std::vector<Request>& train_requests() const { return requests_; }

private:
    EmbeddingSource& inner_;
    TaskIndex current_ = 0;
    std::vector<Request> requests_;
};

struct OldNewSplit {
    std::optional<double> old_accuracy;  // empty after the first task
    double new_accuracy = 0.0;
};

struct Metrics {
    double final_accuracy = 0.0;        // A_f
    double average_incremental = 0.0;   // A_avg
    std::vector<double> per_task;       // A_t
    std::vector<OldNewSplit> old_new;
};

/// accuracy[t][i] (0-based) = accuracy on task i after learning task t.
Metrics compute_metrics(const std::vector<std::vector<double>>& accuracy,
                        const std::vector<std::size_t>& test_counts);

struct PhaseTimes {
    double shift_ms = 0.0;
    double calibrate_ms = 0.0;
    double stats_ms = 0.0;
    double reconstruct_ms = 0.0;
    double evaluate_ms = 0.0;
};

struct ProtocolResult {
    MethodVariant variant;
    std::vector<std::vector<double>> accuracy;
    std::vector<std::size_t> test_counts;
    Metrics metrics;
    std::vector<PhaseTimes> timing;  // one entry per task

    InformationSet information;                // state after the final task
    std::optional<ClassifierWeights> classifier;

    std::size_t persistent_scalars() const;
};

struct RunOptions {
    std::size_t threads = 1;
};

ProtocolResult run_protocol(EmbeddingSource& source, const MethodVariant& variant,
                            const RunOptions& options = {});

struct AblationAxes {
    std::vector<MethodName> methods;
    std::vector<double> gammas;

    /// RRCR, RRCR+TSSP, RRCR+TSSP+CIP, DPCR.
    static AblationAxes ladder();
    /// gamma in {1, 10, 100, 1000} x {DPCR (CN on), RRCR+TSSP+CIP (CN off)}.
    static AblationAxes gamma_sweep();
};

struct GridRow {
    MethodVariant variant;
    bool ok = false;
    std::string error;
    Metrics metrics;
    std::vector<std::vector<double>> accuracy;
};

using SourceFactory = std::function<std::unique_ptr<EmbeddingSource>()>;

/// One independent run per (gamma, method) cell, gamma ascending then
/// methods in axis order. A failing cell is recorded, not rethrown.
std::vector<GridRow> ablation_grid(const SourceFactory& make_source, const MethodVariant& base,
                                   const AblationAxes& axes, const RunOptions& options = {});

}  // namespace dpcr
