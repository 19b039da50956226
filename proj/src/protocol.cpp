#include "dpcr/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "dpcr/error.hpp"

namespace dpcr {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

double accuracy_of(const std::vector<ClassId>& predicted, const std::vector<ClassId>& truth) {
    if (truth.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace

const char* display_name(MethodName name) {
    switch (name) {
    case MethodName::rrcr: return "RRCR";
    case MethodName::rrcr_tssp: return "RRCR+TSSP";
    case MethodName::rrcr_tssp_cip: return "RRCR+TSSP+CIP";
    case MethodName::dpcr: return "DPCR";
    case MethodName::dp_ncm: return "DP-NCM";
    case MethodName::ncm_raw: return "NCM-RAW";
    case MethodName::frozen_ridge: return "FROZEN-RIDGE";
    }
    return "DPCR";
}

MethodName method_from_string(const std::string& name) {
    const std::string key = lower(name);
    for (MethodName m : {MethodName::rrcr, MethodName::rrcr_tssp, MethodName::rrcr_tssp_cip,
                         MethodName::dpcr, MethodName::dp_ncm, MethodName::ncm_raw,
                         MethodName::frozen_ridge}) {
        if (key == lower(display_name(m))) return m;
    }
    if (key == "rrcr+tssp+cip+cn") return MethodName::dpcr;
    throw InvalidInput("unknown method '" + name +
                       "' (expected one of RRCR, RRCR+TSSP, RRCR+TSSP+CIP, DPCR, DP-NCM, NCM-RAW, "
                       "FROZEN-RIDGE)");
}

std::optional<CalibrationMode> MethodVariant::calibration() const {
    switch (name) {
    case MethodName::rrcr_tssp: return CalibrationMode::task_wise;
    case MethodName::rrcr_tssp_cip:
    case MethodName::dpcr:
    case MethodName::dp_ncm: return CalibrationMode::dual;
    default: return std::nullopt;
    }
}

bool MethodVariant::normalizes() const {
    return name == MethodName::dpcr || name == MethodName::frozen_ridge;
}

bool MethodVariant::uses_ncm() const {
    return name == MethodName::dp_ncm || name == MethodName::ncm_raw;
}

bool MethodVariant::frozen_backbone() const { return name == MethodName::frozen_ridge; }

void MethodVariant::validate() const {
    if (!std::isfinite(gamma) || gamma < 0.0) {
        throw InvalidInput("method: gamma must be a nonnegative finite value");
    }
    if (!std::isfinite(eps) || !(eps > 0.0)) {
        throw InvalidInput("method: eps must be positive");
    }
    rank_policy.validate();
}

SimulatorSource::SimulatorSource(DriftScenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();
}

LabeledEmbeddings SimulatorSource::train(TaskIndex task, TaskIndex backbone) {
    return embed(scenario_, task, Split::train, backbone);
}

LabeledEmbeddings SimulatorSource::test(TaskIndex task, TaskIndex backbone) {
    return embed(scenario_, task, Split::test, backbone);
}

std::string SimulatorSource::describe() const {
    std::ostringstream os;
    os << "sim(seed=" << scenario_.seed << ", d=" << scenario_.dim << ", T=" << scenario_.tasks
       << ", C=" << scenario_.classes_per_task << ", drift=" << to_string(scenario_.drift_kind) << ")";
    return os.str();
}

DumpSource::DumpSource(StreamLayout layout) : layout_(std::move(layout)) {
    DumpReader first(layout_.path(1, 1, Split::train));
    dim_ = first.header().dim;
}

LabeledEmbeddings DumpSource::load(TaskIndex task, TaskIndex backbone, Split split) {
    EmbeddingDump dump = read_dump(layout_.path(task, backbone, split));
    if (dump.dim != dim_) {
        std::ostringstream os;
        os << "'" << layout_.path(task, backbone, split).string() << "' has dimension " << dump.dim
           << ", stream has " << dim_;
        throw FormatError(os.str());
    }
    return {std::move(dump.embeddings), std::move(dump.labels)};
}

LabeledEmbeddings DumpSource::train(TaskIndex task, TaskIndex backbone) {
    return load(task, backbone, Split::train);
}

LabeledEmbeddings DumpSource::test(TaskIndex task, TaskIndex backbone) {
    return load(task, backbone, Split::test);
}

std::string DumpSource::describe() const {
    return "dumps(" + layout_.directory.string() + ", T=" + std::to_string(layout_.tasks) + ")";
}

LabeledEmbeddings EfcilGuard::train(TaskIndex task, TaskIndex backbone) {
    if (task != current_) {
        std::ostringstream os;
        os << "training features of task " << task << " requested while learning task " << current_
           << "; past training data is not available";
        throw ProtocolViolation(os.str());
    }
    requests_.push_back({current_, task, backbone});
    return inner_.train(task, backbone);
}

LabeledEmbeddings EfcilGuard::test(TaskIndex task, TaskIndex backbone) {
    if (task > current_) {
        throw ProtocolViolation("test features of future task " + std::to_string(task) + " requested");
    }
    return inner_.test(task, backbone);
}

Metrics compute_metrics(const std::vector<std::vector<double>>& accuracy,
                        const std::vector<std::size_t>& test_counts) {
    const std::size_t tasks = accuracy.size();
    if (tasks == 0) throw InvalidInput("compute_metrics: empty accuracy matrix");
    if (test_counts.size() != tasks) {
        throw InvalidInput("compute_metrics: need one test count per task");
    }
    for (std::size_t t = 0; t < tasks; ++t) {
        if (accuracy[t].size() != t + 1) {
            std::ostringstream os;
            os << "compute_metrics: row " << t + 1 << " has " << accuracy[t].size()
               << " entries, expected " << t + 1 << " (lower-triangular)";
            throw InvalidInput(os.str());
        }
        for (double a : accuracy[t]) {
            if (!std::isfinite(a) || a < 0.0 || a > 1.0) {
                throw InvalidInput("compute_metrics: accuracies must lie in [0, 1]");
            }
        }
        if (test_counts[t] == 0) throw InvalidInput("compute_metrics: test counts must be positive");
    }

    Metrics m;
    for (std::size_t t = 0; t < tasks; ++t) {
        double weighted = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i <= t; ++i) {
            weighted += accuracy[t][i] * static_cast<double>(test_counts[i]);
            total += static_cast<double>(test_counts[i]);
        }
        m.per_task.push_back(weighted / total);

        OldNewSplit split;
        split.new_accuracy = accuracy[t][t];
        if (t > 0) {
            double old_weighted = 0.0;
            double old_total = 0.0;
            for (std::size_t i = 0; i < t; ++i) {
                old_weighted += accuracy[t][i] * static_cast<double>(test_counts[i]);
                old_total += static_cast<double>(test_counts[i]);
            }
            split.old_accuracy = old_weighted / old_total;
        }
        m.old_new.push_back(split);
    }
    m.final_accuracy = m.per_task.back();
    double sum = 0.0;
    for (double a : m.per_task) sum += a;
    m.average_incremental = sum / static_cast<double>(tasks);
    return m;
}

std::size_t ProtocolResult::persistent_scalars() const {
    return information.stored_scalars() + (classifier ? classifier->stored_scalars() : 0);
}

ProtocolResult run_protocol(EmbeddingSource& source, const MethodVariant& variant,
                            const RunOptions& options) {
    variant.validate();
    const std::size_t tasks = source.task_count();
    if (tasks == 0) throw InvalidInput("run_protocol: source has no tasks");

    EfcilGuard guard(source);
    ProtocolResult result;
    result.variant = variant;
    InformationSet info(static_cast<Eigen::Index>(source.dim()));
    std::optional<ClassifierWeights> head;
    const auto calibration = variant.calibration();

    for (TaskIndex t = 1; t <= tasks; ++t) {
        guard.begin_task(t);
        PhaseTimes times;
        const TaskIndex backbone = variant.frozen_backbone() ? 1 : t;
        auto context = [&](const std::exception& e) {
            std::ostringstream os;
            os << "task " << t << ": " << e.what();
            return os.str();
        };

        try {
            const LabeledEmbeddings curr = guard.train(t, backbone);

            if (t >= 2 && calibration && !info.empty()) {
                auto start = Clock::now();
                const LabeledEmbeddings prev = guard.train(t, t - 1);
                if (prev.labels != curr.labels) {
                    throw InvalidInput("paired training features under backbones " +
                                       std::to_string(t - 1) + " and " + std::to_string(t) +
                                       " do not list the same samples");
                }
                const ShiftProjection p = fit_tssp(prev.x, curr.x, variant.eps);
                times.shift_ms = elapsed_ms(start);

                start = Clock::now();
                info = calibrate_information_set(
                    info, p, CalibrationOptions{*calibration, variant.rank_policy, options.threads});
                times.calibrate_ms = elapsed_ms(start);
            }

            auto start = Clock::now();
            std::vector<ClassStatistics> fresh = accumulate_by_label(curr.x, curr.labels);
            times.stats_ms = elapsed_ms(start);

            if (!variant.uses_ncm()) {
                start = Clock::now();
                ClassifierWeights w = reconstruct_classifier(info, fresh, variant.gamma);
                head = variant.normalizes() ? category_normalize(w) : std::move(w);
                times.reconstruct_ms = elapsed_ms(start);
            }
            const std::size_t before = info.size();
            info = info.insert_task(std::move(fresh));

            // Only class statistics survive a task; the features are dropped here.
            if (info.task_count() != t || info.size() < before) {
                throw ProtocolViolation("information set was not updated exactly once");
            }

            start = Clock::now();
            std::vector<double> row;
            for (TaskIndex i = 1; i <= t; ++i) {
                const LabeledEmbeddings test = guard.test(i, backbone);
                const auto predicted = variant.uses_ncm() ? ncm_predict(info, test.x)
                                                          : predict(*head, test.x);
                row.push_back(accuracy_of(predicted, test.labels));
                if (i == t) result.test_counts.push_back(test.labels.size());
            }
            result.accuracy.push_back(std::move(row));
            times.evaluate_ms = elapsed_ms(start);
        } catch (const SingularSystem& e) {
            throw SingularSystem(context(e), e.smallest_pivot());
        } catch (const ProtocolViolation&) {
            throw;
        } catch (const MissingFile& e) {
            throw MissingFile(context(e));
        } catch (const FormatError& e) {
            throw FormatError(context(e));
        } catch (const IoError& e) {
            throw IoError(context(e));
        } catch (const Conflict& e) {
            throw Conflict(context(e));
        } catch (const Error& e) {
            throw InvalidInput(context(e));
        }
        result.timing.push_back(times);
    }

    result.metrics = compute_metrics(result.accuracy, result.test_counts);
    result.information = std::move(info);
    result.classifier = std::move(head);
    return result;
}

AblationAxes AblationAxes::ladder() {
    return {{MethodName::rrcr, MethodName::rrcr_tssp, MethodName::rrcr_tssp_cip, MethodName::dpcr}, {}};
}

AblationAxes AblationAxes::gamma_sweep() {
    return {{MethodName::dpcr, MethodName::rrcr_tssp_cip}, {1.0, 10.0, 100.0, 1000.0}};
}

std::vector<GridRow> ablation_grid(const SourceFactory& make_source, const MethodVariant& base,
                                   const AblationAxes& axes, const RunOptions& options) {
    if (axes.methods.empty() && axes.gammas.empty()) {
        throw InvalidInput("ablation_grid: at least one axis must be nonempty");
    }
    std::vector<MethodName> methods = axes.methods;
    if (methods.empty()) methods.push_back(base.name);
    std::vector<double> gammas = axes.gammas;
    if (gammas.empty()) gammas.push_back(base.gamma);
    std::stable_sort(gammas.begin(), gammas.end());

    std::vector<GridRow> rows;
    for (double g : gammas) {
        for (MethodName m : methods) {
            GridRow row;
            row.variant = base;
            row.variant.name = m;
            row.variant.gamma = g;
            rows.push_back(std::move(row));
        }
    }

    auto run_cell = [&](GridRow& row) {
        try {
            auto source = make_source();
            ProtocolResult r = run_protocol(*source, row.variant, RunOptions{1});
            row.metrics = std::move(r.metrics);
            row.accuracy = std::move(r.accuracy);
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, rows.size()));
    if (threads == 1) {
        for (auto& row : rows) run_cell(row);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < rows.size(); i = next++) run_cell(rows[i]);
            });
        }
    }
    return rows;
}

}  // namespace dpcr
