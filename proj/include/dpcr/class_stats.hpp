#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "dpcr/numerics.hpp"

namespace dpcr {

using ClassId = std::uint32_t;
using TaskIndex = std::uint32_t;  // 1-based

/// Sufficient statistics of one class: uncentered covariance X^T X, mean row
/// and sample count. Immutable by convention once built.
struct ClassStatistics {
    ClassId class_id = 0;
    std::size_t count = 0;
    Matrix covariance;     // d x d
    RowVector prototype;   // 1 x d

    Eigen::Index dim() const { return prototype.size(); }
};

/// Number of stored scalars per class: covariance, prototype and count.
constexpr std::size_t scalars_per_class(std::size_t dim) {
    return dim * dim + dim + 1;
}

ClassStatistics accumulate_class_stats(const Matrix& embeddings, ClassId class_id);

/// Splits a labeled block into per-class statistics, ordered by class id.
std::vector<ClassStatistics> accumulate_by_label(const Matrix& embeddings,
                                                 std::span<const ClassId> labels);

/// d x total_classes correlation block X_c^T Y_c = N_c * mu_c^T e_c.
Matrix correlation_block(const ClassStatistics& stats, std::size_t total_classes);

struct StatsKey {
    TaskIndex task = 0;
    ClassId class_id = 0;
    auto operator<=>(const StatsKey&) const = default;
};

/// Continually calibrated statistics of every class seen so far.
class InformationSet {
public:
    InformationSet() = default;
    explicit InformationSet(Eigen::Index dim) : dim_(dim) {}

    Eigen::Index dim() const { return dim_; }
    TaskIndex task_count() const { return task_count_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    const std::map<StatsKey, ClassStatistics>& entries() const { return entries_; }
    bool contains_class(ClassId id) const { return class_ids_.contains(id); }

    /// Largest class id + 1, or 0 when empty.
    std::size_t class_span() const;

    /// Stored scalars, checked against scalars_per_class for every entry.
    std::size_t stored_scalars() const;

    /// Appends the classes of a new task (task index task_count() + 1).
    /// Existing entries are left untouched.
    InformationSet insert_task(std::vector<ClassStatistics> new_stats) const;

    /// Replaces the statistics of an existing entry. Used by calibration.
    void replace(const StatsKey& key, ClassStatistics stats);

    // Checkpoint restore path; validates dims and uniqueness.
    static InformationSet from_entries(Eigen::Index dim, TaskIndex task_count,
                                       std::vector<std::pair<StatsKey, ClassStatistics>> entries);

private:
    Eigen::Index dim_ = 0;
    TaskIndex task_count_ = 0;
    std::map<StatsKey, ClassStatistics> entries_;
    std::set<ClassId> class_ids_;
};

InformationSet insert_task(const InformationSet& set, std::vector<ClassStatistics> new_stats);

}  // namespace dpcr
