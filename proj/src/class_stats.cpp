#include "dpcr/class_stats.hpp"

#include <sstream>
#include <string>

#include "dpcr/error.hpp"

namespace dpcr {

ClassStatistics accumulate_class_stats(const Matrix& embeddings, ClassId class_id) {
    require_finite(embeddings, "accumulate_class_stats");
    const Eigen::Index d = embeddings.cols();
    ClassStatistics s;
    s.class_id = class_id;
    s.count = static_cast<std::size_t>(embeddings.rows());
    s.covariance = Matrix::Zero(d, d);
    s.prototype = RowVector::Zero(d);
    // Row-ascending rank-1 updates; the order is fixed for reproducibility.
    for (Eigen::Index j = 0; j < embeddings.rows(); ++j) {
        const auto x = embeddings.row(j);
        s.covariance.noalias() += x.transpose() * x;
        s.prototype += x;
    }
    if (s.count > 0) {
        s.prototype /= static_cast<double>(s.count);
    }
    return s;
}

std::vector<ClassStatistics> accumulate_by_label(const Matrix& embeddings,
                                                 std::span<const ClassId> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows()) {
        std::ostringstream os;
        os << "accumulate_by_label: " << labels.size() << " labels for " << embeddings.rows()
           << " rows";
        throw InvalidInput(os.str());
    }
    std::map<ClassId, std::vector<Eigen::Index>> rows_by_class;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        rows_by_class[labels[j]].push_back(static_cast<Eigen::Index>(j));
    }
    std::vector<ClassStatistics> out;
    out.reserve(rows_by_class.size());
    for (const auto& [id, rows] : rows_by_class) {
        Matrix block(static_cast<Eigen::Index>(rows.size()), embeddings.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            block.row(static_cast<Eigen::Index>(r)) = embeddings.row(rows[r]);
        }
        out.push_back(accumulate_class_stats(block, id));
    }
    return out;
}

Matrix correlation_block(const ClassStatistics& stats, std::size_t total_classes) {
    if (stats.class_id >= total_classes) {
        std::ostringstream os;
        os << "correlation_block: class id " << stats.class_id << " out of range for "
           << total_classes << " classes";
        throw InvalidInput(os.str());
    }
    Matrix h = Matrix::Zero(stats.dim(), static_cast<Eigen::Index>(total_classes));
    h.col(stats.class_id) = static_cast<double>(stats.count) * stats.prototype.transpose();
    return h;
}

std::size_t InformationSet::class_span() const {
    return class_ids_.empty() ? 0 : static_cast<std::size_t>(*class_ids_.rbegin()) + 1;
}

std::size_t InformationSet::stored_scalars() const {
    std::size_t total = 0;
    for (const auto& [key, s] : entries_) {
        const auto scalars = static_cast<std::size_t>(s.covariance.size() + s.prototype.size()) + 1;
        if (scalars != scalars_per_class(static_cast<std::size_t>(dim_))) {
            throw InvalidInput("information set entry has inconsistent storage");
        }
        total += scalars;
    }
    return total;
}

namespace {

void check_stats_shape(const ClassStatistics& s, Eigen::Index dim) {
    if (s.prototype.size() != dim || s.covariance.rows() != dim || s.covariance.cols() != dim) {
        std::ostringstream os;
        os << "class " << s.class_id << ": statistics have dimension " << s.prototype.size()
           << ", information set has " << dim;
        throw InvalidInput(os.str());
    }
}

}  // namespace

InformationSet InformationSet::insert_task(std::vector<ClassStatistics> new_stats) const {
    InformationSet out = *this;
    if (out.entries_.empty() && out.dim_ == 0 && !new_stats.empty()) {
        out.dim_ = new_stats.front().dim();
    }
    const TaskIndex task = task_count_ + 1;
    std::set<ClassId> seen;
    for (const auto& s : new_stats) {
        check_stats_shape(s, out.dim_);
        if (out.class_ids_.contains(s.class_id) || !seen.insert(s.class_id).second) {
            throw Conflict("class id " + std::to_string(s.class_id) +
                           " is already present in the information set");
        }
    }
    for (auto& s : new_stats) {
        out.class_ids_.insert(s.class_id);
        const StatsKey key{task, s.class_id};
        out.entries_.emplace(key, std::move(s));
    }
    out.task_count_ = task;
    return out;
}

void InformationSet::replace(const StatsKey& key, ClassStatistics stats) {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw InvalidInput("information set has no entry for class " + std::to_string(key.class_id));
    }
    check_stats_shape(stats, dim_);
    if (stats.class_id != key.class_id) {
        throw InvalidInput("replacement statistics carry a different class id");
    }
    it->second = std::move(stats);
}

InformationSet InformationSet::from_entries(
    Eigen::Index dim, TaskIndex task_count,
    std::vector<std::pair<StatsKey, ClassStatistics>> entries) {
    InformationSet out(dim);
    out.task_count_ = task_count;
    for (auto& [key, s] : entries) {
        check_stats_shape(s, dim);
        if (key.task == 0 || key.task > task_count) {
            throw InvalidInput("information set entry refers to task " + std::to_string(key.task) +
                               " outside 1.." + std::to_string(task_count));
        }
        if (!out.class_ids_.insert(key.class_id).second) {
            throw Conflict("class id " + std::to_string(key.class_id) + " appears twice");
        }
        out.entries_.emplace(key, std::move(s));
    }
    return out;
}

InformationSet insert_task(const InformationSet& set, std::vector<ClassStatistics> new_stats) {
    return set.insert_task(std::move(new_stats));
}

}  // namespace dpcr
