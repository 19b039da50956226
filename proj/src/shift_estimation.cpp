#include "dpcr/shift_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dpcr/error.hpp"

namespace dpcr {

const char* to_string(ShiftProjection::Kind kind) {
    switch (kind) {
    case ShiftProjection::Kind::task_wise: return "task-wise";
    case ShiftProjection::Kind::category_projector: return "category-projector";
    case ShiftProjection::Kind::dual: return "dual";
    }
    return "task-wise";
}

ShiftProjection fit_tssp(const Matrix& x_prev, const Matrix& x_curr, double eps) {
    if (x_prev.rows() != x_curr.rows()) {
        std::ostringstream os;
        os << "fit_tssp: previous-backbone block has " << x_prev.rows()
           << " rows, current-backbone block has " << x_curr.rows();
        throw InvalidInput(os.str());
    }
    if (x_prev.cols() != x_curr.cols()) {
        throw InvalidInput("fit_tssp: embedding dimensions differ between backbones");
    }
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw InvalidInput("fit_tssp: eps must be positive");
    }
    require_finite(x_prev, "fit_tssp previous embeddings");
    require_finite(x_curr, "fit_tssp current embeddings");

    const Matrix gram = x_prev.transpose() * x_prev;
    const Matrix cross = x_prev.transpose() * x_curr;
    return {spd_solve(0.5 * (gram + gram.transpose()), eps, cross), ShiftProjection::Kind::task_wise};
}

ShiftProjection cip_projector(const Matrix& covariance, const RankPolicy& policy) {
    policy.validate();
    const SymEig eig = sym_eig(covariance);
    const auto r = static_cast<Eigen::Index>(numerical_rank(eig.values, policy));
    const auto basis = eig.vectors.leftCols(r);
    Matrix pi = basis * basis.transpose();
    pi = 0.5 * (pi + pi.transpose());
    return {std::move(pi), ShiftProjection::Kind::category_projector};
}

ShiftProjection dual_projection(const ShiftProjection& task_wise, const ShiftProjection& category) {
    if (task_wise.kind != ShiftProjection::Kind::task_wise) {
        throw InvalidInput(std::string("dual_projection: expected a task-wise projection, got ") +
                           to_string(task_wise.kind));
    }
    if (category.kind != ShiftProjection::Kind::category_projector) {
        throw InvalidInput(std::string("dual_projection: expected a category projector, got ") +
                           to_string(category.kind));
    }
    if (task_wise.matrix.rows() != category.matrix.rows() ||
        task_wise.matrix.cols() != category.matrix.cols()) {
        throw InvalidInput("dual_projection: projection shapes differ");
    }
    return {task_wise.matrix * category.matrix, ShiftProjection::Kind::dual};
}

ClassStatistics calibrate_class(const ClassStatistics& stats, const ShiftProjection& proj) {
    const Eigen::Index d = stats.dim();
    if (proj.matrix.rows() != d || proj.matrix.cols() != d) {
        std::ostringstream os;
        os << "calibrate_class: projection is " << proj.matrix.rows() << "x" << proj.matrix.cols()
           << ", statistics have dimension " << d;
        throw InvalidInput(os.str());
    }
    require_finite(proj.matrix, "calibrate_class projection");

    ClassStatistics out;
    out.class_id = stats.class_id;
    out.count = stats.count;
    Matrix cov = proj.matrix.transpose() * stats.covariance * proj.matrix;
    const double asym = (cov - cov.transpose()).norm();
    if (asym > kSymmetryTolerance * std::max(1.0, cov.norm())) {
        std::ostringstream os;
        os << "calibrate_class: calibrated covariance of class " << stats.class_id
           << " drifted from symmetry by " << asym;
        throw InvalidInput(os.str());
    }
    out.covariance = 0.5 * (cov + cov.transpose());
    out.prototype = stats.prototype * proj.matrix;
    return out;
}

InformationSet calibrate_information_set(const InformationSet& set, const ShiftProjection& task_wise,
                                         const RankPolicy& policy) {
    return calibrate_information_set(set, task_wise, CalibrationOptions{CalibrationMode::dual, policy, 1});
}

InformationSet calibrate_information_set(const InformationSet& set, const ShiftProjection& task_wise,
                                         const CalibrationOptions& options) {
    if (task_wise.kind != ShiftProjection::Kind::task_wise) {
        throw InvalidInput("calibrate_information_set: expected a task-wise projection");
    }
    const Eigen::Index d = set.dim();
    if (!set.empty() && (task_wise.matrix.rows() != d || task_wise.matrix.cols() != d)) {
        std::ostringstream os;
        os << "calibrate_information_set: projection is " << task_wise.matrix.rows() << "x"
           << task_wise.matrix.cols() << ", information set has dimension " << d;
        throw InvalidInput(os.str());
    }
    options.rank_policy.validate();

    std::vector<const std::pair<const StatsKey, ClassStatistics>*> items;
    items.reserve(set.size());
    for (const auto& entry : set.entries()) items.push_back(&entry);

    std::vector<ClassStatistics> results(items.size());
    std::vector<std::exception_ptr> failures(items.size());

    auto work = [&](std::size_t idx) {
        const auto& [key, stats] = *items[idx];
        try {
            if (options.mode == CalibrationMode::dual) {
                const ShiftProjection pi = cip_projector(stats.covariance, options.rank_policy);
                results[idx] = calibrate_class(stats, dual_projection(task_wise, pi));
            } else {
                results[idx] = calibrate_class(stats, task_wise);
            }
        } catch (const std::exception& e) {
            std::ostringstream os;
            os << "calibrating task " << key.task << " class " << key.class_id << ": " << e.what();
            failures[idx] = std::make_exception_ptr(InvalidInput(os.str()));
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, items.size()));
    if (threads == 1) {
        for (std::size_t i = 0; i < items.size(); ++i) work(i);
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < items.size(); i += threads) work(i);
            });
        }
    }

    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }

    InformationSet out = set;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.replace(items[i]->first, std::move(results[i]));
    }
    return out;
}

}  // namespace dpcr
