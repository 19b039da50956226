#pragma once

// Semantic-shift estimation between consecutive backbones.
//
// The task-wise projection P maps current-task embeddings extracted by the
// previous backbone onto those extracted by the current one (ridge least
// squares). The category projector Pi = U_r U_r^T restricts it to the row
// space of one class, and stored class statistics are calibrated by the
// product P * Pi.

#include <cstddef>

#include "dpcr/class_stats.hpp"
#include "dpcr/numerics.hpp"

namespace dpcr {

inline constexpr double kDefaultTsspEps = 1e-9;

struct ShiftProjection {
    enum class Kind { task_wise, category_projector, dual };

    Matrix matrix;
    Kind kind = Kind::task_wise;
};

const char* to_string(ShiftProjection::Kind kind);

/// P = (X_prev^T X_prev + eps I)^{-1} X_prev^T X_curr.
ShiftProjection fit_tssp(const Matrix& x_prev, const Matrix& x_curr, double eps = kDefaultTsspEps);

ShiftProjection cip_projector(const Matrix& covariance, const RankPolicy& policy = {});

/// P * Pi.
ShiftProjection dual_projection(const ShiftProjection& task_wise, const ShiftProjection& category);

/// Phi' = proj^T Phi proj, mu' = mu proj; count unchanged.
ClassStatistics calibrate_class(const ClassStatistics& stats, const ShiftProjection& proj);

enum class CalibrationMode {
    task_wise,  // every class calibrated by P alone
    dual,       // per-class P * Pi
};

struct CalibrationOptions {
    CalibrationMode mode = CalibrationMode::dual;
    RankPolicy rank_policy{};
    std::size_t threads = 1;
};

/// Calibrates every stored class for one backbone transition. Results are
/// independent of the thread count.
InformationSet calibrate_information_set(const InformationSet& set, const ShiftProjection& task_wise,
                                         const RankPolicy& policy = {});

InformationSet calibrate_information_set(const InformationSet& set, const ShiftProjection& task_wise,
                                         const CalibrationOptions& options);

}  // namespace dpcr
