#pragma once

#include <cstddef>
#include <vector>

#include "dpcr/class_stats.hpp"
#include "dpcr/numerics.hpp"

namespace dpcr {

inline constexpr double kDefaultGamma = 200.0;

/// Linear head, one column per global class id (column j scores class j).
struct ClassifierWeights {
    Matrix matrix;  // d x L
    bool normalized = false;

    std::size_t dim() const { return static_cast<std::size_t>(matrix.rows()); }
    std::size_t classes() const { return static_cast<std::size_t>(matrix.cols()); }
    std::size_t stored_scalars() const { return static_cast<std::size_t>(matrix.size()); }
};

/// Ridge reconstruction from the stored (calibrated) classes plus the new
/// task's classes: W = (sum Phi + gamma I)^{-1} sum H.
ClassifierWeights reconstruct_classifier(const InformationSet& set,
                                         const std::vector<ClassStatistics>& new_stats,
                                         double gamma);

/// Divides every nonzero column by its L2 norm.
ClassifierWeights category_normalize(const ClassifierWeights& w);

/// argmax_j x W[:, j]. Ties go to the lowest class id. All-zero columns
/// belong to classes with no data and are never predicted unless every
/// column is zero.
std::vector<ClassId> predict(const ClassifierWeights& w, const Matrix& embeddings);

/// Nearest stored prototype in Euclidean distance; ties go to the lowest
/// class id. Classes with zero samples have no prototype and are skipped.
std::vector<ClassId> ncm_predict(const InformationSet& set, const Matrix& embeddings);

}  // namespace dpcr
