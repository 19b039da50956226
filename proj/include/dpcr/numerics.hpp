#pragma once

// Dense kernels shared by every other module: regularized symmetric solves,
// symmetric eigendecomposition and numerical rank.
//
// Embeddings are stored one sample per row, so a block of n samples in
// dimension d is an n x d matrix and linear maps act by right-multiplication.

#include <cstddef>
#include <string>

#include <Eigen/Dense>

namespace dpcr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Absolute symmetry slack used by every "symmetric within 1e-8" check, scaled
// by the matrix magnitude so large uncentered covariances are not rejected
// over rounding: |M - M^T|_F <= 1e-8 * max(1, |M|_F).
inline constexpr double kSymmetryTolerance = 1e-8;

bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const char* what);
void require_symmetric(const Matrix& m, const char* what);

/// Solves (M + ridge*I) W = B for symmetric PSD M via a pivoted LDL^T
/// factorization. Throws SingularSystem if the shifted matrix is not
/// numerically positive definite.
Matrix spd_solve(const Matrix& m, double ridge, const Matrix& b);

/// Eigendecomposition of a symmetric PSD matrix, values nonincreasing and
/// clamped at zero, vectors orthonormal in the matching column order.
struct SymEig {
    Matrix vectors;
    Vector values;
};

SymEig sym_eig(const Matrix& m);

struct RankPolicy {
    enum class Mode { relative_threshold, absolute_threshold, fixed_k };

    Mode mode = Mode::relative_threshold;
    double threshold = 1e-6;
    std::size_t k = 0;

    static RankPolicy relative(double threshold) { return {Mode::relative_threshold, threshold, 0}; }
    static RankPolicy absolute(double threshold) { return {Mode::absolute_threshold, threshold, 0}; }
    static RankPolicy fixed(std::size_t k) { return {Mode::fixed_k, 0.0, k}; }

    void validate() const;
};

const char* to_string(RankPolicy::Mode mode);
RankPolicy::Mode rank_mode_from_string(const std::string& name);

// values must be nonincreasing and nonnegative.
std::size_t numerical_rank(const Vector& values, const RankPolicy& policy);

}  // namespace dpcr
