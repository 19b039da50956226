#include "dpcr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "dpcr/error.hpp"

namespace dpcr {

bool all_finite(const Matrix& m) {
    return m.allFinite();
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw InvalidInput(std::string(what) + ": non-finite entry");
    }
}

void require_symmetric(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        std::ostringstream os;
        os << what << ": expected a square matrix, got " << m.rows() << "x" << m.cols();
        throw InvalidInput(os.str());
    }
    const double asym = (m - m.transpose()).norm();
    if (asym > kSymmetryTolerance * std::max(1.0, m.norm())) {
        std::ostringstream os;
        os << what << ": matrix is not symmetric (|M - M^T|_F = " << asym << ")";
        throw InvalidInput(os.str());
    }
}

Matrix spd_solve(const Matrix& m, double ridge, const Matrix& b) {
    require_finite(m, "spd_solve");
    require_finite(b, "spd_solve rhs");
    require_symmetric(m, "spd_solve");
    if (!std::isfinite(ridge) || ridge < 0.0) {
        throw InvalidInput("spd_solve: ridge must be a nonnegative finite value");
    }
    if (b.rows() != m.rows()) {
        std::ostringstream os;
        os << "spd_solve: rhs has " << b.rows() << " rows, system has " << m.rows();
        throw InvalidInput(os.str());
    }
    const Eigen::Index d = m.rows();
    if (d == 0) {
        return Matrix(0, b.cols());
    }

    Matrix shifted = m;
    shifted.diagonal().array() += ridge;

    Eigen::LDLT<Matrix> ldlt(shifted);
    const Vector pivots = ldlt.vectorD();
    const double smallest = pivots.minCoeff();
    const double largest = pivots.cwiseAbs().maxCoeff();
    const double floor = static_cast<double>(d) * std::numeric_limits<double>::epsilon() * largest;
    if (ldlt.info() != Eigen::Success || !(smallest > floor)) {
        std::ostringstream os;
        os << "spd_solve: system is not positive definite (smallest pivot " << smallest
           << ", largest " << largest << ", ridge " << ridge << ")";
        throw SingularSystem(os.str(), smallest);
    }

    Matrix w = ldlt.solve(b);
    // One step of iterative refinement keeps the residual at roundoff level
    // for the mildly ill-conditioned Gram matrices TSSP produces.
    const Matrix residual = b - shifted * w;
    w += ldlt.solve(residual);
    return w;
}

SymEig sym_eig(const Matrix& m) {
    require_finite(m, "sym_eig");
    require_symmetric(m, "sym_eig");
    const Eigen::Index d = m.rows();
    if (d == 0) {
        return {Matrix(0, 0), Vector(0)};
    }
    // Only the lower triangle is read; symmetrize first so tiny asymmetry is
    // split evenly instead of silently dropped.
    const Matrix sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw InvalidInput("sym_eig: eigensolver did not converge");
    }
    SymEig out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    out.values = out.values.cwiseMax(0.0);
    return out;
}

void RankPolicy::validate() const {
    switch (mode) {
    case Mode::relative_threshold:
    case Mode::absolute_threshold:
        if (!(threshold > 0.0) || !std::isfinite(threshold)) {
            throw InvalidInput("rank policy: threshold must be positive");
        }
        break;
    case Mode::fixed_k:
        break;
    }
}

const char* to_string(RankPolicy::Mode mode) {
    switch (mode) {
    case RankPolicy::Mode::relative_threshold: return "relative";
    case RankPolicy::Mode::absolute_threshold: return "absolute";
    case RankPolicy::Mode::fixed_k: return "fixed";
    }
    return "relative";
}

RankPolicy::Mode rank_mode_from_string(const std::string& name) {
    if (name == "relative" || name == "relative-threshold") return RankPolicy::Mode::relative_threshold;
    if (name == "absolute" || name == "absolute-threshold") return RankPolicy::Mode::absolute_threshold;
    if (name == "fixed" || name == "fixed-k") return RankPolicy::Mode::fixed_k;
    throw InvalidInput("unknown rank policy mode '" + name + "'");
}

std::size_t numerical_rank(const Vector& values, const RankPolicy& policy) {
    const auto d = static_cast<std::size_t>(values.size());
    switch (policy.mode) {
    case RankPolicy::Mode::fixed_k:
        return std::min(policy.k, d);
    case RankPolicy::Mode::absolute_threshold: {
        std::size_t r = 0;
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            if (values[i] > policy.threshold) ++r;
        }
        return r;
    }
    case RankPolicy::Mode::relative_threshold: {
        if (d == 0 || values[0] <= 0.0) return 0;
        const double cut = policy.threshold * values[0];
        std::size_t r = 0;
        for (Eigen::Index i = 0; i < values.size(); ++i) {
            if (values[i] > cut) ++r;
        }
        return r;
    }
    }
    return 0;
}

}  // namespace dpcr
