#include <doctest.h>

#include <cmath>

#include "dpcr/error.hpp"
#include "dpcr/shift_estimation.hpp"
#include "test_support.hpp"

using namespace dpcr;
using dpcr::testing::random_matrix;
using dpcr::testing::random_orthogonal;

namespace {

double tssp_objective(const Matrix& prev, const Matrix& curr, const Matrix& p, double eps) {
    return (curr - prev * p).squaredNorm() + eps * p.squaredNorm();
}

// Full-rank class-like data: shifted Gaussian cloud.
Matrix class_cloud(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
    Matrix x = random_matrix(rng, n, d);
    const RowVector offset = random_matrix(rng, 1, d, 3.0);
    x.rowwise() += offset;
    return x;
}

}  // namespace

TEST_CASE("fit_tssp: identical features give the identity") {
    std::mt19937_64 rng(31);
    const Matrix x = random_matrix(rng, 64, 8);
    const ShiftProjection p = fit_tssp(x, x);
    CHECK(p.kind == ShiftProjection::Kind::task_wise);
    CHECK((p.matrix - Matrix::Identity(8, 8)).norm() < 1e-6);
}

TEST_CASE("fit_tssp: recovers an orthogonal drift map") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = random_matrix(rng, 64, 8);
        const Eigen::JacobiSVD<Matrix> svd(x);
        REQUIRE(svd.singularValues()(0) / svd.singularValues()(7) < 100.0);
        const Matrix a = random_orthogonal(rng, 8);
        const ShiftProjection p = fit_tssp(x, x * a);
        CHECK((p.matrix - a).norm() <= 1e-5);
    }
}

TEST_CASE("fit_tssp: zero previous features give a zero map") {
    std::mt19937_64 rng(33);
    const ShiftProjection p = fit_tssp(Matrix::Zero(20, 5), random_matrix(rng, 20, 5));
    CHECK(p.matrix.norm() == 0.0);
}

TEST_CASE("fit_tssp: error paths") {
    CHECK_THROWS_AS(fit_tssp(Matrix::Ones(4, 3), Matrix::Ones(5, 3)), InvalidInput);
    Matrix bad = Matrix::Ones(4, 3);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(fit_tssp(bad, Matrix::Ones(4, 3)), InvalidInput);
    CHECK_THROWS_AS(fit_tssp(Matrix::Ones(4, 3), Matrix::Ones(4, 3), 0.0), InvalidInput);
}

TEST_CASE("fit_tssp: output is a strict local minimum of the ridge objective") {
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Index n = 20 + 10 * trial;
        const Eigen::Index d = 4 + trial;
        const Matrix prev = random_matrix(rng, n, d);
        const Matrix curr = prev * random_matrix(rng, d, d) + 0.1 * random_matrix(rng, n, d);
        const double eps = 1e-9;
        const Matrix p = fit_tssp(prev, curr, eps).matrix;
        // Normal-equation residual.
        const Matrix normal = (prev.transpose() * prev + eps * Matrix::Identity(d, d)) * p - prev.transpose() * curr;
        CHECK(normal.norm() <= 1e-8 * (1.0 + (prev.transpose() * curr).norm()));
        const double best = tssp_objective(prev, curr, p, eps);
        for (int k = 0; k < 10; ++k) {
            Matrix delta = random_matrix(rng, d, d);
            delta *= 1e-3 / delta.norm();
            CHECK(tssp_objective(prev, curr, p + delta, eps) > best);
        }
    }
}

TEST_CASE("cip_projector: identity and rank-one axis") {
    const ShiftProjection full = cip_projector(Matrix::Identity(5, 5));
    CHECK(full.kind == ShiftProjection::Kind::category_projector);
    CHECK((full.matrix - Matrix::Identity(5, 5)).norm() < 1e-12);

    Matrix axis = Matrix::Zero(4, 4);
    axis(0, 0) = 10.0;
    Matrix expected = Matrix::Zero(4, 4);
    expected(0, 0) = 1.0;
    CHECK((cip_projector(axis).matrix - expected).norm() < 1e-12);
}

TEST_CASE("cip_projector: preserves the row space of the generating rows") {
    std::mt19937_64 rng(35);
    const Matrix x = random_matrix(rng, 3, 8);
    const Matrix phi = x.transpose() * x;
    const Matrix pi = cip_projector(phi).matrix;
    CHECK(pi.trace() == doctest::Approx(3.0).epsilon(1e-8));
    CHECK((x * pi - x).norm() < 1e-8);
    // Brute-force oracle: projector from an SVD of the raw rows.
    const Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeFullV);
    const Matrix v = svd.matrixV().leftCols(3);
    CHECK((pi - v * v.transpose()).norm() < 1e-8);
}

TEST_CASE("cip_projector: fixed-k policy and invalid input") {
    std::mt19937_64 rng(36);
    const Matrix phi = dpcr::testing::random_spd(rng, 6);
    CHECK(cip_projector(phi, RankPolicy::fixed(2)).matrix.trace() == doctest::Approx(2.0));
    CHECK(cip_projector(phi, RankPolicy::fixed(0)).matrix.norm() == 0.0);
    Matrix asym = phi;
    asym(0, 5) += 1.0;
    CHECK_THROWS_AS(cip_projector(asym), InvalidInput);
}

TEST_CASE("dual_projection: right multiplication") {
    std::mt19937_64 rng(37);
    const ShiftProjection p{random_matrix(rng, 5, 5), ShiftProjection::Kind::task_wise};
    const ShiftProjection identity{Matrix::Identity(5, 5), ShiftProjection::Kind::category_projector};
    const ShiftProjection zero{Matrix::Zero(5, 5), ShiftProjection::Kind::category_projector};
    CHECK(dual_projection(p, identity).matrix == p.matrix);
    CHECK(dual_projection(p, zero).matrix.norm() == 0.0);

    const Matrix y = random_matrix(rng, 2, 5);
    const ShiftProjection pi = cip_projector(y.transpose() * y);
    const ShiftProjection dual = dual_projection(p, pi);
    CHECK(dual.kind == ShiftProjection::Kind::dual);
    CHECK((dual.matrix - dpcr::testing::naive_multiply(p.matrix, pi.matrix)).norm() < 1e-12);

    CHECK_THROWS_AS(dual_projection(pi, p), InvalidInput);
    CHECK_THROWS_AS(dual_projection(p, p), InvalidInput);
}

TEST_CASE("calibrate_class: identity leaves the statistics unchanged") {
    std::mt19937_64 rng(38);
    const ClassStatistics s = accumulate_class_stats(random_matrix(rng, 9, 4), 2);
    const ClassStatistics c = calibrate_class(s, {Matrix::Identity(4, 4), ShiftProjection::Kind::dual});
    CHECK((c.covariance - s.covariance).norm() < 1e-12);
    CHECK((c.prototype - s.prototype).norm() < 1e-12);
    CHECK(c.count == s.count);
    CHECK(c.class_id == 2);
}

TEST_CASE("calibrate_class: matches brute force on raw embeddings") {
    std::mt19937_64 rng(39);
    const Matrix x = random_matrix(rng, 5, 3);
    const Matrix proj = random_matrix(rng, 3, 3);
    const ClassStatistics c = calibrate_class(accumulate_class_stats(x, 0), {proj, ShiftProjection::Kind::dual});
    const Matrix moved = dpcr::testing::naive_multiply(x, proj);
    CHECK((c.covariance - dpcr::testing::naive_gram(moved)).norm() < 1e-10);
    CHECK((c.prototype - dpcr::testing::naive_mean(moved)).norm() < 1e-10);
    CHECK_THROWS_AS(calibrate_class(accumulate_class_stats(x, 0), {Matrix::Identity(4, 4), ShiftProjection::Kind::dual}),
                    InvalidInput);
}

TEST_CASE("calibrate_class: output stays PSD") {
    std::mt19937_64 rng(40);
    for (int trial = 0; trial < 30; ++trial) {
        const ClassStatistics s = accumulate_class_stats(random_matrix(rng, 2 + trial % 9, 6), 0);
        const ClassStatistics c = calibrate_class(s, {random_matrix(rng, 6, 6), ShiftProjection::Kind::dual});
        const SymEig e = sym_eig(c.covariance);
        Eigen::SelfAdjointEigenSolver<Matrix> raw(c.covariance);
        CHECK(raw.eigenvalues().minCoeff() >= -1e-8 * c.covariance.trace());
        CHECK(e.values.minCoeff() >= 0.0);
    }
}

TEST_CASE("calibrate_information_set: identity projection is a no-op") {
    std::mt19937_64 rng(41);
    std::vector<ClassStatistics> task;
    for (ClassId c = 0; c < 3; ++c) task.push_back(accumulate_class_stats(class_cloud(rng, 20, 5), c));
    const InformationSet set = InformationSet(5).insert_task(task);
    const InformationSet out = calibrate_information_set(set, {Matrix::Identity(5, 5), ShiftProjection::Kind::task_wise});
    for (const auto& [key, s] : set.entries()) {
        const auto& c = out.entries().at(key);
        CHECK((c.covariance - s.covariance).norm() < 1e-10 * (1.0 + s.covariance.norm()));
        CHECK((c.prototype - s.prototype).norm() < 1e-10);
    }
}

TEST_CASE("calibrate_information_set: full-rank class is rotated by the drift") {
    std::mt19937_64 rng(42);
    const Matrix x = class_cloud(rng, 40, 6);
    const InformationSet set = InformationSet(6).insert_task({accumulate_class_stats(x, 0)});
    const Matrix a = random_orthogonal(rng, 6);
    const InformationSet out = calibrate_information_set(set, {a, ShiftProjection::Kind::task_wise});
    const auto& c = out.entries().begin()->second;
    CHECK((c.prototype - dpcr::testing::naive_mean(x) * a).norm() < 1e-8);
}

TEST_CASE("calibrate_information_set: sequential calibrations chain") {
    std::mt19937_64 rng(43);
    const Matrix x = class_cloud(rng, 40, 6);
    const InformationSet set = InformationSet(6).insert_task({accumulate_class_stats(x, 0)});
    const Matrix a = random_orthogonal(rng, 6);
    const Matrix b = random_orthogonal(rng, 6);
    const InformationSet twice = calibrate_information_set(
        calibrate_information_set(set, {a, ShiftProjection::Kind::task_wise}), {b, ShiftProjection::Kind::task_wise});
    const InformationSet once = calibrate_information_set(set, {a * b, ShiftProjection::Kind::task_wise});
    const auto& s2 = twice.entries().begin()->second;
    const auto& s1 = once.entries().begin()->second;
    CHECK((s2.prototype - s1.prototype).norm() < 1e-6);
    CHECK((s2.covariance - s1.covariance).norm() < 1e-6 * (1.0 + s1.covariance.norm()));
}

TEST_CASE("calibrate_information_set: low-rank class keeps its row space") {
    std::mt19937_64 rng(44);
    const Matrix x = random_matrix(rng, 2, 6);  // rank-two class
    const InformationSet set = InformationSet(6).insert_task({accumulate_class_stats(x, 0)});
    const Matrix p = random_matrix(rng, 6, 6);
    const InformationSet out = calibrate_information_set(set, {p, ShiftProjection::Kind::task_wise});
    const Matrix pi = cip_projector(x.transpose() * x).matrix;
    const Matrix moved = x * p * pi;
    const auto& c = out.entries().begin()->second;
    CHECK((c.covariance - moved.transpose() * moved).norm() < 1e-9 * (1.0 + c.covariance.norm()));
}

TEST_CASE("calibrate_information_set: thread count does not change the result") {
    std::mt19937_64 rng(45);
    std::vector<ClassStatistics> task;
    for (ClassId c = 0; c < 9; ++c) task.push_back(accumulate_class_stats(random_matrix(rng, 1 + c, 5), c));
    const InformationSet set = InformationSet(5).insert_task(task);
    const ShiftProjection p{random_matrix(rng, 5, 5), ShiftProjection::Kind::task_wise};
    const InformationSet serial = calibrate_information_set(set, p, CalibrationOptions{CalibrationMode::dual, {}, 1});
    const InformationSet parallel = calibrate_information_set(set, p, CalibrationOptions{CalibrationMode::dual, {}, 4});
    for (const auto& [key, s] : serial.entries()) {
        CHECK(parallel.entries().at(key).covariance == s.covariance);
        CHECK(parallel.entries().at(key).prototype == s.prototype);
    }
}

TEST_CASE("calibrate_information_set: dimension mismatch is reported") {
    std::mt19937_64 rng(46);
    const InformationSet set = InformationSet(4).insert_task({accumulate_class_stats(random_matrix(rng, 5, 4), 0)});
    CHECK_THROWS_AS(calibrate_information_set(set, {Matrix::Identity(3, 3), ShiftProjection::Kind::task_wise}),
                    InvalidInput);
}
