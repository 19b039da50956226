#include <doctest.h>

#include <cmath>
#include <limits>

#include "dpcr/error.hpp"
#include "dpcr/numerics.hpp"
#include "test_support.hpp"

using namespace dpcr;
using dpcr::testing::random_matrix;

TEST_CASE("spd_solve: identity plus unit ridge halves the rhs") {
    const Matrix w = spd_solve(Matrix::Identity(4, 4), 1.0, Matrix::Identity(4, 4));
    CHECK((w - 0.5 * Matrix::Identity(4, 4)).norm() < 1e-15);
}

TEST_CASE("spd_solve: zero system with tiny ridge and zero rhs") {
    const Matrix w = spd_solve(Matrix::Zero(4, 4), 1e-9, Matrix::Zero(4, 3));
    CHECK(w.rows() == 4);
    CHECK(w.cols() == 3);
    CHECK(w.norm() == 0.0);
}

TEST_CASE("spd_solve: matches explicit inverse on random SPD systems") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix m = dpcr::testing::random_spd(rng, 6);
        const Matrix b = random_matrix(rng, 6, 3);
        const Matrix w = spd_solve(m, 0.1, b);
        const Matrix oracle = dpcr::testing::explicit_inverse_solve(m, 0.1, b);
        CHECK((w - oracle).norm() < 1e-9);
        Matrix shifted = m;
        shifted.diagonal().array() += 0.1;
        CHECK((shifted * w - b).norm() <= 1e-8 * (1.0 + b.norm()));
    }
}

TEST_CASE("spd_solve: residual bound holds on PSD rank-deficient Gram with small ridge") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = random_matrix(rng, 3, 8);
        const Matrix m = x.transpose() * x;
        const Matrix b = random_matrix(rng, 8, 2);
        const Matrix w = spd_solve(m, 1e-3, b);
        Matrix shifted = m;
        shifted.diagonal().array() += 1e-3;
        CHECK((shifted * w - b).norm() <= 1e-8 * (1.0 + b.norm()));
    }
}

TEST_CASE("spd_solve: error paths") {
    Matrix m = Matrix::Identity(3, 3);
    SUBCASE("non-finite input") {
        m(1, 2) = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(spd_solve(m, 1.0, Matrix::Ones(3, 1)), InvalidInput);
    }
    SUBCASE("asymmetric input") {
        m(0, 1) = 0.5;
        CHECK_THROWS_AS(spd_solve(m, 1.0, Matrix::Ones(3, 1)), InvalidInput);
    }
    SUBCASE("indefinite system names the pivot") {
        Matrix indefinite = Matrix::Identity(3, 3);
        indefinite(2, 2) = -1.0;
        try {
            spd_solve(indefinite, 0.0, Matrix::Ones(3, 1));
            FAIL("expected SingularSystem");
        } catch (const SingularSystem& e) {
            CHECK(e.smallest_pivot() < 0.0);
            CHECK(std::string(e.what()).find("pivot") != std::string::npos);
        }
    }
    SUBCASE("singular PSD system without ridge") {
        CHECK_THROWS_AS(spd_solve(Matrix::Zero(3, 3), 0.0, Matrix::Ones(3, 1)), SingularSystem);
    }
}

TEST_CASE("sym_eig: diagonal matrix") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 3.0;
    m(1, 1) = 1.0;
    const SymEig e = sym_eig(m);
    CHECK(e.values[0] == doctest::Approx(3.0));
    CHECK(e.values[1] == doctest::Approx(1.0));
    // Signed permutation of the identity.
    CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(1, 1)) == doctest::Approx(1.0));
    CHECK(std::abs(e.vectors(0, 1)) < 1e-12);
}

TEST_CASE("sym_eig: identity") {
    const SymEig e = sym_eig(Matrix::Identity(3, 3));
    for (int i = 0; i < 3; ++i) CHECK(e.values[i] == doctest::Approx(1.0));
}

TEST_CASE("sym_eig: rank-one outer product") {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = 10.0;
    const SymEig e = sym_eig(m);
    CHECK(e.values[0] == doctest::Approx(10.0));
    CHECK(e.values[1] == 0.0);
    CHECK(e.values[2] == 0.0);
    CHECK(std::abs(e.vectors(0, 0)) == doctest::Approx(1.0));
    const Matrix rebuilt = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((rebuilt - m).norm() <= 1e-8 * (1.0 + m.norm()));
}

TEST_CASE("sym_eig: reconstruction and orthogonality on random PSD matrices") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index d = 1 + trial % 12;
        const Eigen::Index n = 1 + (trial * 7) % 15;
        const Matrix x = random_matrix(rng, n, d, 3.0);
        const Matrix m = x.transpose() * x;
        const SymEig e = sym_eig(m);
        const Matrix rebuilt = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
        CHECK((rebuilt - m).norm() <= 1e-8 * (1.0 + m.norm()));
        CHECK((e.vectors.transpose() * e.vectors - Matrix::Identity(d, d)).norm() <= 1e-8);
        for (Eigen::Index i = 0; i + 1 < d; ++i) CHECK(e.values[i] >= e.values[i + 1]);
        CHECK(e.values.minCoeff() >= 0.0);
    }
}

TEST_CASE("sym_eig: invalid input") {
    Matrix m = Matrix::Identity(2, 2);
    m(0, 1) = 1.0;
    CHECK_THROWS_AS(sym_eig(m), InvalidInput);
    m(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(sym_eig(m), InvalidInput);
}

TEST_CASE("numerical_rank: threshold arithmetic") {
    Vector v(3);
    v << 10.0, 1e-3, 1e-12;
    CHECK(numerical_rank(v, RankPolicy::relative(1e-6)) == 2);
    CHECK(numerical_rank(v, RankPolicy::absolute(1e-6)) == 2);
    CHECK(numerical_rank(v, RankPolicy::absolute(1e-2)) == 1);
    CHECK(numerical_rank(v, RankPolicy::fixed(1)) == 1);
    CHECK(numerical_rank(v, RankPolicy::fixed(7)) == 3);
    CHECK(numerical_rank(Vector::Zero(2), RankPolicy::relative(1e-6)) == 0);
}

TEST_CASE("numerical_rank: rank-2 Gram matrix matches brute-force rank") {
    std::mt19937_64 rng(14);
    const Matrix x = random_matrix(rng, 2, 5);
    const Matrix gram = x.transpose() * x;
    const Eigen::Index oracle = Eigen::FullPivLU<Matrix>(x).rank();
    REQUIRE(oracle == 2);
    CHECK(numerical_rank(sym_eig(gram).values, RankPolicy{}) == 2);
}

TEST_CASE("numerical_rank: tightening the threshold never increases the rank") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix x = random_matrix(rng, 1 + trial % 6, 8);
        const Vector values = sym_eig(x.transpose() * x).values;
        std::size_t previous = values.size();
        for (double threshold : {1e-14, 1e-10, 1e-6, 1e-3, 1e-1, 0.5, 0.99}) {
            const std::size_t r = numerical_rank(values, RankPolicy::relative(threshold));
            CHECK(r <= previous);
            previous = r;
        }
    }
}

TEST_CASE("rank policy validation") {
    CHECK_THROWS_AS(RankPolicy::relative(0.0).validate(), InvalidInput);
    CHECK_THROWS_AS(RankPolicy::absolute(-1.0).validate(), InvalidInput);
    CHECK_NOTHROW(RankPolicy::fixed(0).validate());
    CHECK(rank_mode_from_string("fixed-k") == RankPolicy::Mode::fixed_k);
    CHECK_THROWS_AS(rank_mode_from_string("magic"), InvalidInput);
}
