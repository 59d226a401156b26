#include <doctest.h>

#include <stdexcept>

#include "saf/math.hpp"

using namespace saf;

TEST_CASE("matvec basics") {
    Matrix id = Matrix::identity(2);
    CHECK(matvec(id, {3.0, 4.0}) == Vector{3.0, 4.0});

    Matrix zero(3, 2);
    CHECK(matvec(zero, {5.0, -1.0}) == Vector{0.0, 0.0, 0.0});

    Matrix m(2, 2);
    m(0, 0) = 1; m(0, 1) = 2; m(1, 0) = 3; m(1, 1) = 4;
    CHECK(matvec(m, {1.0, 1.0}) == Vector{3.0, 7.0});

    CHECK_THROWS_AS(matvec(m, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("matvec picks out columns on basis vectors") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        std::size_t rows = 1 + rng.uniform_int(6);
        std::size_t cols = 1 + rng.uniform_int(6);
        Matrix m(rows, cols);
        for (double& x : m.data) x = rng.uniform(-2.0, 2.0);
        for (std::size_t j = 0; j < cols; ++j) {
            Vector e(cols, 0.0);
            e[j] = 1.0;
            Vector col = matvec(m, e);
            for (std::size_t i = 0; i < rows; ++i) CHECK(col[i] == m(i, j));
        }
    }
}

TEST_CASE("matvec_transposed agrees with explicit transpose") {
    Rng rng(12);
    Matrix m(3, 4);
    for (double& x : m.data) x = rng.uniform(-1.0, 1.0);
    Vector v{0.5, -0.25, 2.0};
    Matrix mt(4, 3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) mt(j, i) = m(i, j);
    CHECK(matvec_transposed(m, v) == matvec(mt, v));
}

TEST_CASE("outer products") {
    Matrix o = outer({1.0, 0.0}, {2.0, 3.0});
    CHECK(o(0, 0) == 2.0);
    CHECK(o(0, 1) == 3.0);
    CHECK(o(1, 0) == 0.0);
    CHECK(o(1, 1) == 0.0);

    Matrix z = outer({0.0, 0.0}, {2.0, 3.0});
    for (double x : z.data) CHECK(x == 0.0);

    Matrix one = outer({1.0}, {1.0});
    CHECK(one.rows == 1);
    CHECK(one.cols == 1);
    CHECK(one(0, 0) == 1.0);
}

TEST_CASE("geometric weight sum") {
    CHECK(geometric_weight_sum(1.0, 5) == 6.0);
    CHECK(geometric_weight_sum(0.5, 2) == doctest::Approx(1.75).epsilon(1e-15));
    CHECK(geometric_weight_sum(0.5, 0) == 1.0);
}

TEST_CASE("operations are bitwise deterministic") {
    Rng rng(13);
    Matrix m(5, 7);
    for (double& x : m.data) x = rng.uniform(-1.0, 1.0);
    Vector v(7);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    Vector a = matvec(m, v);
    Vector b = matvec(m, v);
    CHECK(a == b);
    CHECK(geometric_weight_sum(0.73, 19) == geometric_weight_sum(0.73, 19));
}

TEST_CASE("rng reproducibility and stream independence") {
    Rng a(42), b(42), c(43);
    bool all_equal = true;
    bool any_diff_seed = false;
    for (int i = 0; i < 100; ++i) {
        std::uint64_t xa = a.next_u64();
        std::uint64_t xb = b.next_u64();
        std::uint64_t xc = c.next_u64();
        all_equal = all_equal && (xa == xb);
        any_diff_seed = any_diff_seed || (xa != xc);
    }
    CHECK(all_equal);
    CHECK(any_diff_seed);

    Rng base(7);
    Rng s0 = base.split(0);
    Rng s1 = base.split(1);
    CHECK(s0.next_u64() != s1.next_u64());

    Rng u(99);
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
}
