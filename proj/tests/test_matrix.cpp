#include <catch2/catch_amalgamated.hpp>

#include "irmmv/matrix.hpp"
#include "irmmv/random.hpp"

using namespace irmmv;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, RandomStream& rng, double lo = -1.0,
                     double hi = 1.0) {
    Matrix m(r, c);
    for (double& v : m.data()) v = lo + (hi - lo) * rng.uniform();
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

} // namespace

TEST_CASE("matmul basics") {
    const Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(max_abs_diff(matmul(Matrix::identity(2), m), m) == 0.0);

    const Matrix v = Matrix::from_rows({{0}, {1}});
    const Matrix prod = matmul(m, v);
    CHECK(prod(0, 0) == 2.0);
    CHECK(prod(1, 0) == 4.0);

    const Matrix z(3, 3);
    const Matrix any = Matrix::from_rows({{1, -2, 3}, {0, 5, 1}, {2, 2, 2}});
    CHECK(frobenius_norm(matmul(z, any)) == 0.0);

    CHECK_THROWS_AS(matmul(m, Matrix(3, 2)), DimensionError);
}

TEST_CASE("matmul associativity on random triples") {
    RandomStream rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix a = random_matrix(4, 6, rng);
        const Matrix b = random_matrix(6, 3, rng);
        const Matrix c = random_matrix(3, 5, rng);
        const Matrix lhs = matmul(matmul(a, b), c);
        const Matrix rhs = matmul(a, matmul(b, c));
        const double scale = frobenius_norm(lhs);
        CHECK(frobenius_norm(lhs - rhs) <= 1e-12 * std::max(1.0, scale));
    }
}

TEST_CASE("frobenius norm") {
    CHECK(frobenius_norm(Matrix(4, 5)) == 0.0);
    CHECK(frobenius_norm(Matrix::from_rows({{3, 4}})) == Catch::Approx(5.0).epsilon(1e-15));
    CHECK(frobenius_norm(Matrix::identity(3)) == Catch::Approx(std::sqrt(3.0)).epsilon(1e-15));
}

TEST_CASE("frobenius norm invariant under orthogonal maps") {
    RandomStream rng(7);
    // Householder reflector Q = I - 2 u u^T, orthonormal by construction
    Matrix u(4, 1);
    for (double& v : u.data()) v = rng.gaussian();
    const double un = frobenius_norm(u);
    for (double& v : u.data()) v /= un;
    Matrix q = Matrix::identity(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) q(i, j) -= 2.0 * u(i, 0) * u(j, 0);

    for (int rep = 0; rep < 10; ++rep) {
        const Matrix m = random_matrix(4, 3, rng);
        CHECK(frobenius_norm(matmul(q, m)) ==
              Catch::Approx(frobenius_norm(m)).epsilon(1e-10));
    }
}

TEST_CASE("hadamard product") {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(max_abs_diff(hadamard(a, Matrix(2, 2, 1.0)), a) == 0.0);
    CHECK(frobenius_norm(hadamard(a, Matrix(2, 2))) == 0.0);

    const Matrix b = Matrix::from_rows({{2, 2}, {0, 1}});
    const Matrix expect = Matrix::from_rows({{2, 4}, {0, 4}});
    CHECK(max_abs_diff(hadamard(a, b), expect) == 0.0);

    CHECK_THROWS_AS(hadamard(a, Matrix(2, 3)), DimensionError);
}

TEST_CASE("hadamard commutes and distributes exactly") {
    RandomStream rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix a = random_matrix(3, 4, rng);
        const Matrix b = random_matrix(3, 4, rng);
        const Matrix c = random_matrix(3, 4, rng);
        CHECK(max_abs_diff(hadamard(a, b), hadamard(b, a)) == 0.0);
        CHECK(max_abs_diff(hadamard(a, b + c), hadamard(a, b) + hadamard(a, c)) == 0.0);
    }
}

TEST_CASE("normalize_columns") {
    const Matrix already = Matrix::identity(3);
    CHECK(max_abs_diff(normalize_columns(already), already) == 0.0);

    const Matrix col = Matrix::from_rows({{3}, {4}});
    const Matrix unit = normalize_columns(col);
    CHECK(unit(0, 0) == Catch::Approx(0.6).epsilon(1e-15));
    CHECK(unit(1, 0) == Catch::Approx(0.8).epsilon(1e-15));

    Matrix with_zero(3, 2, 1.0);
    with_zero(0, 1) = with_zero(1, 1) = with_zero(2, 1) = 0.0;
    CHECK_THROWS_AS(normalize_columns(with_zero), NumericError);
}

TEST_CASE("ridge_solve identity cases") {
    const Matrix y = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
    const Matrix eye = Matrix::identity(3);
    CHECK(max_abs_diff(ridge_solve(eye, y, 0.0), y) <= 1e-14);

    const Matrix half = ridge_solve(eye, y, 1.0);
    CHECK(max_abs_diff(half, 0.5 * y) <= 1e-14);
}

TEST_CASE("ridge_solve least-squares mean") {
    const Matrix a = Matrix::from_rows({{1}, {1}});
    const Matrix y = Matrix::from_rows({{1}, {3}});
    const Matrix x = ridge_solve(a, y, 0.0);
    CHECK(x(0, 0) == Catch::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("ridge_solve stationarity on random well-conditioned instances") {
    RandomStream rng(19);
    for (double lambda : {0.0, 0.3, 2.0}) {
        for (int rep = 0; rep < 5; ++rep) {
            Matrix a = random_matrix(12, 5, rng);
            for (std::size_t i = 0; i < 5; ++i) a(i, i) += 3.0; // keep it well conditioned
            const Matrix y = random_matrix(12, 3, rng);
            const Matrix x = ridge_solve(a, y, lambda);
            // gradient of the objective: A^T(y - A x) - lambda x = 0
            const Matrix grad = matmul_at_b(a, y - matmul(a, x)) - lambda * x;
            for (double v : grad.data()) CHECK(std::abs(v) <= 1e-8);
        }
    }
}

TEST_CASE("ridge_solve rejects rank-deficient zero-lambda systems") {
    Matrix a(4, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = 2.0; // second column is a multiple of the first
    }
    const Matrix y(4, 1, 1.0);
    CHECK_THROWS_AS(ridge_solve(a, y, 0.0), SingularSystemError);
    CHECK_NOTHROW(ridge_solve(a, y, 0.5));
}

TEST_CASE("matmul_at_b and transpose agree") {
    RandomStream rng(3);
    const Matrix a = random_matrix(6, 4, rng);
    const Matrix b = random_matrix(6, 5, rng);
    CHECK(max_abs_diff(matmul_at_b(a, b), matmul(transpose(a), b)) <= 1e-14);
}

TEST_CASE("construction validates") {
    CHECK_THROWS_AS(Matrix(0, 3), DimensionError);
    CHECK_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), DimensionError);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Matrix::from_rows({{1.0, inf}}), NumericError);
}
