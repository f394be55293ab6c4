#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "irmmv/problem.hpp"

using namespace irmmv;

TEST_CASE("sensing matrix has unit columns and is seed-deterministic") {
    const Matrix a = generate_sensing_matrix(50, 25, 7);
    for (std::size_t j = 0; j < a.cols(); ++j)
        CHECK(std::abs(column_norm(a, j) - 1.0) <= 1e-12);

    const Matrix b = generate_sensing_matrix(50, 25, 7);
    CHECK(a.data() == b.data()); // bitwise identical

    const Matrix c = generate_sensing_matrix(50, 25, 8);
    CHECK(a.data() != c.data());

    CHECK(mu_coherence(generate_sensing_matrix(4, 2, 1)) < 1.0);
}

TEST_CASE("mu_coherence") {
    CHECK(mu_coherence(Matrix::identity(4)) == 0.0);

    Matrix twin(3, 2);
    twin(0, 0) = twin(0, 1) = 1.0; // two identical unit columns
    CHECK(mu_coherence(twin) == Catch::Approx(1.0).epsilon(1e-15));

    const double r3 = 1.0 / std::sqrt(3.0);
    const Matrix m = Matrix::from_rows({{1, 0, r3}, {0, 1, r3}, {0, 0, r3}});
    CHECK(mu_coherence(m) == Catch::Approx(r3).epsilon(1e-14));

    CHECK_THROWS_AS(mu_coherence(Matrix(3, 1, 1.0)), NumericError);
}

TEST_CASE("mu_coherence invariances") {
    const Matrix a = generate_sensing_matrix(20, 6, 3);
    const double mu = mu_coherence(a);

    Matrix permuted(a.rows(), a.cols());
    const std::size_t perm[6] = {4, 2, 0, 5, 1, 3};
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) permuted(i, j) = a(i, perm[j]);
    CHECK(mu_coherence(permuted) == Catch::Approx(mu).epsilon(1e-14));

    Matrix flipped = a;
    for (std::size_t i = 0; i < a.rows(); ++i) flipped(i, 2) = -flipped(i, 2);
    CHECK(mu_coherence(flipped) == Catch::Approx(mu).epsilon(1e-14));
}

TEST_CASE("row-sparse signal generation") {
    const RowSparseSignal s = generate_row_sparse_signal(25, 100, 3, {}, 5);
    REQUIRE(s.support.size() == 3);
    std::size_t ones_rows = 0, zero_rows = 0;
    for (std::size_t i = 0; i < 25; ++i) {
        const double rn = row_norm(s.x, i);
        if (rn == 0.0)
            ++zero_rows;
        else {
            ++ones_rows;
            for (std::size_t j = 0; j < 100; ++j) CHECK(s.x(i, j) == 1.0);
        }
    }
    CHECK(ones_rows == 3);
    CHECK(zero_rows == 22);

    const RowSparseSignal full = generate_row_sparse_signal(6, 4, 6, {}, 2);
    for (std::size_t i = 0; i < 6; ++i) CHECK(row_norm(full.x, i) > 0.0);

    const RowSparseSignal weighted = generate_row_sparse_signal(5, 2, 2, {1.0, 2.0}, 9);
    CHECK(frobenius_norm_sq(weighted.x) == Catch::Approx(10.0).epsilon(1e-15));

    CHECK_THROWS_AS(generate_row_sparse_signal(4, 3, 5, {}, 1), DimensionError);
}

TEST_CASE("measurement synthesis hits the requested SNR exactly") {
    const Matrix a = generate_sensing_matrix(50, 25, 3);
    const RowSparseSignal s = generate_row_sparse_signal(25, 100, 3, {}, 4);

    auto noiseless = synthesize_measurements(a, s.x, std::nullopt, 11);
    CHECK(frobenius_norm(noiseless.second) == 0.0);
    CHECK(frobenius_norm(noiseless.first - matmul(a, s.x)) == 0.0);

    auto noisy = synthesize_measurements(a, s.x, 40.0, 11);
    const double measured =
        10.0 * std::log10(frobenius_norm_sq(matmul(a, s.x)) / frobenius_norm_sq(noisy.second));
    CHECK(measured == Catch::Approx(40.0).margin(1e-9));

    auto equal_power = synthesize_measurements(a, s.x, 0.0, 11);
    CHECK(frobenius_norm(equal_power.second) ==
          Catch::Approx(frobenius_norm(matmul(a, s.x))).margin(1e-9));

    const Matrix zero_x(25, 100);
    CHECK_THROWS_AS(synthesize_measurements(a, zero_x, 40.0, 1), NumericError);
}

TEST_CASE("make_instance satisfies its invariants and is deterministic") {
    const ProblemInstance p = make_instance(50, 25, 100, 3, {}, 40.0, 123);
    // validate() ran inside make_instance; spot-check the residual identity
    CHECK(frobenius_norm(p.y - (matmul(p.a, p.x_true) + p.w)) <= 1e-12);

    const ProblemInstance q = make_instance(50, 25, 100, 3, {}, 40.0, 123);
    CHECK(p.a.data() == q.a.data());
    CHECK(p.x_true.data() == q.x_true.data());
    CHECK(p.w.data() == q.w.data());
    CHECK(p.y.data() == q.y.data());
    CHECK(p.support == q.support);
}

TEST_CASE("matrix CSV bundle round trip") {
    const Matrix m = generate_sensing_matrix(7, 4, 99);
    const auto path = std::filesystem::temp_directory_path() / "irmmv_mat_test.csv";
    save_matrix_csv(path.string(), m);
    const Matrix back = load_matrix_csv(path.string());
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    CHECK(back.data() == m.data()); // %.17g round-trips doubles exactly
    std::filesystem::remove(path);
}
