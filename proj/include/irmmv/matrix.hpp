#ifndef IRMMV_MATRIX_HPP
#define IRMMV_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "irmmv/errors.hpp"

namespace irmmv {

/// Dense row-major matrix of doubles. Values are small (at most ~1024x784
/// here), so flat contiguous storage with no views keeps everything simple
/// and cache friendly.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0)
            throw DimensionError("Matrix: dimensions must be positive");
    }

    /// Builds from nested initializer lists; validates rectangular shape
    /// and finiteness of every entry.
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        if (rows.size() == 0 || rows.begin()->size() == 0)
            throw DimensionError("Matrix::from_rows: empty");
        Matrix m(rows.size(), rows.begin()->size());
        std::size_t i = 0;
        for (const auto& r : rows) {
            if (r.size() != m.cols_)
                throw DimensionError("Matrix::from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : r) m(i, j++) = v;
            ++i;
        }
        m.ensure_finite("Matrix::from_rows");
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void ensure_finite(const char* what) const {
        if (!all_finite())
            throw NumericError(std::string(what) + ": non-finite entry");
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

/// C += A * B, ikj order so the inner loop streams rows of B and C.
inline void gemm_acc(const Matrix& a, const Matrix& b, Matrix& c, double sign = 1.0) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c.row_ptr(i);
        const double* ai = a.row_ptr(i);
        for (std::size_t p = 0; p < k; ++p) {
            const double s = sign * ai[p];
            if (s == 0.0) continue;
            const double* bp = b.row_ptr(p);
            for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
        }
    }
}

/// C += A^T * B without forming the transpose.
inline void gemm_at_b_acc(const Matrix& a, const Matrix& b, Matrix& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    for (std::size_t p = 0; p < m; ++p) {
        const double* ap = a.row_ptr(p);
        const double* bp = b.row_ptr(p);
        for (std::size_t i = 0; i < k; ++i) {
            const double s = ap[i];
            if (s == 0.0) continue;
            double* ci = c.row_ptr(i);
            for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
        }
    }
}

/// Row-split two-thread variant used for the larger (MNIST-sized) products.
/// Output blocks are disjoint, so the result is identical to the serial path.
inline void gemm_acc_threaded(const Matrix& a, const Matrix& b, Matrix& c, double sign = 1.0) {
    const std::size_t m = a.rows();
    if (m < 256) {
        gemm_acc(a, b, c, sign);
        return;
    }
    const std::size_t k = a.cols(), n = b.cols();
    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* ci = c.row_ptr(i);
            const double* ai = a.row_ptr(i);
            for (std::size_t p = 0; p < k; ++p) {
                const double s = sign * ai[p];
                if (s == 0.0) continue;
                const double* bp = b.row_ptr(p);
                for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
            }
        }
    };
    const std::size_t half = m / 2;
    std::thread t(worker, 0, half);
    worker(half, m);
    t.join();
}

} // namespace detail

/// Standard matrix product.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    detail::gemm_acc(a, b, c);
    return c;
}

/// A^T * B.
inline Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows())
        throw DimensionError("matmul_at_b: row counts differ");
    Matrix c(a.cols(), b.cols());
    detail::gemm_at_b_acc(a, b, c);
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("operator+: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("operator-: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

inline Matrix operator*(double s, const Matrix& a) {
    Matrix c = a;
    for (double& v : c.data()) v *= s;
    return c;
}

/// Entrywise product.
inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw DimensionError("hadamard: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] *= b.data()[i];
    return c;
}

inline double frobenius_norm_sq(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return s;
}

inline double frobenius_norm(const Matrix& m) { return std::sqrt(frobenius_norm_sq(m)); }

inline double row_norm(const Matrix& m, std::size_t i) {
    const double* r = m.row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += r[j] * r[j];
    return std::sqrt(s);
}

inline double column_norm(const Matrix& m, std::size_t j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

/// Scales every column to unit Euclidean norm. A zero column has no
/// well-defined direction and raises NumericError.
inline Matrix normalize_columns(const Matrix& m) {
    Matrix out = m;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const double nj = column_norm(m, j);
        if (!(nj > 1e-300))
            throw NumericError("normalize_columns: degenerate (zero) column " + std::to_string(j));
        const double inv = 1.0 / nj;
        for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) *= inv;
    }
    return out;
}

namespace detail {

/// Solves S X = B in place for symmetric positive definite S (Cholesky).
inline Matrix spd_solve(Matrix s, Matrix b) {
    const std::size_t n = s.rows();
    if (s.cols() != n || b.rows() != n)
        throw DimensionError("spd_solve: shape mismatch");
    // LL^T factorization
    for (std::size_t j = 0; j < n; ++j) {
        double d = s(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= s(j, k) * s(j, k);
        if (!(d > 0.0) || !std::isfinite(d))
            throw SingularSystemError("spd_solve: matrix not positive definite");
        const double ljj = std::sqrt(d);
        s(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = s(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= s(i, k) * s(j, k);
            s(i, j) = v / ljj;
        }
    }
    const std::size_t m = b.cols();
    // forward substitution L Z = B
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            double v = b(i, c);
            for (std::size_t k = 0; k < i; ++k) v -= s(i, k) * b(k, c);
            b(i, c) = v / s(i, i);
        }
    }
    // back substitution L^T X = Z
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t c = 0; c < m; ++c) {
            double v = b(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) v -= s(k, ii) * b(k, c);
            b(ii, c) = v / s(ii, ii);
        }
    }
    return b;
}

/// Householder QR least squares: X = argmin ||b - a X||_F, a is m x n with
/// m >= n and full column rank. Throws SingularSystemError otherwise.
inline Matrix qr_least_squares(Matrix a, Matrix b) {
    const std::size_t m = a.rows(), n = a.cols();
    if (b.rows() != m) throw DimensionError("qr_least_squares: row counts differ");
    if (m < n)
        throw SingularSystemError("qr_least_squares: fewer rows than columns");
    const std::size_t l = b.cols();
    std::vector<double> v(m);
    double rmax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double norm = 0.0;
        for (std::size_t i = j; i < m; ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        if (norm == 0.0)
            throw SingularSystemError("qr_least_squares: rank-deficient system");
        const double alpha = (a(j, j) >= 0.0) ? -norm : norm;
        double vnorm_sq = 0.0;
        v[j] = a(j, j) - alpha;
        vnorm_sq += v[j] * v[j];
        for (std::size_t i = j + 1; i < m; ++i) {
            v[i] = a(i, j);
            vnorm_sq += v[i] * v[i];
        }
        if (vnorm_sq == 0.0)
            throw SingularSystemError("qr_least_squares: rank-deficient system");
        const double beta = 2.0 / vnorm_sq;
        // reflect remaining columns of a
        for (std::size_t c = j; c < n; ++c) {
            double dot = 0.0;
            for (std::size_t i = j; i < m; ++i) dot += v[i] * a(i, c);
            dot *= beta;
            for (std::size_t i = j; i < m; ++i) a(i, c) -= dot * v[i];
        }
        // reflect b
        for (std::size_t c = 0; c < l; ++c) {
            double dot = 0.0;
            for (std::size_t i = j; i < m; ++i) dot += v[i] * b(i, c);
            dot *= beta;
            for (std::size_t i = j; i < m; ++i) b(i, c) -= dot * v[i];
        }
        rmax = std::max(rmax, std::abs(a(j, j)));
    }
    const double tol = rmax * static_cast<double>(std::max(m, n)) *
                       std::numeric_limits<double>::epsilon();
    Matrix x(n, l);
    for (std::size_t ii = n; ii-- > 0;) {
        if (std::abs(a(ii, ii)) <= tol)
            throw SingularSystemError("qr_least_squares: rank-deficient system");
        for (std::size_t c = 0; c < l; ++c) {
            double s = b(ii, c);
            for (std::size_t k = ii + 1; k < n; ++k) s -= a(ii, k) * x(k, c);
            x(ii, c) = s / a(ii, ii);
        }
    }
    return x;
}

} // namespace detail

/// argmin_X ||y - a X||_F^2 + lambda ||X||_F^2.
/// lambda > 0 uses the normal equations with a Cholesky solve (SPD by
/// construction); lambda == 0 uses Householder QR for conditioning and
/// requires full column rank.
inline Matrix ridge_solve(const Matrix& a, const Matrix& y, double lambda) {
    if (a.rows() != y.rows())
        throw DimensionError("ridge_solve: row counts differ");
    if (lambda < 0.0) throw NumericError("ridge_solve: negative lambda");
    if (lambda == 0.0) return detail::qr_least_squares(a, y);
    Matrix gram = matmul_at_b(a, a);
    for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += lambda;
    Matrix x = detail::spd_solve(std::move(gram), matmul_at_b(a, y));
    x.ensure_finite("ridge_solve");
    return x;
}

} // namespace irmmv

#endif
