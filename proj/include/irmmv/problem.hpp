#ifndef IRMMV_PROBLEM_HPP
#define IRMMV_PROBLEM_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "irmmv/matrix.hpp"
#include "irmmv/random.hpp"

namespace irmmv {

/// Gaussian sensing matrix with l2-normalized columns, deterministic in seed.
inline Matrix generate_sensing_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
    if (m < 1 || n < 1)
        throw DimensionError("generate_sensing_matrix: dimensions must be positive");
    RandomStream rng(seed);
    Matrix a(m, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.gaussian();
    return normalize_columns(a);
}

/// Maximum absolute inner product between distinct columns.
/// Assumes columns are l2-normalized (as produced above).
inline double mu_coherence(const Matrix& a) {
    if (a.cols() < 2)
        throw NumericError("mu_coherence: undefined for a single column");
    double mu = 0.0;
    for (std::size_t i = 0; i < a.cols(); ++i) {
        for (std::size_t j = i + 1; j < a.cols(); ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < a.rows(); ++r) dot += a(r, i) * a(r, j);
            mu = std::max(mu, std::abs(dot));
        }
    }
    return mu;
}

struct RowSparseSignal {
    Matrix x;                         // n x l, zero outside support
    std::vector<std::size_t> support; // sorted ascending, size k
};

/// k distinct rows chosen uniformly at random (seeded); support row i gets
/// magnitudes[i] replicated across all l columns (ascending support order),
/// or 1.0 everywhere when magnitudes is empty.
inline RowSparseSignal generate_row_sparse_signal(std::size_t n, std::size_t l, std::size_t k,
                                                  const std::vector<double>& magnitudes,
                                                  std::uint64_t seed) {
    if (k < 1 || k > n)
        throw DimensionError("generate_row_sparse_signal: need 1 <= k <= n");
    if (!magnitudes.empty() && magnitudes.size() != k)
        throw DimensionError("generate_row_sparse_signal: magnitudes length must equal k");
    RandomStream rng(seed);
    // partial Fisher-Yates over row indices
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    RowSparseSignal out;
    out.support.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.support.begin(), out.support.end());
    out.x = Matrix(n, l);
    for (std::size_t i = 0; i < k; ++i) {
        const double mag = magnitudes.empty() ? 1.0 : magnitudes[i];
        if (mag == 0.0)
            throw NumericError("generate_row_sparse_signal: zero magnitude on support");
        double* r = out.x.row_ptr(out.support[i]);
        for (std::size_t j = 0; j < l; ++j) r[j] = mag;
    }
    return out;
}

/// Draws iid Gaussian noise and rescales it so the empirical ratio
/// 10*log10(||aX||_F^2 / ||w||_F^2) equals snr_db exactly. Empty snr_db
/// means noiseless (w = 0). Returns (y, w) with y = aX + w.
inline std::pair<Matrix, Matrix> synthesize_measurements(const Matrix& a, const Matrix& x,
                                                         std::optional<double> snr_db,
                                                         std::uint64_t seed) {
    if (a.cols() != x.rows())
        throw DimensionError("synthesize_measurements: a.cols != x.rows");
    Matrix ax = matmul(a, x);
    Matrix w(ax.rows(), ax.cols());
    if (snr_db.has_value()) {
        const double signal_pow = frobenius_norm_sq(ax);
        if (signal_pow == 0.0)
            throw NumericError("synthesize_measurements: aX is zero, SNR undefined");
        RandomStream rng(seed);
        for (double& v : w.data()) v = rng.gaussian();
        const double scale =
            std::sqrt(signal_pow) / (frobenius_norm(w) * std::pow(10.0, *snr_db / 20.0));
        for (double& v : w.data()) v *= scale;
    }
    Matrix y = ax + w;
    y.ensure_finite("synthesize_measurements");
    return {std::move(y), std::move(w)};
}

/// One synthetic recovery problem. Invariants (checked on construction):
/// y == a*x_true + w, unit sensing columns, support rows nonzero and the
/// rest exactly zero.
struct ProblemInstance {
    Matrix a;
    Matrix x_true;
    Matrix w;
    Matrix y;
    std::vector<std::size_t> support;
    std::optional<double> snr_db; // empty = noiseless
    std::uint64_t seed = 0;

    void validate() const {
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (std::abs(column_norm(a, j) - 1.0) > 1e-12)
                throw NumericError("ProblemInstance: sensing column not unit norm");
        Matrix resid = y - (matmul(a, x_true) + w);
        for (double v : resid.data())
            if (std::abs(v) > 1e-12)
                throw NumericError("ProblemInstance: y != a*x_true + w");
        std::size_t si = 0;
        for (std::size_t i = 0; i < x_true.rows(); ++i) {
            const bool on_support = si < support.size() && support[si] == i;
            if (on_support) ++si;
            const double rn = row_norm(x_true, i);
            if (on_support && rn == 0.0)
                throw NumericError("ProblemInstance: zero row inside support");
            if (!on_support && rn != 0.0)
                throw NumericError("ProblemInstance: nonzero row outside support");
        }
    }
};

/// Deterministic instance builder; sub-streams are derived from the one seed.
inline ProblemInstance make_instance(std::size_t m, std::size_t n, std::size_t l, std::size_t k,
                                     const std::vector<double>& magnitudes,
                                     std::optional<double> snr_db, std::uint64_t seed) {
    ProblemInstance p;
    p.seed = seed;
    p.snr_db = snr_db;
    p.a = generate_sensing_matrix(m, n, mix_seed(seed, 0));
    RowSparseSignal sig = generate_row_sparse_signal(n, l, k, magnitudes, mix_seed(seed, 1));
    p.x_true = std::move(sig.x);
    p.support = std::move(sig.support);
    auto yw = synthesize_measurements(p.a, p.x_true, snr_db, mix_seed(seed, 2));
    p.y = std::move(yw.first);
    p.w = std::move(yw.second);
    p.validate();
    return p;
}

// --- flat CSV serialization (one file per matrix) ---

inline void write_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

inline std::string matrix_to_csv(const Matrix& m) {
    std::string out;
    out += std::to_string(m.rows());
    out += ',';
    out += std::to_string(m.cols());
    out += '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            write_double(out, m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline void save_matrix_csv(const std::string& path, const Matrix& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_matrix_csv: cannot open " + path);
    f << matrix_to_csv(m);
}

inline Matrix load_matrix_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("load_matrix_csv: cannot open " + path);
    std::string header;
    if (!std::getline(f, header)) throw FormatError("load_matrix_csv: empty file");
    std::size_t comma = header.find(',');
    if (comma == std::string::npos) throw FormatError("load_matrix_csv: bad header");
    const std::size_t rows = std::stoul(header.substr(0, comma));
    const std::size_t cols = std::stoul(header.substr(comma + 1));
    Matrix m(rows, cols);
    std::string line;
    for (std::size_t i = 0; i < rows; ++i) {
        if (!std::getline(f, line)) throw FormatError("load_matrix_csv: truncated data");
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t j = 0; j < cols; ++j) {
            if (!std::getline(ss, cell, ',')) throw FormatError("load_matrix_csv: short row");
            m(i, j) = std::stod(cell);
        }
    }
    m.ensure_finite("load_matrix_csv");
    return m;
}

} // namespace irmmv

#endif
