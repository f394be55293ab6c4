#ifndef IRMMV_BASELINES_HPP
#define IRMMV_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "irmmv/matrix.hpp"

namespace irmmv {

struct BaselineConfig {
    std::size_t k = 0;       // required by somp / msp
    double p = 0.8;          // focuss diversity exponent, in (0, 1]
    double lambda = 0.0;     // focuss regularization (noise variance when known)
    std::size_t max_iters = 200; // focuss
    std::size_t sp_max_iters = 50;
    double conv_tol = 1e-8;
    double prune_tol = 1e-10; // rows below this norm are set exactly to zero
};

struct BaselineResult {
    Matrix x_hat;
    std::vector<std::size_t> support; // sorted; empty for focuss
    std::size_t iterations = 0;
    std::vector<double> objective_history; // focuss regularized objective
};

/// Per-entry noise variance matching an SNR: ||AX||_F^2 / (M L 10^{snr/10}).
inline double noise_variance_for(const Matrix& a, const Matrix& x, double snr_db) {
    const Matrix ax = matmul(a, x);
    return frobenius_norm_sq(ax) /
           (static_cast<double>(ax.rows() * ax.cols()) * std::pow(10.0, snr_db / 10.0));
}

namespace detail {

inline Matrix columns_subset(const Matrix& a, const std::vector<std::size_t>& idx) {
    Matrix s(a.rows(), idx.size());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row_ptr(i);
        double* si = s.row_ptr(i);
        for (std::size_t j = 0; j < idx.size(); ++j) si[j] = ai[idx[j]];
    }
    return s;
}

/// Least-squares fit restricted to the support rows; everything else zero.
inline Matrix restricted_fit(const Matrix& a, const Matrix& y,
                             const std::vector<std::size_t>& support) {
    const Matrix sub = columns_subset(a, support);
    const Matrix coef = ridge_solve(sub, y, 0.0);
    Matrix x(a.cols(), y.cols());
    for (std::size_t j = 0; j < support.size(); ++j) {
        const double* src = coef.row_ptr(j);
        double* dst = x.row_ptr(support[j]);
        std::copy(src, src + y.cols(), dst);
    }
    return x;
}

/// Row l2 norms of A^T R: the greedy selection scores.
inline std::vector<double> correlation_scores(const Matrix& a, const Matrix& r) {
    const Matrix c = matmul_at_b(a, r);
    std::vector<double> s(c.rows());
    for (std::size_t i = 0; i < c.rows(); ++i) s[i] = row_norm(c, i);
    return s;
}

/// Indices of the k largest scores; ties go to the lowest index.
inline std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace detail

/// Simultaneous orthogonal matching pursuit: greedily grows the shared row
/// support by the column best correlated (row l2 norm of A^T R) with the
/// residual, refitting by least squares each round. Exactly k nonzero rows.
inline BaselineResult somp_recover(const Matrix& a, const Matrix& y,
                                   const BaselineConfig& cfg) {
    if (cfg.k < 1 || cfg.k > a.cols())
        throw DimensionError("somp_recover: need 1 <= k <= a.cols()");
    Matrix r = y;
    std::vector<std::size_t> support;
    std::vector<bool> used(a.cols(), false);
    Matrix x(a.cols(), y.cols());
    for (std::size_t round = 0; round < cfg.k; ++round) {
        const std::vector<double> scores = detail::correlation_scores(a, r);
        std::size_t best = a.cols();
        double best_score = -1.0;
        for (std::size_t j = 0; j < scores.size(); ++j)
            if (!used[j] && scores[j] > best_score) {
                best = j;
                best_score = scores[j];
            }
        used[best] = true;
        support.push_back(best);
        std::sort(support.begin(), support.end());
        x = detail::restricted_fit(a, y, support);
        r = y - matmul(a, x);
    }
    return {std::move(x), std::move(support), cfg.k, {}};
}

/// Simultaneous subspace pursuit: keeps a size-k candidate support, each
/// round merging in the k strongest residual correlations, refitting on the
/// union and retaining the k largest rows. Stops when the support repeats or
/// the residual stops improving; the best residual seen wins.
inline BaselineResult msp_recover(const Matrix& a, const Matrix& y,
                                  const BaselineConfig& cfg) {
    if (cfg.k < 1 || cfg.k > a.cols())
        throw DimensionError("msp_recover: need 1 <= k <= a.cols()");
    std::vector<std::size_t> support = detail::top_k(detail::correlation_scores(a, y), cfg.k);
    Matrix x = detail::restricted_fit(a, y, support);
    Matrix r = y - matmul(a, x);
    double best_res = frobenius_norm(r);
    std::vector<std::size_t> best_support = support;
    Matrix best_x = x;
    double prev_res = best_res;
    std::size_t iters = 1;
    for (; iters < cfg.sp_max_iters; ++iters) {
        const std::vector<std::size_t> extra =
            detail::top_k(detail::correlation_scores(a, r), cfg.k);
        std::set<std::size_t> merged(support.begin(), support.end());
        merged.insert(extra.begin(), extra.end());
        const std::vector<std::size_t> unioned(merged.begin(), merged.end());
        const Matrix xu = detail::restricted_fit(a, y, unioned);
        std::vector<double> norms(unioned.size());
        for (std::size_t j = 0; j < unioned.size(); ++j)
            norms[j] = row_norm(xu, unioned[j]);
        const std::vector<std::size_t> keep = detail::top_k(norms, cfg.k);
        std::vector<std::size_t> next;
        next.reserve(cfg.k);
        for (std::size_t j : keep) next.push_back(unioned[j]);
        std::sort(next.begin(), next.end());

        x = detail::restricted_fit(a, y, next);
        r = y - matmul(a, x);
        const double res = frobenius_norm(r);
        if (res < best_res) {
            best_res = res;
            best_support = next;
            best_x = x;
        }
        if (next == support) break; // support stabilized
        if (res >= prev_res) break; // residual stopped decreasing; keep the best seen
        support = std::move(next);
        prev_res = res;
    }
    return {std::move(best_x), std::move(best_support), iters, {}};
}

/// Regularized M-FOCUSS (iteratively reweighted least squares with row
/// diversity exponent p): weights w_i = ||X_i:||^{1 - p/2}, then
/// X <- diag(w^2) A^T (A diag(w^2) A^T + lambda I)^{-1} Y, pruning rows that
/// fall below prune_tol. Deterministic; stops on relative change < conv_tol.
inline BaselineResult mfocuss_recover(const Matrix& a, const Matrix& y,
                                      const BaselineConfig& cfg) {
    if (!(cfg.p > 0.0 && cfg.p <= 1.0))
        throw NumericError("mfocuss_recover: p must be in (0, 1]");
    if (cfg.lambda < 0.0) throw NumericError("mfocuss_recover: negative lambda");
    const std::size_t n = a.cols(), m = a.rows(), l = y.cols();
    Matrix x = matmul_at_b(a, y); // correlation initialization
    BaselineResult out;
    const double weight_exp = 1.0 - cfg.p / 2.0;

    auto objective = [&](const Matrix& xx) {
        double obj = frobenius_norm_sq(y - matmul(a, xx));
        for (std::size_t i = 0; i < n; ++i) obj += cfg.lambda * std::pow(row_norm(xx, i), cfg.p);
        return obj;
    };

    std::size_t it = 0;
    for (; it < cfg.max_iters; ++it) {
        std::vector<double> w2(n, 0.0);
        std::size_t active = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = row_norm(x, i);
            if (c > cfg.prune_tol) {
                const double w = std::pow(c, weight_exp);
                w2[i] = w * w;
                ++active;
            }
        }
        if (active == 0)
            throw NumericError("mfocuss_recover: all rows pruned (degenerate solution)");

        // B = A diag(w^2) A^T + lambda I  (m x m, SPD for lambda > 0; for
        // lambda = 0 it needs enough active rows to reach full rank)
        Matrix aw2(m, n);
        for (std::size_t i = 0; i < m; ++i) {
            const double* ai = a.row_ptr(i);
            double* oi = aw2.row_ptr(i);
            for (std::size_t j = 0; j < n; ++j) oi[j] = ai[j] * w2[j];
        }
        Matrix b(m, m);
        for (std::size_t i = 0; i < m; ++i) {
            const double* wi = aw2.row_ptr(i);
            for (std::size_t j = 0; j < m; ++j) {
                const double* aj = a.row_ptr(j);
                double s = 0.0;
                for (std::size_t c = 0; c < n; ++c) s += wi[c] * aj[c];
                b(i, j) = s;
            }
        }
        for (std::size_t i = 0; i < m; ++i) b(i, i) += cfg.lambda;
        const Matrix q = detail::spd_solve(std::move(b), y); // m x l
        // X = diag(w^2) A^T q
        Matrix x_next(n, l);
        for (std::size_t r = 0; r < m; ++r) {
            const double* ar = a.row_ptr(r);
            const double* qr = q.row_ptr(r);
            for (std::size_t i = 0; i < n; ++i) {
                if (w2[i] == 0.0) continue;
                double* xi = x_next.row_ptr(i);
                const double s = ar[i] * w2[i];
                for (std::size_t c = 0; c < l; ++c) xi[c] += s * qr[c];
            }
        }
        x_next.ensure_finite("mfocuss_recover");
        out.objective_history.push_back(objective(x_next));

        const double denom = std::max(frobenius_norm(x), 1e-300);
        const double rel = frobenius_norm(x_next - x) / denom;
        x = std::move(x_next);
        if (rel < cfg.conv_tol) {
            ++it;
            break;
        }
    }
    // final prune to exact zeros
    for (std::size_t i = 0; i < n; ++i)
        if (row_norm(x, i) <= cfg.prune_tol)
            std::fill(x.row_ptr(i), x.row_ptr(i) + l, 0.0);
    out.x_hat = std::move(x);
    out.iterations = it;
    return out;
}

} // namespace irmmv

#endif
