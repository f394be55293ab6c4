#ifndef IRMMV_SOLVER_HPP
#define IRMMV_SOLVER_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irmmv/matrix.hpp"

namespace irmmv {

/// Overparameterization state: a per-row scaling vector g and a component
/// matrix v, reconstructing X with X_ij = g_i^2 * v_ij.
struct FactorPair {
    std::vector<double> g; // length n
    Matrix v;              // n x l

    std::size_t rows() const { return g.size(); }
    std::size_t cols() const { return v.cols(); }

    void ensure_consistent() const {
        if (g.size() != v.rows())
            throw DimensionError("FactorPair: g length != v rows");
    }
};

enum class UpdateOrder {
    sequential,  // v update uses g(t+1), as the recovery loop is written
    simultaneous // both updates use time-t quantities (flow discretization)
};

struct RecoveryConfig {
    double alpha_g = 1e-4;
    std::optional<double> alpha_v; // default alpha_g / sqrt(2 L), the balanced choice
    double eta_g = 1e-2;
    double eta_v = 1e-2;
    std::size_t max_iters = 5'000'000;
    std::size_t record_every = 0;  // 0 = auto: keeps at most ~1e4 samples
    double loss_tol = 1e-12;       // early stop (checked at recorded samples)
    double iterate_tol = 1e-14;    // early stop on relative iterate change
    UpdateOrder update_order = UpdateOrder::sequential;
    bool record_factors = false;

    double resolved_alpha_v(std::size_t l) const {
        return alpha_v ? *alpha_v : alpha_g / std::sqrt(2.0 * static_cast<double>(l));
    }
    std::size_t resolved_record_every() const {
        if (record_every) return record_every;
        return std::max<std::size_t>(1, max_iters / 10000);
    }
};

/// Sampled time series of the quantities the analysis tracks. All per-sample
/// vectors have length n; `times` is strictly increasing iteration indices.
/// For flow runs, time_step converts an iteration index into flow time.
struct TrajectoryRecord {
    std::vector<std::size_t> times;
    std::vector<double> loss;
    std::vector<std::vector<double>> row_norms;     // ||X_i:||_2
    std::vector<std::vector<double>> half_g_sq;     // g_i^2 / 2
    std::vector<std::vector<double>> v_row_sq;      // sum_j v_ij^2
    std::vector<std::vector<double>> residual_corr; // <lambda_i, xhat_i>
    std::vector<FactorPair> factors;                // only when recorded
    double time_step = 1.0;
    double min_g = std::numeric_limits<double>::infinity(); // over all iterations

    std::size_t samples() const { return times.size(); }

    std::string to_csv() const {
        std::string out = "iter,loss,row,half_g_sq,v_row_sq,row_norm,residual_corr\n";
        char buf[40];
        for (std::size_t k = 0; k < samples(); ++k) {
            for (std::size_t i = 0; i < row_norms[k].size(); ++i) {
                out += std::to_string(times[k]);
                out += ',';
                std::snprintf(buf, sizeof buf, "%.17g", loss[k]);
                out += buf;
                out += ',';
                out += std::to_string(i);
                for (double v : {half_g_sq[k][i], v_row_sq[k][i], row_norms[k][i],
                                 residual_corr[k][i]}) {
                    std::snprintf(buf, sizeof buf, ",%.17g", v);
                    out += buf;
                }
                out += '\n';
            }
        }
        return out;
    }

    void write_csv(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("TrajectoryRecord: cannot open " + path);
        f << to_csv();
    }
};

/// Gradient descent blew up; carries the last finite reconstruction.
struct DivergenceError : NumericError {
    DivergenceError(std::string msg, Matrix last, std::size_t iter)
        : NumericError(std::move(msg)), last_iterate(std::move(last)), iteration(iter) {}
    Matrix last_iterate;
    std::size_t iteration;
};

/// g(0) = alpha_g * 1, v(0) = alpha_v * 1 (balanced by default).
inline FactorPair init_factors(std::size_t n, std::size_t l, const RecoveryConfig& cfg) {
    FactorPair fp;
    fp.g.assign(n, cfg.alpha_g);
    fp.v = Matrix(n, l, cfg.resolved_alpha_v(l));
    return fp;
}

inline Matrix reconstruct(const FactorPair& fp) {
    fp.ensure_consistent();
    Matrix x = fp.v;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double g2 = fp.g[i] * fp.g[i];
        double* r = x.row_ptr(i);
        for (std::size_t j = 0; j < x.cols(); ++j) r[j] *= g2;
    }
    return x;
}

/// Lambda = A^T (Y - A X).
inline Matrix residual_lambda(const Matrix& a, const Matrix& y, const Matrix& x) {
    if (a.cols() != x.rows() || a.rows() != y.rows() || x.cols() != y.cols())
        throw DimensionError("residual_lambda: shape mismatch");
    return matmul_at_b(a, y - matmul(a, x));
}

/// ||Y - A * reconstruct(fp)||_F^2.
inline double loss(const FactorPair& fp, const Matrix& a, const Matrix& y) {
    if (a.cols() != fp.rows() || a.rows() != y.rows() || fp.cols() != y.cols())
        throw DimensionError("loss: shape mismatch");
    return frobenius_norm_sq(y - matmul(a, reconstruct(fp)));
}

struct Gradients {
    std::vector<double> g;
    Matrix v;
};

/// Analytic gradients of the loss:
///   d/dg_i   = -4 g_i sum_j Lambda_ij v_ij
///   d/dv_ij  = -2 g_i^2 Lambda_ij
inline Gradients gradients(const FactorPair& fp, const Matrix& a, const Matrix& y) {
    fp.ensure_consistent();
    Matrix lam = residual_lambda(a, y, reconstruct(fp));
    Gradients out;
    out.g.assign(fp.rows(), 0.0);
    out.v = Matrix(fp.rows(), fp.cols());
    for (std::size_t i = 0; i < fp.rows(); ++i) {
        const double* li = lam.row_ptr(i);
        const double* vi = fp.v.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < fp.cols(); ++j) s += li[j] * vi[j];
        out.g[i] = -4.0 * fp.g[i] * s;
        const double g2 = fp.g[i] * fp.g[i];
        double* go = out.v.row_ptr(i);
        for (std::size_t j = 0; j < fp.cols(); ++j) go[j] = -2.0 * g2 * li[j];
    }
    return out;
}

struct RecoveryResult {
    Matrix x_hat;
    TrajectoryRecord trajectory;
    std::size_t iterations = 0;
    double final_loss = 0.0;
    FactorPair factors; // final state
};

namespace detail {

inline void record_sample(TrajectoryRecord& tr, std::size_t t, double loss_value,
                          const FactorPair& fp, const Matrix& x, const Matrix& lam,
                          bool keep_factors) {
    const std::size_t n = fp.rows(), l = fp.cols();
    tr.times.push_back(t);
    tr.loss.push_back(loss_value);
    std::vector<double> rn(n), hg(n), vr(n), rc(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.row_ptr(i);
        const double* li = lam.row_ptr(i);
        const double* vi = fp.v.row_ptr(i);
        double r2 = 0.0, lx = 0.0, v2 = 0.0;
        for (std::size_t j = 0; j < l; ++j) {
            r2 += xi[j] * xi[j];
            lx += li[j] * xi[j];
            v2 += vi[j] * vi[j];
        }
        rn[i] = std::sqrt(r2);
        hg[i] = 0.5 * fp.g[i] * fp.g[i];
        vr[i] = v2;
        rc[i] = rn[i] > 0.0 ? lx / rn[i] : 0.0; // xhat_i = 0 when the row is zero
    }
    tr.row_norms.push_back(std::move(rn));
    tr.half_g_sq.push_back(std::move(hg));
    tr.v_row_sq.push_back(std::move(vr));
    tr.residual_corr.push_back(std::move(rc));
    if (keep_factors) tr.factors.push_back(fp);
}

} // namespace detail

/// Gradient-descent recovery loop starting from a given factor state.
/// Lambda is computed once per iteration from X(t); in sequential mode the
/// v-update then uses g(t+1), in simultaneous mode g(t). Lambda uses the
/// precomputed Gram form A^T Y - (A^T A) X, the same residual at far lower
/// per-iteration cost; recorded losses use the direct ||Y - A X||_F^2.
inline RecoveryResult recover_from(FactorPair fp, const Matrix& a, const Matrix& y,
                                   const RecoveryConfig& cfg) {
    fp.ensure_consistent();
    if (a.cols() != fp.rows() || a.rows() != y.rows() || fp.cols() != y.cols())
        throw DimensionError("recover: shape mismatch");
    const std::size_t n = fp.rows(), l = fp.cols();
    const std::size_t cadence = cfg.resolved_record_every();

    Matrix gram = matmul_at_b(a, a);
    Matrix aty = matmul_at_b(a, y);

    Matrix x = reconstruct(fp);
    Matrix x_next(n, l);
    Matrix lam(n, l);
    std::vector<double> g_next(n);
    TrajectoryRecord traj;

    auto compute_lambda = [&] {
        lam = aty;
        detail::gemm_acc_threaded(gram, x, lam, -1.0);
    };
    auto direct_loss = [&] { return frobenius_norm_sq(y - matmul(a, x)); };

    double current_loss = 0.0;
    std::size_t t = 0;
    bool stop = false;
    for (; t < cfg.max_iters && !stop; ++t) {
        compute_lambda();
        if (t % cadence == 0) {
            current_loss = direct_loss();
            detail::record_sample(traj, t, current_loss, fp, x, lam, cfg.record_factors);
            if (current_loss < cfg.loss_tol) break;
        }

        // g(t+1) = g(t) + 4 eta_g (g(t) .* (Lambda .* V) 1)
        for (std::size_t i = 0; i < n; ++i) {
            const double* li = lam.row_ptr(i);
            const double* vi = fp.v.row_ptr(i);
            double s = 0.0;
            for (std::size_t j = 0; j < l; ++j) s += li[j] * vi[j];
            g_next[i] = fp.g[i] + 4.0 * cfg.eta_g * fp.g[i] * s;
        }
        // V(t+1) = V(t) + 2 eta_v (g_sel^2 1) .* Lambda, staged into x_next so
        // a non-finite step can be reported with the pre-update iterate intact.
        double dx_sq = 0.0, x_sq = 0.0;
        double gmin = std::numeric_limits<double>::infinity();
        bool finite = true;
        for (std::size_t i = 0; i < n; ++i) {
            const double gs =
                cfg.update_order == UpdateOrder::sequential ? g_next[i] : fp.g[i];
            const double coef = 2.0 * cfg.eta_v * gs * gs;
            const double g2_next = g_next[i] * g_next[i];
            double* vi = fp.v.row_ptr(i);
            const double* li = lam.row_ptr(i);
            const double* xi = x.row_ptr(i);
            double* xo = x_next.row_ptr(i);
            for (std::size_t j = 0; j < l; ++j) {
                vi[j] += coef * li[j];
                const double xn = g2_next * vi[j];
                const double d = xn - xi[j];
                dx_sq += d * d;
                x_sq += xi[j] * xi[j];
                xo[j] = xn;
                finite = finite && std::isfinite(xn);
            }
            finite = finite && std::isfinite(g_next[i]);
            gmin = std::min(gmin, g_next[i]);
        }
        if (!finite)
            throw DivergenceError("recover: non-finite iterate at t=" + std::to_string(t),
                                  std::move(x), t);
        fp.g.swap(g_next);
        std::swap(x, x_next);
        traj.min_g = std::min(traj.min_g, gmin);
        if (x_sq > 0.0 && std::sqrt(dx_sq / x_sq) < cfg.iterate_tol) stop = true;
    }

    // final sample (state after the last executed update)
    compute_lambda();
    current_loss = direct_loss();
    if (traj.times.empty() || traj.times.back() != t)
        detail::record_sample(traj, t, current_loss, fp, x, lam, cfg.record_factors);

    RecoveryResult out;
    out.x_hat = std::move(x);
    out.trajectory = std::move(traj);
    out.iterations = t;
    out.final_loss = current_loss;
    out.factors = std::move(fp);
    return out;
}

inline RecoveryResult recover(const Matrix& a, const Matrix& y, const RecoveryConfig& cfg) {
    return recover_from(init_factors(a.cols(), y.cols(), cfg), a, y, cfg);
}

} // namespace irmmv

#endif
