#ifndef IRMMV_DYNAMICS_HPP
#define IRMMV_DYNAMICS_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irmmv/solver.hpp"

namespace irmmv {

// Rate constant of the perfectly balanced row-norm law, 6 * 2^(2/3).
inline double balanced_rate_constant() { return 6.0 * std::pow(2.0, 2.0 / 3.0); }

/// Per-row and global conserved-quantity audit of a factor state.
struct UnbalancednessReport {
    double epsilon = 0.0;        // |1/2 ||g||^2 - ||V||_F^2|
    double epsilon_r = 0.0;      // max_i |1/2 g_i^2 - sum_j V_ij^2|
    std::vector<double> per_row; // signed per-row differences
};

inline UnbalancednessReport unbalancedness(const FactorPair& fp) {
    fp.ensure_consistent();
    UnbalancednessReport rep;
    rep.per_row.resize(fp.rows());
    double total = 0.0;
    for (std::size_t i = 0; i < fp.rows(); ++i) {
        const double* vi = fp.v.row_ptr(i);
        double v2 = 0.0;
        for (std::size_t j = 0; j < fp.cols(); ++j) v2 += vi[j] * vi[j];
        const double b = 0.5 * fp.g[i] * fp.g[i] - v2;
        rep.per_row[i] = b;
        total += b;
        rep.epsilon_r = std::max(rep.epsilon_r, std::abs(b));
    }
    rep.epsilon = std::abs(total);
    return rep;
}

/// One forward-Euler step of the gradient flow (simultaneous updates).
/// Identical bits to a single simultaneous-mode recovery update with
/// eta_g = eta_v = step: both run through the same loop.
inline FactorPair flow_step(const FactorPair& fp, const Matrix& a, const Matrix& y,
                            double step) {
    if (!(step > 0.0)) throw NumericError("flow_step: step must be positive");
    RecoveryConfig cfg;
    cfg.eta_g = cfg.eta_v = step;
    cfg.max_iters = 1;
    cfg.record_every = 1;
    cfg.loss_tol = 0.0;
    cfg.iterate_tol = 0.0;
    cfg.update_order = UpdateOrder::simultaneous;
    return recover_from(fp, a, y, cfg).factors;
}

/// Integrates the flow for n_steps Euler steps of size `step`, recording
/// every `record_every` steps (factors included so verification passes can
/// reconstruct X(t)). No early stopping.
inline TrajectoryRecord integrate_flow(FactorPair fp0, const Matrix& a, const Matrix& y,
                                       double step, std::size_t n_steps,
                                       std::size_t record_every, bool record_factors = true) {
    if (!(step > 0.0)) throw NumericError("integrate_flow: step must be positive");
    RecoveryConfig cfg;
    cfg.eta_g = cfg.eta_v = step;
    cfg.max_iters = n_steps;
    cfg.record_every = record_every;
    cfg.loss_tol = 0.0;
    cfg.iterate_tol = 0.0;
    cfg.update_order = UpdateOrder::simultaneous;
    cfg.record_factors = record_factors;
    TrajectoryRecord traj = recover_from(std::move(fp0), a, y, cfg).trajectory;
    traj.time_step = step;
    return traj;
}

/// One row of a verification report, mirroring the dynamics CSV schema.
struct CheckRow {
    std::string check;
    long row = -1; // -1 = global
    double time = 0.0;
    double lhs = 0.0;
    double rhs_lower = 0.0;
    double rhs_upper = 0.0;
    double violation = 0.0;
};

struct CheckReport {
    std::string check;
    bool passed = true;
    double max_violation = 0.0;
    double max_drift = 0.0;        // balancedness checks
    double max_rel_residual = 0.0; // rate-law check
    std::size_t n_checked = 0;
    std::vector<CheckRow> rows;

    void note(CheckRow r) {
        max_violation = std::max(max_violation, r.violation);
        if (r.violation > 0.0) passed = false;
        ++n_checked;
        rows.push_back(std::move(r));
    }
};

inline std::string reports_to_csv(const std::vector<CheckReport>& reports) {
    std::string out = "check,row,time,lhs,rhs_lower,rhs_upper,violation\n";
    char buf[200];
    for (const auto& rep : reports)
        for (const auto& r : rep.rows) {
            std::snprintf(buf, sizeof buf, "%s,%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          r.check.c_str(), r.row, r.time, r.lhs, r.rhs_lower, r.rhs_upper,
                          r.violation);
            out += buf;
        }
    return out;
}

inline void write_reports_csv(const std::string& path, const std::vector<CheckReport>& reports) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_reports_csv: cannot open " + path);
    f << reports_to_csv(reports);
}

/// Checks that both conserved quantities stay within tol of their t=0 values
/// at every recorded sample (global sum and each row separately).
inline CheckReport verify_balancedness(const TrajectoryRecord& traj, double tol) {
    CheckReport rep;
    rep.check = "balance";
    if (traj.samples() == 0) throw NumericError("verify_balancedness: empty trajectory");
    const std::size_t n = traj.half_g_sq[0].size();
    std::vector<double> b0(n);
    double g0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        b0[i] = traj.half_g_sq[0][i] - traj.v_row_sq[0][i];
        g0 += b0[i];
    }
    for (std::size_t k = 0; k < traj.samples(); ++k) {
        const double t = static_cast<double>(traj.times[k]) * traj.time_step;
        double gsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double b = traj.half_g_sq[k][i] - traj.v_row_sq[k][i];
            gsum += b;
            const double drift = std::abs(b - b0[i]);
            rep.max_drift = std::max(rep.max_drift, drift);
            CheckRow r{"balance_row", static_cast<long>(i), t, b, b0[i] - tol, b0[i] + tol,
                       std::max(drift - tol, 0.0)};
            rep.note(std::move(r));
        }
        const double gdrift = std::abs(gsum - g0);
        rep.max_drift = std::max(rep.max_drift, gdrift);
        CheckRow r{"balance_global", -1, t, gsum, g0 - tol, g0 + tol,
                   std::max(gdrift - tol, 0.0)};
        rep.note(std::move(r));
    }
    return rep;
}

namespace detail {

/// Central-difference estimates of d/dt row_norm at interior samples.
/// Returns pairs (sample index, derivative vector).
inline std::vector<std::pair<std::size_t, std::vector<double>>>
row_norm_derivatives(const TrajectoryRecord& traj) {
    std::vector<std::pair<std::size_t, std::vector<double>>> out;
    if (traj.samples() < 3) return out;
    const std::size_t n = traj.row_norms[0].size();
    for (std::size_t k = 1; k + 1 < traj.samples(); ++k) {
        const double dt =
            static_cast<double>(traj.times[k + 1] - traj.times[k - 1]) * traj.time_step;
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i)
            d[i] = (traj.row_norms[k + 1][i] - traj.row_norms[k - 1][i]) / dt;
        out.emplace_back(k, std::move(d));
    }
    return out;
}

inline double sample_epsilon(const TrajectoryRecord& traj, std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i < traj.half_g_sq[k].size(); ++i)
        s += traj.half_g_sq[k][i] - traj.v_row_sq[k][i];
    return std::abs(s);
}

} // namespace detail

/// The (conserved) global unbalancedness of a run, taken as the max over
/// samples so integrator drift only ever loosens the Lemma-2 bounds.
inline double run_epsilon(const TrajectoryRecord& traj) {
    double e = 0.0;
    for (std::size_t k = 0; k < traj.samples(); ++k)
        e = std::max(e, detail::sample_epsilon(traj, k));
    return e;
}

/// Row-norm velocity bounds: for s_i = <lambda_i, xhat_i> >= 0,
///   6 s_i r^2/(eps + r^{2/3})  <=  d/dt r  <=  24 s_i (eps + r^{2/3})^2,
/// with both inequalities reversed when s_i < 0. Rows with zero g or zero V
/// are outside the statement and are only checked for the trivial 0 == 0.
inline CheckReport verify_row_norm_bounds(const TrajectoryRecord& traj, double eps,
                                          double tol) {
    CheckReport rep;
    rep.check = "lemma2";
    for (const auto& [k, deriv] : detail::row_norm_derivatives(traj)) {
        const double t = static_cast<double>(traj.times[k]) * traj.time_step;
        for (std::size_t i = 0; i < deriv.size(); ++i) {
            const double r = traj.row_norms[k][i];
            const double s = traj.residual_corr[k][i];
            if (traj.half_g_sq[k][i] == 0.0 || traj.v_row_sq[k][i] == 0.0) {
                // zero rows: derivative and both bounds are identically zero
                CheckRow row{"lemma2_zero_row", static_cast<long>(i), t, deriv[i], 0.0, 0.0,
                             std::abs(deriv[i])};
                rep.note(std::move(row));
                continue;
            }
            const double env = eps + std::cbrt(r * r); // eps + r^{2/3}
            const double wide = 24.0 * s * env * env;
            const double tight = 6.0 * s * (r * r) / env;
            const double lo = s >= 0.0 ? tight : wide;
            const double hi = s >= 0.0 ? wide : tight;
            const double viol = std::max(
                std::max(lo - tol * (1.0 + std::abs(lo)) - deriv[i],
                         deriv[i] - hi - tol * (1.0 + std::abs(hi))),
                0.0);
            CheckRow row{"lemma2", static_cast<long>(i), t, deriv[i], lo, hi, viol};
            rep.note(std::move(row));
        }
    }
    return rep;
}

/// Perfect-balance rate law: d/dt r_i = 6 * 2^(2/3) * s_i * r_i^{4/3}.
inline CheckReport verify_rate_law(const TrajectoryRecord& traj, double tol) {
    CheckReport rep;
    rep.check = "lemma3";
    const double c = balanced_rate_constant();
    for (const auto& [k, deriv] : detail::row_norm_derivatives(traj)) {
        const double t = static_cast<double>(traj.times[k]) * traj.time_step;
        for (std::size_t i = 0; i < deriv.size(); ++i) {
            const double r = traj.row_norms[k][i];
            const double s = traj.residual_corr[k][i];
            const double rhs = c * s * r * std::cbrt(r); // r^{4/3}
            const double resid = std::abs(deriv[i] - rhs);
            const double scale = 1.0 + std::abs(rhs);
            rep.max_rel_residual = std::max(rep.max_rel_residual, resid / scale);
            CheckRow row{"lemma3", static_cast<long>(i), t, deriv[i], rhs, rhs,
                         std::max(resid - tol * scale, 0.0)};
            rep.note(std::move(row));
        }
    }
    return rep;
}

/// Inputs of the Lipschitz-smoothness constant: entry bounds on the factors
/// and measurements over the domain of interest, plus problem dimensions.
struct SmoothnessParams {
    double b_g = 1.0; // bound on |g_i|
    double b_v = 1.0; // bound on |V_ij|
    double b_y = 1.0; // max |Y_ij|
    double c = 2.0;   // must satisfy c >= max{1, b_g, 2 b_v}
    double mu = 0.0;  // sensing-matrix coherence, in [0, 1]
    std::size_t m = 1, n = 1, l = 1;

    static SmoothnessParams from_bounds(double b_g, double b_v, double b_y, double mu,
                                        std::size_t m, std::size_t n, std::size_t l) {
        SmoothnessParams p;
        p.b_g = b_g;
        p.b_v = b_v;
        p.b_y = b_y;
        p.c = std::max({1.0, b_g, 2.0 * b_v});
        p.mu = mu;
        p.m = m;
        p.n = n;
        p.l = l;
        return p;
    }

    void validate() const {
        if (c < std::max({1.0, b_g, 2.0 * b_v}))
            throw NumericError("SmoothnessParams: c < max{1, b_g, 2 b_v}");
        if (mu < 0.0 || mu > 1.0) throw NumericError("SmoothnessParams: mu outside [0,1]");
    }
};

/// beta = 16 N L^{3/2} ((N+1) mu C^4 + M B_Y C).
inline double beta_constant(const SmoothnessParams& p) {
    p.validate();
    const double nn = static_cast<double>(p.n);
    const double ll = static_cast<double>(p.l);
    const double mm = static_cast<double>(p.m);
    const double c4 = p.c * p.c * p.c * p.c;
    return 16.0 * nn * std::pow(ll, 1.5) * ((nn + 1.0) * p.mu * c4 + mm * p.b_y * p.c);
}

/// Log of the largest initialization scale the closeness guarantee admits:
///   log eps_app - log(2 (Dt+2)^2) - beta T - 1/2 log(2 L N (2L+3)),
/// with Dt = N^{1/3} sqrt(2L+1) (d/2 + 1/2)^{1/3}. Log domain because
/// exp(-beta T) underflows doubles at realistic beta.
inline double theorem_init_bound_log(double eps_app, double beta, double t_horizon,
                                     std::size_t n, std::size_t l, double d) {
    if (!(eps_app > 0.0)) throw NumericError("theorem_init_bound_log: eps_app must be > 0");
    const double nn = static_cast<double>(n), ll = static_cast<double>(l);
    const double base = d / 2.0 + 0.5;
    if (base < 0.0) throw NumericError("theorem_init_bound_log: d/2 + 1/2 must be >= 0");
    const double dtilde = std::cbrt(nn) * std::sqrt(2.0 * ll + 1.0) * std::cbrt(base);
    return std::log(eps_app) - std::log(2.0 * (dtilde + 2.0) * (dtilde + 2.0)) -
           beta * t_horizon - 0.5 * std::log(2.0 * ll * nn * (2.0 * ll + 3.0));
}

/// Admissible interval for rho^{1/3}. Empty when alpha_v is too large for the
/// horizon (negative discriminant or lower endpoint above the alpha_v cap).
inline std::optional<std::pair<double, double>> rho_interval(double alpha_v, double beta,
                                                             double t_horizon, std::size_t n,
                                                             std::size_t l) {
    if (!(alpha_v > 0.0)) throw NumericError("rho_interval: alpha_v must be positive");
    const double nn = static_cast<double>(n), ll = static_cast<double>(l);
    // discriminant exp(-2 beta T)/(2LN) - alpha_v^2 (sqrt(2L)-1)^2 / 4, in logs
    const double t1 = -2.0 * beta * t_horizon - std::log(2.0 * ll * nn);
    const double t2 = 2.0 * std::log(alpha_v * (std::sqrt(2.0 * ll) - 1.0) / 2.0);
    if (t2 >= t1) return std::nullopt;
    const double log_eps_alpha = 0.5 * (t1 + std::log1p(-std::exp(t2 - t1)));
    const double eps_alpha = std::exp(log_eps_alpha);
    const double lo = (std::sqrt(ll / 2.0) + 0.5) * alpha_v - eps_alpha;
    const double hi = alpha_v; // capped by rho <= alpha_v^3
    if (lo > hi) return std::nullopt;
    return std::make_pair(lo, hi);
}

/// Default rho: alpha_v^3 clipped into the admissible interval.
inline double default_rho(double alpha_v, const std::pair<double, double>& interval) {
    const double r13 = std::min(alpha_v, interval.second);
    if (r13 < interval.first)
        throw NumericError("default_rho: alpha_v^3 below the admissible interval");
    return r13 * r13 * r13;
}

/// Rank-K comparison trajectory: support rows start at
///   g_i(0) = sqrt(2) rho^{1/3},   V_ij(0) = rho^{1/3} v0_ij / ||v0_i:||,
/// all other rows exactly zero, then the same flow dynamics are integrated.
struct ReferenceTrajectory {
    std::vector<std::size_t> support;
    double rho = 0.0;
    FactorPair factors0;
    TrajectoryRecord trajectory;
};

inline ReferenceTrajectory build_reference_trajectory(const std::vector<std::size_t>& support,
                                                      double rho, const Matrix& v0,
                                                      const Matrix& a, const Matrix& y,
                                                      double step, std::size_t n_steps,
                                                      std::size_t record_every) {
    if (!(rho > 0.0)) throw NumericError("build_reference_trajectory: rho must be positive");
    const std::size_t n = v0.rows(), l = v0.cols();
    const double r13 = std::cbrt(rho);
    FactorPair fp;
    fp.g.assign(n, 0.0);
    fp.v = Matrix(n, l);
    for (std::size_t s : support) {
        if (s >= n) throw DimensionError("build_reference_trajectory: support index out of range");
        const double vn = row_norm(v0, s);
        if (vn == 0.0)
            throw NumericError("build_reference_trajectory: zero v0 row on support");
        fp.g[s] = std::sqrt(2.0) * r13;
        const double* src = v0.row_ptr(s);
        double* dst = fp.v.row_ptr(s);
        for (std::size_t j = 0; j < l; ++j) dst[j] = r13 * src[j] / vn;
    }
    ReferenceTrajectory out;
    out.support = support;
    out.rho = rho;
    out.factors0 = fp;
    out.trajectory = integrate_flow(std::move(fp), a, y, step, n_steps, record_every, true);

    // gradients vanish identically on zero rows, so anything else is a bug
    std::vector<bool> on(n, false);
    for (std::size_t s : support) on[s] = true;
    for (const auto& snap : out.trajectory.factors)
        for (std::size_t i = 0; i < n; ++i) {
            if (on[i]) continue;
            bool zero = snap.g[i] == 0.0;
            const double* vi = snap.v.row_ptr(i);
            for (std::size_t j = 0; j < l && zero; ++j) zero = vi[j] == 0.0;
            if (!zero)
                throw NumericError(
                    "build_reference_trajectory: off-support row became nonzero");
        }
    return out;
}

namespace detail {

/// Parameter-space norm used throughout the analysis:
/// ||(g, V)||^2 = L ||g||^2 + ||V||_F^2.
inline double param_norm(const FactorPair& fp) {
    double gs = 0.0;
    for (double v : fp.g) gs += v * v;
    return std::sqrt(static_cast<double>(fp.cols()) * gs + frobenius_norm_sq(fp.v));
}

inline double param_dist_sq(const FactorPair& a, const FactorPair& b) {
    double gs = 0.0;
    for (std::size_t i = 0; i < a.g.size(); ++i) {
        const double d = a.g[i] - b.g[i];
        gs += d * d;
    }
    double vs = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v.data()[i] - b.v.data()[i];
        vs += d * d;
    }
    return static_cast<double>(a.cols()) * gs + vs;
}

} // namespace detail

struct ClosenessReport {
    double max_distance = 0.0;   // max ||X - X~||_F over the guarded window
    double eps_app = 0.0;
    bool guarantee_held = false; // max_distance < eps_app until T or exit
    std::optional<double> first_exit_time; // first t with ||X(t)||_F >= d
    double lemma4_min_residual = 0.0;      // min of (8 D^4 * param_dist - dist^2)
    std::vector<CheckRow> rows;
};

/// Compares an estimated trajectory against a reference one sampled at the
/// same times: Theorem-style closeness inside the ball of radius d, plus the
/// parameter-distance bound at every sample.
inline ClosenessReport verify_trajectory_closeness(const TrajectoryRecord& est,
                                                   const ReferenceTrajectory& ref,
                                                   double eps_app, double d) {
    const TrajectoryRecord& rt = ref.trajectory;
    if (est.samples() != rt.samples() || est.factors.size() != est.samples() ||
        rt.factors.size() != rt.samples())
        throw DimensionError("verify_trajectory_closeness: trajectories must carry factors "
                             "sampled at identical times");
    ClosenessReport rep;
    rep.eps_app = eps_app;
    rep.lemma4_min_residual = std::numeric_limits<double>::infinity();
    bool inside = true;
    bool held = true;
    for (std::size_t k = 0; k < est.samples(); ++k) {
        if (est.times[k] != rt.times[k])
            throw DimensionError("verify_trajectory_closeness: sample times differ");
        const double t = static_cast<double>(est.times[k]) * est.time_step;
        const Matrix xe = reconstruct(est.factors[k]);
        const Matrix xr = reconstruct(rt.factors[k]);
        const double dist = frobenius_norm(xe - xr);
        const double dball = std::max(detail::param_norm(est.factors[k]),
                                      detail::param_norm(rt.factors[k]));
        const double pd = detail::param_dist_sq(est.factors[k], rt.factors[k]);
        const double bound = 8.0 * dball * dball * dball * dball * pd;
        rep.lemma4_min_residual = std::min(rep.lemma4_min_residual, bound - dist * dist);
        rep.rows.push_back({"lemma4", -1, t, dist * dist, 0.0, bound,
                            std::max(dist * dist - bound, 0.0)});
        if (inside && frobenius_norm(xe) >= d) {
            inside = false;
            rep.first_exit_time = t;
        }
        if (inside) {
            rep.max_distance = std::max(rep.max_distance, dist);
            if (dist >= eps_app) held = false;
            rep.rows.push_back({"theorem1", -1, t, dist, 0.0, eps_app,
                                std::max(dist - eps_app, 0.0)});
        }
    }
    rep.guarantee_held = held;
    return rep;
}

struct CorollaryReport {
    bool conclusive = false;     // reference entered the eps_app ball in time
    double t_c = 0.0;            // first entry time
    double max_dist_after_tc = 0.0;
    bool bound_held = false;     // ||X(t) - X*|| <= 2 eps_app for t in [T_c, T]
    double slack = 0.0;          // 2 eps_app - max_dist_after_tc
};

/// Checks the convergence conclusion: once the reference trajectory stays
/// within eps_app of x_star, the estimate must stay within 2 eps_app.
inline CorollaryReport verify_corollary_convergence(const TrajectoryRecord& est,
                                                    const ReferenceTrajectory& ref,
                                                    const Matrix& x_star, double eps_app) {
    const TrajectoryRecord& rt = ref.trajectory;
    if (est.samples() != rt.samples() || est.factors.size() != est.samples() ||
        rt.factors.size() != rt.samples())
        throw DimensionError("verify_corollary_convergence: trajectories must carry factors "
                             "sampled at identical times");
    CorollaryReport rep;
    std::optional<std::size_t> kc;
    for (std::size_t k = 0; k < rt.samples(); ++k) {
        if (frobenius_norm(reconstruct(rt.factors[k]) - x_star) <= eps_app) {
            kc = k;
            break;
        }
    }
    if (!kc) return rep; // inconclusive: never entered the ball within horizon
    rep.conclusive = true;
    rep.t_c = static_cast<double>(est.times[*kc]) * est.time_step;
    for (std::size_t k = *kc; k < est.samples(); ++k) {
        const double dist = frobenius_norm(reconstruct(est.factors[k]) - x_star);
        rep.max_dist_after_tc = std::max(rep.max_dist_after_tc, dist);
    }
    rep.slack = 2.0 * eps_app - rep.max_dist_after_tc;
    rep.bound_held = rep.max_dist_after_tc <= 2.0 * eps_app;
    return rep;
}

} // namespace irmmv

#endif
