#ifndef IRMMV_BENCH_HPP
#define IRMMV_BENCH_HPP

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "irmmv/baselines.hpp"
#include "irmmv/dynamics.hpp"
#include "irmmv/mnist.hpp"
#include "irmmv/problem.hpp"
#include "irmmv/solver.hpp"

namespace irmmv {

enum class ExperimentKind { single, error_vs_m, error_vs_k, init_sweep, balancedness, mnist };
enum class SolverKind { irmmv, momp, msp, mfocuss };

inline const char* solver_name(SolverKind s) {
    switch (s) {
        case SolverKind::irmmv: return "irmmv";
        case SolverKind::momp: return "momp";
        case SolverKind::msp: return "msp";
        case SolverKind::mfocuss: return "mfocuss";
    }
    return "?";
}

inline SolverKind parse_solver(const std::string& name) {
    if (name == "irmmv") return SolverKind::irmmv;
    if (name == "momp") return SolverKind::momp;
    if (name == "msp") return SolverKind::msp;
    if (name == "mfocuss") return SolverKind::mfocuss;
    throw FormatError("unknown solver '" + name + "'");
}

inline ExperimentKind parse_kind(const std::string& name) {
    if (name == "single") return ExperimentKind::single;
    if (name == "error_vs_m") return ExperimentKind::error_vs_m;
    if (name == "error_vs_k") return ExperimentKind::error_vs_k;
    if (name == "init_sweep") return ExperimentKind::init_sweep;
    if (name == "balancedness") return ExperimentKind::balancedness;
    if (name == "mnist") return ExperimentKind::mnist;
    throw FormatError("unknown experiment kind '" + name + "'");
}

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::single;
    std::size_t m = 50, n = 25, l = 100, k = 3;
    std::optional<double> snr_db = 40.0; // empty = noiseless
    std::size_t trials = 20;
    std::vector<double> sweep_values; // M values, K values, or alpha_g values
    std::vector<SolverKind> solvers{SolverKind::irmmv, SolverKind::momp, SolverKind::msp,
                                    SolverKind::mfocuss};
    std::uint64_t seed = 1;
    std::string output_path;
    std::vector<double> magnitudes;  // empty = constant-one rows
    RecoveryConfig recovery;
    BaselineConfig baseline;
    double balance_tol = 1e-2;  // drift flag threshold for the balancedness study
    bool measure_time = true;   // false writes wall_time_s = 0 (reproducible CSV)

    ExperimentSpec() {
        recovery.max_iters = 100000; // CI-scale default budget
        recovery.eta_g = recovery.eta_v = 1e-2;
    }
};

/// e_r = ||X - Xhat||_F^2 / ||X||_F^2 (squared ratio).
inline double relative_error(const Matrix& x_true, const Matrix& x_hat) {
    if (!x_true.same_shape(x_hat)) throw DimensionError("relative_error: shape mismatch");
    const double denom = frobenius_norm_sq(x_true);
    if (denom == 0.0) throw NumericError("relative_error: zero ground truth");
    return frobenius_norm_sq(x_true - x_hat) / denom;
}

struct ResultRow {
    SolverKind solver = SolverKind::irmmv;
    std::string sweep_param = "none";
    double sweep_value = 0.0;
    std::size_t trial = 0;
    double rel_error = 0.0; // NaN for failed cells
    double wall_time_s = 0.0;
    std::size_t iters = 0;
    bool support_exact = false;
    std::string error; // nonempty for failed cells (not part of the CSV)
};

struct Aggregate {
    SolverKind solver;
    double sweep_value = 0.0;
    double mean = 0.0;
    double stddev = 0.0; // population standard deviation
    std::size_t count = 0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<Aggregate> aggregates;
    // init sweep extras, one entry per sweep point
    std::vector<double> sweep_alpha_v;
    std::vector<double> sweep_final_loss;

    std::string to_csv() const {
        std::string out = "solver,sweep_param,sweep_value,trial,rel_error,wall_time_s,iters,"
                          "support_exact\n";
        char buf[200];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%zu,%.17g,%.17g,%zu,%d\n",
                          solver_name(r.solver), r.sweep_param.c_str(), r.sweep_value, r.trial,
                          r.rel_error, r.wall_time_s, r.iters, r.support_exact ? 1 : 0);
            out += buf;
        }
        return out;
    }

    void write_csv(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("ExperimentResult: cannot open " + path);
        f << to_csv();
    }

    void compute_aggregates() {
        aggregates.clear();
        for (const auto& r : rows) {
            if (std::isnan(r.rel_error)) continue;
            auto it = std::find_if(aggregates.begin(), aggregates.end(), [&](const Aggregate& a) {
                return a.solver == r.solver && a.sweep_value == r.sweep_value;
            });
            if (it == aggregates.end()) {
                aggregates.push_back({r.solver, r.sweep_value, 0.0, 0.0, 0});
                it = aggregates.end() - 1;
            }
            it->mean += r.rel_error;
            ++it->count;
        }
        for (auto& a : aggregates) a.mean /= static_cast<double>(a.count);
        for (const auto& r : rows) {
            if (std::isnan(r.rel_error)) continue;
            for (auto& a : aggregates)
                if (a.solver == r.solver && a.sweep_value == r.sweep_value) {
                    const double d = r.rel_error - a.mean;
                    a.stddev += d * d;
                }
        }
        for (auto& a : aggregates) a.stddev = std::sqrt(a.stddev / static_cast<double>(a.count));
    }
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const std::size_t workers = std::min<std::size_t>(hw, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) fn(i);
    };
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();
}

/// Support recovered by a solver whose output has soft zeros: rows whose
/// norm exceeds 1e-6 of the largest row norm.
inline std::vector<std::size_t> detected_support(const Matrix& x) {
    double mx = 0.0;
    std::vector<double> norms(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        norms[i] = row_norm(x, i);
        mx = std::max(mx, norms[i]);
    }
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i < x.rows(); ++i)
        if (norms[i] > 1e-6 * mx) s.push_back(i);
    return s;
}

struct SolverOutcome {
    Matrix x_hat;
    std::size_t iters = 0;
    std::vector<std::size_t> support;
};

inline SolverOutcome run_one_solver(SolverKind kind, const ProblemInstance& inst,
                                    const ExperimentSpec& spec, std::size_t k_override) {
    SolverOutcome out;
    switch (kind) {
        case SolverKind::irmmv: {
            RecoveryResult r = recover(inst.a, inst.y, spec.recovery);
            out.x_hat = std::move(r.x_hat);
            out.iters = r.iterations;
            out.support = detected_support(out.x_hat);
            break;
        }
        case SolverKind::momp:
        case SolverKind::msp: {
            BaselineConfig cfg = spec.baseline;
            cfg.k = k_override;
            BaselineResult r = kind == SolverKind::momp ? somp_recover(inst.a, inst.y, cfg)
                                                        : msp_recover(inst.a, inst.y, cfg);
            out.x_hat = std::move(r.x_hat);
            out.iters = r.iterations;
            out.support = std::move(r.support);
            break;
        }
        case SolverKind::mfocuss: {
            BaselineConfig cfg = spec.baseline;
            cfg.k = k_override;
            if (inst.snr_db)
                cfg.lambda = noise_variance_for(inst.a, inst.x_true, *inst.snr_db);
            BaselineResult r = mfocuss_recover(inst.a, inst.y, cfg);
            out.x_hat = std::move(r.x_hat);
            out.iters = r.iterations;
            out.support = detected_support(out.x_hat);
            break;
        }
    }
    return out;
}

} // namespace detail

/// Seeded sweep runner: for every (sweep point, trial) cell, generate the
/// instance with seed = spec.seed + trial and run each selected solver.
/// Failures are recorded per cell (rel_error = NaN), never aborting the sweep.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    if (spec.trials < 1) throw NumericError("run_experiment: trials must be >= 1");
    std::string sweep_param = "none";
    std::vector<double> sweep = spec.sweep_values;
    if (spec.kind == ExperimentKind::single) {
        sweep = {0.0};
    } else if (spec.kind == ExperimentKind::error_vs_m) {
        sweep_param = "m";
        if (sweep.empty()) sweep = {10, 15, 20, 25, 30, 35, 40, 45, 50};
    } else if (spec.kind == ExperimentKind::error_vs_k) {
        sweep_param = "k";
        if (sweep.empty()) sweep = {1, 2, 3, 4, 5, 6, 7, 8};
    } else {
        throw FormatError("run_experiment: kind must be single/error_vs_m/error_vs_k");
    }

    struct Cell {
        std::size_t point, trial;
    };
    std::vector<Cell> cells;
    for (std::size_t p = 0; p < sweep.size(); ++p)
        for (std::size_t t = 0; t < spec.trials; ++t) cells.push_back({p, t});

    std::vector<std::vector<ResultRow>> cell_rows(cells.size());
    detail::parallel_for(cells.size(), [&](std::size_t ci) {
        const Cell& cell = cells[ci];
        std::size_t m = spec.m, n = spec.n, l = spec.l, k = spec.k;
        if (spec.kind == ExperimentKind::error_vs_m) m = static_cast<std::size_t>(sweep[cell.point]);
        if (spec.kind == ExperimentKind::error_vs_k) k = static_cast<std::size_t>(sweep[cell.point]);
        ResultRow base;
        base.sweep_param = sweep_param;
        base.sweep_value = sweep[cell.point];
        base.trial = cell.trial;
        ProblemInstance inst;
        try {
            inst = make_instance(m, n, l, k, spec.magnitudes, spec.snr_db,
                                 spec.seed + cell.trial);
        } catch (const std::exception& e) {
            for (SolverKind s : spec.solvers) {
                ResultRow r = base;
                r.solver = s;
                r.rel_error = std::nan("");
                r.error = e.what();
                cell_rows[ci].push_back(std::move(r));
            }
            return;
        }
        for (SolverKind s : spec.solvers) {
            ResultRow r = base;
            r.solver = s;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                detail::SolverOutcome o = detail::run_one_solver(s, inst, spec, k);
                r.rel_error = relative_error(inst.x_true, o.x_hat);
                r.iters = o.iters;
                r.support_exact = o.support == inst.support;
            } catch (const std::exception& e) {
                r.rel_error = std::nan("");
                r.error = e.what();
            }
            if (spec.measure_time)
                r.wall_time_s =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
            cell_rows[ci].push_back(std::move(r));
        }
    });

    ExperimentResult out;
    for (auto& rows : cell_rows)
        for (auto& r : rows) out.rows.push_back(std::move(r));
    out.compute_aggregates();
    return out;
}

/// Trajectory study on the staircase instance (active rows at magnitudes
/// 1, 2, ..., K): tracks the conserved quantities and when each active row
/// first crosses half of its final norm.
struct BalancednessStudy {
    TrajectoryRecord trajectory;
    std::vector<std::size_t> support;
    std::vector<double> magnitudes;
    std::vector<std::size_t> crossing_iter; // per support row, magnitude order
    bool crossing_order_ok = false;         // larger magnitudes cross strictly earlier
    double max_balance_drift = 0.0;
    bool balance_ok = false;
    double off_support_max_norm = 0.0;
    double on_support_min_norm = 0.0;
};

inline BalancednessStudy run_balancedness_study(const ExperimentSpec& spec) {
    std::vector<double> mags = spec.magnitudes;
    if (mags.empty())
        for (std::size_t i = 1; i <= spec.k; ++i) mags.push_back(static_cast<double>(i));
    ProblemInstance inst =
        make_instance(spec.m, spec.n, spec.l, spec.k, mags, spec.snr_db, spec.seed);

    RecoveryConfig cfg = spec.recovery;
    RecoveryResult rec = recover(inst.a, inst.y, cfg);

    BalancednessStudy st;
    st.support = inst.support;
    st.magnitudes = mags;
    st.trajectory = std::move(rec.trajectory);

    const TrajectoryRecord& tr = st.trajectory;
    const std::size_t last = tr.samples() - 1;
    st.crossing_iter.resize(inst.support.size(), 0);
    for (std::size_t si = 0; si < inst.support.size(); ++si) {
        const std::size_t row = inst.support[si];
        const double target = 0.5 * tr.row_norms[last][row];
        for (std::size_t kk = 0; kk < tr.samples(); ++kk)
            if (tr.row_norms[kk][row] >= target) {
                st.crossing_iter[si] = tr.times[kk];
                break;
            }
    }
    st.crossing_order_ok = true;
    for (std::size_t si = 0; si + 1 < st.crossing_iter.size(); ++si)
        if (!(st.crossing_iter[si] > st.crossing_iter[si + 1])) st.crossing_order_ok = false;

    CheckReport bal = verify_balancedness(tr, spec.balance_tol);
    st.max_balance_drift = bal.max_drift;
    st.balance_ok = bal.passed;

    st.on_support_min_norm = std::numeric_limits<double>::infinity();
    std::vector<bool> on(spec.n, false);
    for (std::size_t s : inst.support) on[s] = true;
    for (std::size_t i = 0; i < spec.n; ++i) {
        if (on[i])
            st.on_support_min_norm = std::min(st.on_support_min_norm, tr.row_norms[last][i]);
        else
            st.off_support_max_norm = std::max(st.off_support_max_norm, tr.row_norms[last][i]);
    }
    return st;
}

/// One recovery per alpha_g candidate with matched eta and iteration budget
/// (early stopping disabled so budgets really are matched); records the final
/// loss and the derived alpha_v of every run.
inline ExperimentResult run_init_sweep(const ExperimentSpec& spec) {
    if (spec.sweep_values.empty())
        throw NumericError("run_init_sweep: sweep_values must list alpha_g candidates");
    std::vector<double> mags = spec.magnitudes;
    if (mags.empty())
        for (std::size_t i = 1; i <= spec.k; ++i) mags.push_back(static_cast<double>(i));
    const ProblemInstance inst =
        make_instance(spec.m, spec.n, spec.l, spec.k, mags, spec.snr_db, spec.seed);

    ExperimentResult out;
    out.rows.resize(spec.sweep_values.size());
    out.sweep_alpha_v.resize(spec.sweep_values.size());
    out.sweep_final_loss.resize(spec.sweep_values.size());
    detail::parallel_for(spec.sweep_values.size(), [&](std::size_t i) {
        RecoveryConfig cfg = spec.recovery;
        cfg.alpha_g = spec.sweep_values[i];
        cfg.alpha_v.reset();
        cfg.loss_tol = 0.0;
        cfg.iterate_tol = 0.0;
        ResultRow r;
        r.solver = SolverKind::irmmv;
        r.sweep_param = "alpha_g";
        r.sweep_value = spec.sweep_values[i];
        const auto t0 = std::chrono::steady_clock::now();
        try {
            RecoveryResult rec = recover(inst.a, inst.y, cfg);
            r.rel_error = relative_error(inst.x_true, rec.x_hat);
            r.iters = rec.iterations;
            r.support_exact = detail::detected_support(rec.x_hat) == inst.support;
            out.sweep_final_loss[i] = rec.final_loss;
        } catch (const std::exception& e) {
            r.rel_error = std::nan("");
            r.error = e.what();
            out.sweep_final_loss[i] = std::nan("");
        }
        if (spec.measure_time)
            r.wall_time_s =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.sweep_alpha_v[i] = cfg.resolved_alpha_v(spec.l);
        out.rows[i] = std::move(r);
    });
    out.compute_aggregates();
    return out;
}

inline std::string init_sweep_loss_csv(const ExperimentResult& res) {
    std::string out = "alpha_g,alpha_v,final_loss,iters\n";
    char buf[160];
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu\n", res.rows[i].sweep_value,
                      res.sweep_alpha_v[i], res.sweep_final_loss[i], res.rows[i].iters);
        out += buf;
    }
    return out;
}

struct MnistSpec {
    std::string images_path;      // empty = deterministic synthetic stand-in images
    std::size_t count = 10;
    std::size_t batch = 10;       // images per MMV instance
    std::size_t sensing_rows = 1024;
    std::size_t k = 18;           // sparsity handed to momp / msp
    std::vector<SolverKind> solvers{SolverKind::irmmv, SolverKind::momp, SolverKind::msp};
    std::uint64_t seed = 1;
    std::optional<double> snr_db; // default noiseless, as the pipeline computes Y = A X
    RecoveryConfig recovery;
    bool measure_time = true;

    MnistSpec() {
        // moderate init and budget; the smoke-scale problem is overdetermined
        recovery.alpha_g = 3e-2;
        recovery.eta_g = recovery.eta_v = 2e-2;
        recovery.max_iters = 30000;
        recovery.record_every = 500;
    }
};

struct MnistResult {
    ExperimentResult results; // sweep_param = "image", sweep_value = image index
    std::vector<std::size_t> nonzero_rows_momp; // per batch
    std::vector<std::size_t> nonzero_rows_msp;
    Matrix x_true;            // loaded images
    Matrix sensing;           // the shared sensing matrix
};

inline std::size_t count_nonzero_rows(const Matrix& x) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        if (row_norm(x, i) != 0.0) ++c;
    return c;
}

inline MnistResult run_mnist(const MnistSpec& spec) {
    MnistResult out;
    out.x_true = spec.images_path.empty()
                     ? synthetic_digit_images(spec.count, mix_seed(spec.seed, 11))
                     : load_mnist_idx(spec.images_path, spec.count);
    const std::size_t pixels = out.x_true.rows();
    out.sensing = generate_sensing_matrix(spec.sensing_rows, pixels, mix_seed(spec.seed, 7));

    const std::size_t batches = (spec.count + spec.batch - 1) / spec.batch;
    for (std::size_t b = 0; b < batches; ++b) {
        const std::size_t lo = b * spec.batch;
        const std::size_t hi = std::min(spec.count, lo + spec.batch);
        Matrix xb(pixels, hi - lo);
        for (std::size_t p = 0; p < pixels; ++p)
            for (std::size_t j = lo; j < hi; ++j) xb(p, j - lo) = out.x_true(p, j);
        auto yw = synthesize_measurements(out.sensing, xb, spec.snr_db, mix_seed(spec.seed, 13 + b));
        const Matrix& y = yw.first;

        for (SolverKind s : spec.solvers) {
            const auto t0 = std::chrono::steady_clock::now();
            Matrix x_hat;
            std::size_t iters = 0;
            std::string err;
            try {
                switch (s) {
                    case SolverKind::irmmv: {
                        RecoveryResult r = recover(out.sensing, y, spec.recovery);
                        x_hat = std::move(r.x_hat);
                        iters = r.iterations;
                        break;
                    }
                    case SolverKind::momp:
                    case SolverKind::msp: {
                        BaselineConfig cfg;
                        cfg.k = spec.k;
                        BaselineResult r = s == SolverKind::momp
                                               ? somp_recover(out.sensing, y, cfg)
                                               : msp_recover(out.sensing, y, cfg);
                        x_hat = std::move(r.x_hat);
                        iters = r.iterations;
                        if (s == SolverKind::momp)
                            out.nonzero_rows_momp.push_back(count_nonzero_rows(x_hat));
                        else
                            out.nonzero_rows_msp.push_back(count_nonzero_rows(x_hat));
                        break;
                    }
                    case SolverKind::mfocuss: {
                        BaselineConfig cfg;
                        cfg.k = spec.k;
                        cfg.lambda = spec.snr_db ? noise_variance_for(out.sensing, xb, *spec.snr_db)
                                                 : 1e-6;
                        BaselineResult r = mfocuss_recover(out.sensing, y, cfg);
                        x_hat = std::move(r.x_hat);
                        iters = r.iterations;
                        break;
                    }
                }
            } catch (const std::exception& e) {
                err = e.what();
            }
            const double wall =
                spec.measure_time
                    ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                    : 0.0;
            for (std::size_t j = lo; j < hi; ++j) {
                ResultRow r;
                r.solver = s;
                r.sweep_param = "image";
                r.sweep_value = static_cast<double>(j);
                r.trial = b;
                r.wall_time_s = wall;
                r.iters = iters;
                if (!err.empty()) {
                    r.rel_error = std::nan("");
                    r.error = err;
                } else {
                    double num = 0.0, den = 0.0;
                    for (std::size_t p = 0; p < pixels; ++p) {
                        const double d = out.x_true(p, j) - x_hat(p, j - lo);
                        num += d * d;
                        den += out.x_true(p, j) * out.x_true(p, j);
                    }
                    if (den == 0.0) throw NumericError("run_mnist: zero image");
                    r.rel_error = num / den;
                }
                out.results.rows.push_back(std::move(r));
            }
        }
    }
    out.results.compute_aggregates();
    return out;
}

} // namespace irmmv

#endif
