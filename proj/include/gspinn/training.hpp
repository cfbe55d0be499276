#pragma once

#include "gspinn/autodiff.hpp"
#include "gspinn/errors.hpp"
#include "gspinn/generator.hpp"
#include "gspinn/network.hpp"
#include "gspinn/optim.hpp"
#include "gspinn/problems.hpp"
#include "gspinn/sampling.hpp"
#include "gspinn/symmetry.hpp"

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gspinn {

struct LossWeights {
    double initial = 1.0;
    double residual = 1.0;
    double symmetry = 1.0;
    double data = 1.0;
    double boundary = 1.0;

    void validate() const {
        for (double w : {initial, residual, symmetry, data, boundary})
            if (!(w >= 0.0) || !std::isfinite(w)) throw UsageError("loss weights must be finite and >= 0");
    }
};

struct TrainConfig {
    int adam_steps = 3000;
    double lr0 = 1e-3;
    double gamma = 0.98;
    int loops_per_iteration = 50;
    /// non-finite (e.g. infinity) disables the early stop
    double e_stop = 1e-4;
    int lbfgs_memory = 10;
    int lbfgs_max_iters = 5000;
    double c1 = 1e-4;
    double c2 = 0.9;
    std::uint64_t seed = 0;

    void validate() const {
        if (adam_steps < 0) throw UsageError("adam_steps must be >= 0");
        if (lbfgs_max_iters < 0) throw UsageError("lbfgs_max_iters must be >= 0");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("gamma must be in (0,1]");
        if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw UsageError("lr0 must be > 0");
        if (loops_per_iteration < 1) throw UsageError("loops_per_iteration must be >= 1");
        if (lbfgs_memory < 1) throw UsageError("lbfgs_memory must be >= 1");
        if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw UsageError("Wolfe constants must satisfy 0 < c1 < c2 < 1");
        if (std::isnan(e_stop)) throw UsageError("e_stop must not be NaN");
    }
};

/// eta_k = eta0 * gamma^k for the k-th block of loops_per_iteration steps.
inline double lr_schedule(int k, const TrainConfig& cfg) { return decayed_learning_rate(k, cfg.lr0, cfg.gamma); }

struct LossComponents {
    double initial = 0.0;
    double residual = 0.0;
    /// NaN when there is no symmetry term (vanilla PINN)
    double symmetry = std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;

    bool has_symmetry() const { return !std::isnan(symmetry); }
};

struct LogRow {
    int iter = 0;
    double loss_total = 0.0;
    double loss_init = 0.0;
    double loss_res = 0.0;
    double loss_sym = std::numeric_limits<double>::quiet_NaN();
    /// Adam: scheduled learning rate; L-BFGS: accepted line-search step
    double lr = 0.0;
    double elapsed_s = 0.0;
};

struct TrainReport {
    std::vector<LogRow> rows;
    LossComponents final_loss;
    double final_mse = std::numeric_limits<double>::quiet_NaN();
    StopReason stop = StopReason::max_iters;
    int adam_steps = 0;
    int lbfgs_iters = 0;
    std::vector<LineSearchRecord> line_searches;
    std::string diagnostic;
    double elapsed_s = 0.0;
};

/// The GsPINN objective for a fixed batch:
///   L = w0 L_0 + wr L_r + ws L_s (+ optional supervised terms)
/// with each component 1/2 mean of the squared pointwise residual.
class GspinnLoss {
public:
    /// `generator` may be null for the vanilla PINN loss.
    GspinnLoss(const PdeProblem& problem, const CollocationBatch& batch, const Generator* generator,
               const LossWeights& weights = {}) {
        weights.validate();
        const Eigen::Index n0 = batch.initial.cols();
        const Eigen::Index nr = batch.residual.cols();
        const Eigen::Index ns = batch.symmetry.cols();
        if (ns > 0 && generator == nullptr) throw UsageError("symmetry points given without a generator");

        LinearJetTerm init{"initial", batch.initial, Eigen::VectorXd::Ones(n0), {}, {}, {}, batch.initial_target,
                           weights.initial};
        if (init.target.size() != n0) throw UsageError("initial targets do not match initial points");
        terms_.push_back(std::move(init));

        LinearJetTerm res{"residual", batch.residual, {}, Eigen::VectorXd::Ones(nr), Eigen::VectorXd(nr),
                          Eigen::VectorXd(nr), {}, weights.residual};
        for (Eigen::Index i = 0; i < nr; ++i) {
            const auto rc = problem.residual_coefficients(batch.residual(1, i));
            res.c_t(i) = rc.t;
            res.c_x(i) = rc.x;
            res.c_xx(i) = rc.xx;
        }
        terms_.push_back(std::move(res));

        if (generator != nullptr) {
            // Q = phi K - xi K_x - tau K_t
            LinearJetTerm sym{"symmetry", batch.symmetry, Eigen::VectorXd(ns), Eigen::VectorXd(ns),
                              Eigen::VectorXd(ns), {}, {}, weights.symmetry};
            for (Eigen::Index i = 0; i < ns; ++i) {
                const double t = batch.symmetry(0, i), x = batch.symmetry(1, i), y = batch.symmetry(2, i);
                sym.c_value(i) = generator->phi_at(t, x, y);
                sym.c_t(i) = -generator->tau_at(t, x, y);
                sym.c_x(i) = -generator->xi_at(t, x, y);
            }
            terms_.push_back(std::move(sym));
            has_symmetry_ = true;
        }
    }

    /// Supervised hook: 1/2 mean |K(p) - target|^2 at given points.
    void add_supervised(const std::string& name, const PointMatrix& points, const Eigen::VectorXd& targets, double weight) {
        if (targets.size() != points.cols()) throw UsageError("supervised term '" + name + "': target count mismatch");
        terms_.push_back({name, points, Eigen::VectorXd::Ones(points.cols()), {}, {}, {}, targets, weight});
    }

    const std::vector<LinearJetTerm>& terms() const { return terms_; }
    bool has_symmetry() const { return has_symmetry_; }

    LossComponents components(const LossEvaluation& ev) const {
        LossComponents c;
        c.initial = ev.components[0];
        c.residual = ev.components[1];
        if (has_symmetry_) c.symmetry = ev.components[2];
        c.total = ev.total;
        return c;
    }

    // Not safe to call concurrently on one object: evaluations share a
    // buffer pool.
    LossComponents evaluate(const MlpParams& params) const {
        return components(loss_gradient(params, terms_, false, &workspace_));
    }

    LossComponents evaluate(const MlpParams& params, Eigen::VectorXd& grad) const {
        LossEvaluation ev = loss_gradient(params, terms_, true, &workspace_);
        grad = std::move(ev.grad);
        return components(ev);
    }

private:
    std::vector<LinearJetTerm> terms_;
    bool has_symmetry_ = false;
    mutable TapeWorkspace workspace_;
};

inline LossComponents total_loss(const MlpParams& params, const CollocationBatch& batch, const PdeProblem& problem,
                                 const Generator* generator, const LossWeights& weights = {}) {
    return GspinnLoss(problem, batch, generator, weights).evaluate(params);
}

// ---------------------------------------------------------------------------
// Test metric

struct EvalGrid {
    int n_t = 17;
    int n_x = 33;
    int n_y = 33;
    double t_lo = 0.1;
};

/// Grid points (t, x, y) with t in [t_lo, T] and x, y over the sampling box.
inline PointMatrix eval_points(const PdeProblem& problem, const EvalGrid& grid = {}) {
    const auto ts = linspace(grid.t_lo, problem.box.t_max, grid.n_t);
    const auto xs = linspace(problem.sample_x_lo(), problem.box.x_hi, grid.n_x);
    const auto ys = linspace(problem.sample_x_lo(), problem.box.x_hi, grid.n_y);
    PointMatrix pts(3, Eigen::Index(ts.size() * xs.size() * ys.size()));
    Eigen::Index k = 0;
    for (double t : ts)
        for (double x : xs)
            for (double y : ys) pts.col(k++) << t, x, y;
    return pts;
}

/// Mean of (K_theta - K_exact)^2 over the evaluation grid.
inline double evaluate_mse(const MlpParams& params, const PdeProblem& problem, const EvalGrid& grid = {}) {
    const PointMatrix pts = eval_points(problem, grid);
    const Eigen::RowVectorXd pred = forward_values(params, pts);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
        const double e = pred(i) - problem.exact(pts(0, i), pts(1, i), pts(2, i));
        acc += e * e;
    }
    return acc / double(pts.cols());
}

// ---------------------------------------------------------------------------
// Training loop

namespace detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline LogRow make_row(int iter, const LossComponents& c, double lr, double elapsed) {
    return {iter, c.total, c.initial, c.residual, c.symmetry, lr, elapsed};
}

inline Objective objective_for(const GspinnLoss& loss, MlpParams& scratch) {
    return [&loss, &scratch](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        scratch.values() = x;
        return loss.evaluate(scratch, grad).total;
    };
}

} // namespace detail

/// Adam phase. Logs one row per block of loops_per_iteration steps and one
/// row for the final iterate. With `sampler` set and resampling enabled the
/// batch is redrawn at the start of every block.
inline TrainReport run_adam(MlpParams& params, const GspinnLoss& loss, const TrainConfig& cfg,
                            const PdeProblem* problem = nullptr, const SamplerConfig* sampler = nullptr,
                            const Generator* generator = nullptr, const LossWeights& weights = {}) {
    cfg.validate();
    TrainReport report;
    detail::Stopwatch clock;
    MlpParams scratch = params;
    const bool resample = sampler != nullptr && problem != nullptr && sampler->resample_each_iteration;
    std::optional<GspinnLoss> current;
    const GspinnLoss* active = &loss;

    AdamOptions opt;
    opt.steps = cfg.adam_steps;
    opt.lr0 = cfg.lr0;
    opt.gamma = cfg.gamma;
    opt.loops_per_iteration = cfg.loops_per_iteration;
    opt.e_stop = cfg.e_stop;

    Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        scratch.values() = x;
        return active->evaluate(scratch, grad).total;
    };
    int block = -1;
    auto observer = [&](int step, double, double lr) {
        if (step % cfg.loops_per_iteration != 0) return;
        block = step / cfg.loops_per_iteration;
        report.rows.push_back(detail::make_row(step, active->evaluate(scratch), lr, clock.seconds()));
        if (resample && block > 0) {
            current.emplace(*problem, sample_batch(*sampler, std::uint64_t(block)), generator, weights);
            active = &*current;
        }
    };
    AdamResult res = adam_minimize(objective, params.values(), opt, observer);
    params.values() = res.x;
    report.adam_steps = res.steps;
    report.stop = res.stop;
    report.diagnostic = res.diagnostic;
    report.final_loss = active->evaluate(params);
    const int last_block = std::max(0, (res.steps - 1) / cfg.loops_per_iteration);
    report.rows.push_back(detail::make_row(res.steps, report.final_loss, lr_schedule(last_block, cfg), clock.seconds()));
    report.elapsed_s = clock.seconds();
    return report;
}

/// L-BFGS phase from the current parameters. `iter_offset` continues the
/// iteration numbering of a preceding Adam phase.
inline TrainReport run_lbfgs(MlpParams& params, const GspinnLoss& loss, const TrainConfig& cfg, int iter_offset = 0) {
    cfg.validate();
    TrainReport report;
    detail::Stopwatch clock;
    MlpParams scratch = params;
    LbfgsOptions opt;
    opt.memory = cfg.lbfgs_memory;
    opt.max_iters = cfg.lbfgs_max_iters;
    opt.e_stop = cfg.e_stop;
    opt.wolfe.c1 = cfg.c1;
    opt.wolfe.c2 = cfg.c2;

    auto observer = [&](int k, double, const Eigen::VectorXd& x, double alpha) {
        if ((k + 1) % cfg.loops_per_iteration != 0) return;
        scratch.values() = x;
        report.rows.push_back(detail::make_row(iter_offset + k + 1, loss.evaluate(scratch), alpha, clock.seconds()));
    };
    LbfgsResult res = lbfgs_minimize(detail::objective_for(loss, scratch), params.values(), opt, observer);
    params.values() = res.x;
    report.lbfgs_iters = res.iterations;
    report.stop = res.stop;
    report.diagnostic = res.diagnostic;
    report.line_searches = std::move(res.steps);
    report.final_loss = loss.evaluate(params);
    const double last_alpha = report.line_searches.empty() ? 0.0 : report.line_searches.back().alpha;
    if (report.rows.empty() || report.rows.back().iter != iter_offset + res.iterations)
        report.rows.push_back(detail::make_row(iter_offset + res.iterations, report.final_loss, last_alpha, clock.seconds()));
    report.elapsed_s = clock.seconds();
    return report;
}

/// Adam followed by L-BFGS (skipped when Adam already met e_stop or failed),
/// then the test MSE. Elapsed times in the log are cumulative.
inline TrainReport train(MlpParams& params, const PdeProblem& problem, const SamplerConfig& sampler,
                         const Generator* generator, const TrainConfig& cfg, const LossWeights& weights = {}) {
    cfg.validate();
    const CollocationBatch batch = sample_batch(sampler, 0);
    GspinnLoss loss(problem, batch, generator, weights);
    TrainReport report = run_adam(params, loss, cfg, &problem, &sampler, generator, weights);
    if (report.stop == StopReason::max_iters && cfg.lbfgs_max_iters > 0) {
        std::optional<GspinnLoss> last;
        const GspinnLoss* target = &loss;
        if (sampler.resample_each_iteration && report.adam_steps > 0) {
            const int block = (report.adam_steps - 1) / cfg.loops_per_iteration;
            last.emplace(problem, sample_batch(sampler, std::uint64_t(block)), generator, weights);
            target = &*last;
        }
        TrainReport lb = run_lbfgs(params, *target, cfg, report.adam_steps);
        for (auto& row : lb.rows) {
            row.elapsed_s += report.elapsed_s;
            report.rows.push_back(row);
        }
        report.lbfgs_iters = lb.lbfgs_iters;
        report.stop = lb.stop;
        report.diagnostic = lb.diagnostic;
        report.line_searches = std::move(lb.line_searches);
        report.final_loss = lb.final_loss;
        report.elapsed_s += lb.elapsed_s;
    }
    report.final_mse = evaluate_mse(params, problem);
    return report;
}

} // namespace gspinn
