#pragma once

#include "gspinn/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

/// \file optim.hpp
///
/// Full-batch first-order and quasi-Newton minimizers over a flat parameter
/// vector: Adam with a stepwise-decayed learning rate, and L-BFGS with a
/// strong-Wolfe line search.

namespace gspinn {

/// f(x), writing the gradient into `grad`.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// eta_k = eta0 * gamma^k.
inline double decayed_learning_rate(int k, double lr0, double gamma) {
    if (k < 0) throw UsageError("learning-rate iteration index must be >= 0");
    return lr0 * std::pow(gamma, double(k));
}

// ---------------------------------------------------------------------------
// Adam

struct AdamOptions {
    int steps = 3000;
    double lr0 = 1e-3;
    double gamma = 0.98;
    /// learning rate is held for this many steps, then decayed
    int loops_per_iteration = 50;
    /// stop once f <= e_stop; a non-finite e_stop disables the check
    double e_stop = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

enum class StopReason { e_stop, max_iters, line_search_failure, gradient_tolerance, non_finite };

inline std::string to_string(StopReason r) {
    switch (r) {
    case StopReason::e_stop: return "e_stop";
    case StopReason::max_iters: return "max-iters";
    case StopReason::line_search_failure: return "line-search-failure";
    case StopReason::gradient_tolerance: return "gradient-tolerance";
    case StopReason::non_finite: return "non-finite";
    }
    return "unknown";
}

struct AdamResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::quiet_NaN();
    /// number of parameter updates applied
    int steps = 0;
    StopReason stop = StopReason::max_iters;
    std::string diagnostic;
};

/// Called before each update with the step index, the loss at the current
/// iterate and the learning rate about to be used.
using AdamObserver = std::function<void(int step, double f, double lr)>;

inline bool e_stop_reached(double f, double e_stop) { return std::isfinite(e_stop) && f <= e_stop; }

inline AdamResult adam_minimize(const Objective& objective, Eigen::VectorXd x, const AdamOptions& opt,
                                const AdamObserver& observer = {}) {
    if (opt.steps < 0) throw UsageError("adam steps must be >= 0");
    if (!(opt.gamma > 0.0 && opt.gamma <= 1.0)) throw UsageError("gamma must be in (0,1]");
    if (opt.loops_per_iteration < 1) throw UsageError("loops_per_iteration must be >= 1");
    AdamResult res;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd g(x.size());
    double b1t = 1.0, b2t = 1.0;
    for (int step = 0;; ++step) {
        double f;
        try {
            f = objective(x, g);
        } catch (const NumericError& e) {
            res.stop = StopReason::non_finite;
            res.diagnostic = e.what();
            break;
        }
        if (!std::isfinite(f) || !g.allFinite()) {
            res.stop = StopReason::non_finite;
            res.diagnostic = "non-finite loss or gradient at step " + std::to_string(step);
            break;
        }
        res.x = x;
        res.f = f;
        if (e_stop_reached(f, opt.e_stop)) {
            res.stop = StopReason::e_stop;
            break;
        }
        if (step >= opt.steps) {
            res.stop = StopReason::max_iters;
            break;
        }
        const double lr = decayed_learning_rate(step / opt.loops_per_iteration, opt.lr0, opt.gamma);
        if (observer) observer(step, f, lr);
        b1t *= opt.beta1;
        b2t *= opt.beta2;
        m = opt.beta1 * m + (1.0 - opt.beta1) * g;
        v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseAbs2();
        const double lr_t = lr * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        x.array() -= lr_t * m.array() / (v.array().sqrt() + opt.eps * std::sqrt(1.0 - b2t));
        res.steps = step + 1;
    }
    if (res.x.size() == 0) res.x = x;
    return res;
}

// ---------------------------------------------------------------------------
// Strong-Wolfe line search

struct WolfeOptions {
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_evals = 30;
    double alpha_max = 1e8;
};

/// One accepted step, enough to re-check both Wolfe conditions.
struct LineSearchRecord {
    double alpha;
    double f0, slope0;
    double f, slope;
    int evals;
};

struct LineSearchResult {
    bool ok = false;
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;
    Eigen::VectorXd x;
    Eigen::VectorXd grad;
    int evals = 0;
};

namespace detail {

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db),
// safeguarded to the middle 80% of the bracket; bisection on failure.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    const double margin = 0.1 * (hi - lo);
    double step = 0.5 * (a + b);
    if (std::isfinite(fa) && std::isfinite(fb) && std::isfinite(da) && std::isfinite(db)) {
        const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
        const double disc = d1 * d1 - da * db;
        if (disc >= 0.0) {
            const double d2 = std::copysign(std::sqrt(disc), b - a);
            const double denom = db - da + 2.0 * d2;
            if (denom != 0.0) {
                const double c = b - (b - a) * (db + d2 - d1) / denom;
                if (std::isfinite(c)) step = c;
            }
        }
    }
    return std::clamp(step, lo + margin, hi - margin);
}

} // namespace detail

/// Find alpha satisfying
///   f(x + alpha d) <= f(x) + c1 alpha g.d   and   |g(x + alpha d).d| <= c2 |g.d|
/// by bracketing and zooming with cubic interpolation.
inline LineSearchResult strong_wolfe_search(const Objective& objective, const Eigen::VectorXd& x, double f0,
                                            double slope0, const Eigen::VectorXd& dir, double alpha_init,
                                            const WolfeOptions& opt) {
    LineSearchResult best;
    if (!(slope0 < 0.0)) return best;
    Eigen::VectorXd g(x.size());
    int evals = 0;
    auto eval = [&](double alpha, LineSearchResult& r) {
        r.alpha = alpha;
        r.x = x + alpha * dir;
        ++evals;
        try {
            r.f = objective(r.x, g);
        } catch (const NumericError&) {
            r.f = std::numeric_limits<double>::infinity();
        }
        if (!std::isfinite(r.f) || !g.allFinite()) {
            r.f = std::numeric_limits<double>::infinity();
            r.slope = std::numeric_limits<double>::quiet_NaN();
        } else {
            r.slope = g.dot(dir);
        }
        r.grad = g;
    };
    auto armijo_fails = [&](const LineSearchResult& r) { return !(r.f <= f0 + opt.c1 * r.alpha * slope0); };
    auto curvature_ok = [&](const LineSearchResult& r) { return std::abs(r.slope) <= opt.c2 * std::abs(slope0); };

    auto zoom = [&](LineSearchResult lo, LineSearchResult hi) -> LineSearchResult {
        while (evals < opt.max_evals) {
            const double alpha = detail::cubic_step(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
            if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
            LineSearchResult cur;
            eval(alpha, cur);
            if (armijo_fails(cur) || cur.f >= lo.f) {
                hi = cur;
            } else {
                if (curvature_ok(cur)) {
                    cur.ok = true;
                    return cur;
                }
                if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
                lo = cur;
            }
        }
        return LineSearchResult{};
    };

    LineSearchResult prev;
    prev.alpha = 0.0;
    prev.f = f0;
    prev.slope = slope0;
    double alpha = alpha_init;
    for (int i = 0; evals < opt.max_evals; ++i) {
        LineSearchResult cur;
        eval(alpha, cur);
        if (armijo_fails(cur) || (i > 0 && cur.f >= prev.f)) {
            best = zoom(prev, cur);
            break;
        }
        if (curvature_ok(cur)) {
            cur.ok = true;
            best = cur;
            break;
        }
        if (cur.slope >= 0.0) {
            best = zoom(cur, prev);
            break;
        }
        prev = cur;
        if (alpha >= opt.alpha_max) break;
        alpha = std::min(2.0 * alpha, opt.alpha_max);
    }
    best.evals = evals;
    return best;
}

// ---------------------------------------------------------------------------
// L-BFGS

struct LbfgsOptions {
    int memory = 10;
    int max_iters = 5000;
    double grad_tol = 1e-9;
    /// stop once f <= e_stop; non-finite disables
    double e_stop = -std::numeric_limits<double>::infinity();
    WolfeOptions wolfe;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = 0.0;
    int iterations = 0;
    int evaluations = 0;
    StopReason stop = StopReason::max_iters;
    std::vector<LineSearchRecord> steps;
    std::string diagnostic;
};

/// Called after each accepted step.
using LbfgsObserver = std::function<void(int iter, double f, const Eigen::VectorXd& x, double alpha)>;

inline LbfgsResult lbfgs_minimize(const Objective& objective, Eigen::VectorXd x, const LbfgsOptions& opt,
                                  const LbfgsObserver& observer = {}) {
    if (opt.memory < 1) throw UsageError("L-BFGS memory must be >= 1");
    if (!(opt.wolfe.c1 > 0.0 && opt.wolfe.c1 < opt.wolfe.c2 && opt.wolfe.c2 < 1.0))
        throw UsageError("Wolfe constants must satisfy 0 < c1 < c2 < 1");
    LbfgsResult res;
    Eigen::VectorXd g(x.size());
    double f;
    try {
        f = objective(x, g);
    } catch (const NumericError& e) {
        res.x = x;
        res.f = std::numeric_limits<double>::quiet_NaN();
        res.stop = StopReason::non_finite;
        res.diagnostic = e.what();
        return res;
    }
    res.evaluations = 1;
    res.x = x;
    res.f = f;
    if (!std::isfinite(f) || !g.allFinite()) {
        res.stop = StopReason::non_finite;
        res.diagnostic = "non-finite initial loss";
        return res;
    }

    struct Pair {
        Eigen::VectorXd s, y;
        double rho;
    };
    std::deque<Pair> mem;
    std::vector<double> alpha_buf;

    for (int k = 0;; ++k) {
        if (g.norm() <= opt.grad_tol) {
            res.stop = StopReason::gradient_tolerance;
            break;
        }
        if (e_stop_reached(f, opt.e_stop)) {
            res.stop = StopReason::e_stop;
            break;
        }
        if (k >= opt.max_iters) {
            res.stop = StopReason::max_iters;
            break;
        }

        // two-loop recursion
        Eigen::VectorXd d = -g;
        alpha_buf.assign(mem.size(), 0.0);
        for (std::size_t i = mem.size(); i-- > 0;) {
            alpha_buf[i] = mem[i].rho * mem[i].s.dot(d);
            d -= alpha_buf[i] * mem[i].y;
        }
        if (!mem.empty()) d *= mem.back().s.dot(mem.back().y) / mem.back().y.squaredNorm();
        for (std::size_t i = 0; i < mem.size(); ++i) {
            const double beta = mem[i].rho * mem[i].y.dot(d);
            d += (alpha_buf[i] - beta) * mem[i].s;
        }
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            mem.clear();
            d = -g;
            slope = -g.squaredNorm();
        }
        double alpha0 = mem.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
        LineSearchResult ls = strong_wolfe_search(objective, x, f, slope, d, alpha0, opt.wolfe);
        res.evaluations += ls.evals;
        if (!ls.ok && !mem.empty()) {
            // retry along steepest descent with a fresh memory
            mem.clear();
            d = -g;
            slope = -g.squaredNorm();
            alpha0 = std::min(1.0, 1.0 / g.norm());
            ls = strong_wolfe_search(objective, x, f, slope, d, alpha0, opt.wolfe);
            res.evaluations += ls.evals;
        }
        if (!ls.ok) {
            res.stop = StopReason::line_search_failure;
            res.diagnostic = "no strong-Wolfe step found at iteration " + std::to_string(k);
            break;
        }
        res.steps.push_back({ls.alpha, f, slope, ls.f, ls.slope, ls.evals});

        Pair p{ls.x - x, ls.grad - g, 0.0};
        const double sy = p.s.dot(p.y);
        if (sy > 1e-12 * p.s.norm() * p.y.norm() && sy > 0.0) {
            p.rho = 1.0 / sy;
            mem.push_back(std::move(p));
            if (int(mem.size()) > opt.memory) mem.pop_front();
        }
        x = std::move(ls.x);
        g = std::move(ls.grad);
        f = ls.f;
        res.x = x;
        res.f = f;
        res.iterations = k + 1;
        if (observer) observer(k, f, x, ls.alpha);
    }
    return res;
}

} // namespace gspinn
