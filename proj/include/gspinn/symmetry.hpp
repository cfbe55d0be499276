#pragma once

#include "gspinn/autodiff.hpp"
#include "gspinn/errors.hpp"
#include "gspinn/generator.hpp"
#include "gspinn/jet.hpp"
#include "gspinn/problems.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gspinn {

inline constexpr double kInvarianceTolerance = 1e-8;

/// Q = phi K - xi K_x - tau K_t, the characteristic of v = tau d_t + xi d_x +
/// phi u d_u evaluated on a kernel jet. Vanishes on kernels invariant under v.
inline double characteristic_residual(const Generator& gen, const KernelJet& jet, double t, double x, double y) {
    return gen.phi_at(t, x, y) * jet.K - gen.xi_at(t, x, y) * jet.K_x - gen.tau_at(t, x, y) * jet.K_t;
}

/// Uniform grid of `n` points on [lo, hi] (midpoint when n == 1).
inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(std::max(n, 0));
    if (n == 1) v[0] = 0.5 * (lo + hi);
    for (int i = 0; i < n && n > 1; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
    return v;
}

// ---------------------------------------------------------------------------
// Invariance of the kernel Cauchy problem K(0, x; y) = delta(x - y).

struct InvarianceReport {
    double cond_tau = 0.0;        ///< max |tau(0, x; y)|
    double cond_phi_xi = 0.0;     ///< max |phi(0, y; y) + div xi(0, y; y)|
    double cond_xi_support = 0.0; ///< max |xi(0, y; y)|
    double tolerance = kInvarianceTolerance;
    bool pass = false;
};

inline InvarianceReport check_green_invariance(const Generator& gen, std::span<const double> y_samples,
                                               std::span<const double> x_samples, double tol = kInvarianceTolerance) {
    InvarianceReport r;
    r.tolerance = tol;
    for (double y : y_samples) {
        for (double x : x_samples) r.cond_tau = std::max(r.cond_tau, std::abs(gen.tau_at(0.0, x, y)));
        r.cond_tau = std::max(r.cond_tau, std::abs(gen.tau_at(0.0, y, y)));
        r.cond_phi_xi = std::max(r.cond_phi_xi, std::abs(gen.phi_at(0.0, y, y) + gen.divergence(0.0, y, y)));
        r.cond_xi_support = std::max(r.cond_xi_support, std::abs(gen.xi_at(0.0, y, y)));
    }
    r.pass = r.cond_tau <= tol && r.cond_phi_xi <= tol && r.cond_xi_support <= tol;
    return r;
}

/// Default grids over a problem's spatial box: 64 source points, 64 x per source.
inline InvarianceReport check_green_invariance(const Generator& gen, const PdeProblem& problem, int samples = 64) {
    const auto ys = linspace(problem.sample_x_lo(), problem.box.x_hi, samples);
    const auto xs = linspace(problem.sample_x_lo(), problem.box.x_hi, samples);
    return check_green_invariance(gen, ys, xs);
}

// ---------------------------------------------------------------------------
// Invariance of a general Cauchy problem u(0, x) = f(x).

struct Interval {
    double lo;
    double hi;
};

/// Initial datum: either a function with an optional support description
/// (empty = whole line), or a point mass delta(x - point).
struct CauchyDatum {
    std::function<double(double)> f;
    std::vector<Interval> support;
    std::optional<double> point;

    static CauchyDatum delta(double at) { return {{}, {}, at}; }

    double distance_to_support(double x) const {
        if (point) return std::abs(x - *point);
        if (support.empty()) return 0.0;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& iv : support) {
            if (x >= iv.lo && x <= iv.hi) return 0.0;
            best = std::min({best, std::abs(x - iv.lo), std::abs(x - iv.hi)});
        }
        return best;
    }

    bool in_support(double x) const { return distance_to_support(x) == 0.0; }
};

struct CauchyInvarianceReport {
    double cond_tau = 0.0;       ///< max |tau(0, x, u)|
    double cond_eta = 0.0;       ///< max |eta(0, x, f) + xi_x(0, x, f) f|
    double support_defect = 0.0; ///< max dist(x + a xi(0, x, u), supp f)
    double probe = 1e-3;
    bool pass = false;
};

/// For a point mass the amplitude is unknown; eta + xi_x u is probed at
/// u = 1 and u = 10 and reported per unit amplitude.
inline CauchyInvarianceReport check_cauchy_invariance(const PointGenerator& gen, const CauchyDatum& datum,
                                                      std::span<const double> samples, double probe = 1e-3) {
    if (samples.empty() && !datum.point) throw UsageError("check_cauchy_invariance: empty sample set");
    if (!datum.point && !datum.f) throw UsageError("check_cauchy_invariance: datum needs a function or a point mass");
    CauchyInvarianceReport r;
    r.probe = probe;
    auto eval = [&](double x, double u) {
        const Jet t0(0.0);
        const Jet xj = Jet::variable(x, Dir::x, DirSet::x());
        Jet uj(u);
        uj.dirs = DirSet::x();
        const Jet tau = gen.tau(t0, xj, uj);
        const Jet xi = gen.xi(t0, xj, uj);
        const Jet eta = gen.eta(t0, xj, uj);
        struct {
            double tau, xi, xi_x, eta;
        } out{tau.value, xi.value, xi.dx(), eta.value};
        return out;
    };
    if (datum.point) {
        const double p = *datum.point;
        for (double u : {1.0, 10.0}) {
            const auto c = eval(p, u);
            r.cond_tau = std::max(r.cond_tau, std::abs(c.tau));
            r.cond_eta = std::max(r.cond_eta, std::abs(c.eta + c.xi_x * u) / u);
            r.support_defect = std::max(r.support_defect, datum.distance_to_support(p + probe * c.xi));
            for (double x : samples) r.cond_tau = std::max(r.cond_tau, std::abs(eval(x, u).tau));
        }
    } else {
        for (double x : samples) {
            const double u = datum.f(x);
            const auto c = eval(x, u);
            r.cond_tau = std::max(r.cond_tau, std::abs(c.tau));
            r.cond_eta = std::max(r.cond_eta, std::abs(c.eta + c.xi_x * u));
            if (datum.in_support(x))
                r.support_defect = std::max(r.support_defect, datum.distance_to_support(x + probe * c.xi));
        }
    }
    r.pass = r.cond_tau <= kInvarianceTolerance && r.cond_eta <= kInvarianceTolerance &&
             r.support_defect <= 10.0 * probe * probe;
    return r;
}

// ---------------------------------------------------------------------------
// Solving for invariant combinations of a basis.

struct CombinationSolution {
    bool found = false;
    std::vector<double> y_samples;
    /// multipliers(i, k): multiplier of free_indices[k] at y_samples[i]
    Eigen::MatrixXd multipliers;
    /// max over sources of ||A c - b||
    double residual = 0.0;
    /// least-squares fit multiplier ~ a + b*y for each free index
    std::vector<Multiplier> fitted;
    double fit_residual = 0.0;
};

/// Find multipliers c_k(y) for the free basis elements such that
/// sum_{fixed} v_j + sum_{free} c_k v_k satisfies the kernel invariance
/// conditions at every source y. The conditions are affine in the
/// multipliers, so each source gives a small least-squares problem with rows
///   tau(0, x; y) for every x sample, phi(0,y;y) + div xi(0,y;y), xi(0,y;y).
/// With no fixed element a nontrivial null vector is required instead.
inline CombinationSolution solve_generator_combination(const std::vector<Generator>& basis,
                                                       const std::vector<std::size_t>& free_indices,
                                                       std::span<const double> y_samples,
                                                       std::span<const double> x_samples, double tol = 1e-10) {
    if (basis.empty()) throw UsageError("solve_generator_combination: empty basis");
    if (y_samples.empty()) throw UsageError("solve_generator_combination: empty source sample set");
    std::vector<bool> is_free(basis.size(), false);
    for (auto k : free_indices) {
        if (k >= basis.size()) throw UsageError("solve_generator_combination: free index out of range");
        is_free[k] = true;
    }
    const bool homogeneous = std::all_of(is_free.begin(), is_free.end(), [](bool b) { return b; });
    const Eigen::Index nfree = Eigen::Index(free_indices.size());
    const Eigen::Index rows = Eigen::Index(x_samples.size()) + 2;

    CombinationSolution sol;
    sol.y_samples.assign(y_samples.begin(), y_samples.end());
    sol.multipliers = Eigen::MatrixXd::Zero(Eigen::Index(y_samples.size()), nfree);
    sol.found = true;

    auto conditions = [&](const Generator& g, double y) {
        Eigen::VectorXd c(rows);
        for (std::size_t i = 0; i < x_samples.size(); ++i) c(Eigen::Index(i)) = g.tau_at(0.0, x_samples[i], y);
        c(rows - 2) = g.phi_at(0.0, y, y) + g.divergence(0.0, y, y);
        c(rows - 1) = g.xi_at(0.0, y, y);
        return c;
    };

    for (std::size_t iy = 0; iy < y_samples.size(); ++iy) {
        const double y = y_samples[iy];
        Eigen::MatrixXd A(rows, nfree);
        for (Eigen::Index k = 0; k < nfree; ++k) A.col(k) = conditions(basis[free_indices[std::size_t(k)]], y);
        if (homogeneous) {
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
            const Eigen::Index last = nfree - 1;
            const double smallest = nfree > 0 && svd.singularValues().size() == nfree ? svd.singularValues()(last) : 0.0;
            Eigen::VectorXd v = svd.matrixV().col(last);
            sol.residual = std::max(sol.residual, (A * v).norm());
            if (smallest > tol) sol.found = false;
            sol.multipliers.row(Eigen::Index(iy)) = v.transpose();
            continue;
        }
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);
        for (std::size_t j = 0; j < basis.size(); ++j)
            if (!is_free[j]) rhs -= conditions(basis[j], y);
        Eigen::VectorXd c = nfree > 0 ? Eigen::VectorXd(A.completeOrthogonalDecomposition().solve(rhs)) : Eigen::VectorXd();
        const double res = nfree > 0 ? (A * c - rhs).norm() : rhs.norm();
        sol.residual = std::max(sol.residual, res);
        if (res > tol) sol.found = false;
        if (nfree > 0) sol.multipliers.row(Eigen::Index(iy)) = c.transpose();
    }

    // affine fit over the sources
    Eigen::MatrixXd design(Eigen::Index(y_samples.size()), 2);
    for (std::size_t i = 0; i < y_samples.size(); ++i) design.row(Eigen::Index(i)) << 1.0, y_samples[i];
    const auto qr = design.colPivHouseholderQr();
    for (Eigen::Index k = 0; k < nfree; ++k) {
        const Eigen::VectorXd coef = qr.solve(sol.multipliers.col(k));
        sol.fitted.push_back({coef(0), coef(1)});
        sol.fit_residual = std::max(sol.fit_residual, (design * coef - sol.multipliers.col(k)).cwiseAbs().maxCoeff());
    }
    return sol;
}

/// The coefficient-determination setup for a problem's catalog: a fixed
/// generator plus the free elements whose multipliers are solved for.
///   heat:      v2 + lambda v3 + lambda~ v1
///   diffusion: v3 + lambda v0
struct CoefficientQuery {
    std::vector<Generator> basis;
    std::vector<std::size_t> free_indices;
};

inline CoefficientQuery coefficient_query(const PdeProblem& problem) {
    auto get = [&](const std::string& label) {
        const Generator* g = problem.find_generator(label);
        if (g == nullptr) throw UsageError("catalog of '" + problem.name + "' has no generator " + label);
        return *g;
    };
    if (problem.kind == ProblemKind::heat) return {{get("v2"), get("v3"), get("v1")}, {1, 2}};
    return {{get("v3"), get("v0")}, {1}};
}

inline CombinationSolution solve_generator_combination(const PdeProblem& problem, int samples = 33) {
    const CoefficientQuery q = coefficient_query(problem);
    const auto ys = linspace(problem.sample_x_lo(), problem.box.x_hi, samples);
    const auto xs = linspace(problem.sample_x_lo(), problem.box.x_hi, samples);
    return solve_generator_combination(q.basis, q.free_indices, ys, xs);
}

// ---------------------------------------------------------------------------
// Infinitesimal transformation of a density.

/// Compare the exact pushforward of the density f under x -> x + a xi(x)
/// with the first-order formula f - a xi'(x) f at transformed points:
///   defect = max_s | fbar(s + a xi(s)) - (f(s) - a xi'(s) f(s)) |,
/// where fbar(z) = f(T^{-1} z) / T'(T^{-1} z) with T^{-1} found by Newton.
/// `xi` must accept both double and Jet arguments.
template <class Density, class Field>
double pushforward_defect(Density&& f, Field&& xi, double a, std::span<const double> samples) {
    if (!(a >= 0.0) || a > 1e-2) throw UsageError("pushforward probe a must lie in [0, 1e-2]");
    if (a == 0.0) return 0.0;
    auto field = [&](double x) {
        const Jet j = xi(Jet::variable(x, Dir::x, DirSet::x()));
        return std::pair{j.value, j.dx()};
    };
    double defect = 0.0;
    for (double s : samples) {
        const auto [xs, dxs] = field(s);
        if (1.0 + a * dxs <= 0.0) throw UsageError("pushforward map is not invertible at x = " + std::to_string(s));
        const double z = s + a * xs;
        // invert T(x) = x + a xi(x) = z
        double x = z - a * xs;
        for (int it = 0; it < 50; ++it) {
            const auto [v, dv] = field(x);
            const double step = (x + a * v - z) / (1.0 + a * dv);
            x -= step;
            if (std::abs(step) <= 1e-16 * (1.0 + std::abs(x))) break;
        }
        const double jac = 1.0 + a * field(x).second;
        if (jac <= 0.0) throw UsageError("pushforward map is not invertible near x = " + std::to_string(s));
        const double pushed = f(x) / jac;
        const double first_order = f(s) - a * dxs * f(s);
        defect = std::max(defect, std::abs(pushed - first_order));
    }
    return defect;
}

// ---------------------------------------------------------------------------
// Prolongation and the linearized symmetry condition.

/// Closed-form solution u(t, x) evaluable on nested jets.
using NestedSolution = std::function<Jet3(const Jet3& t, const Jet3& x)>;

struct SolutionDerivatives {
    double u, u_t, u_x, u_tt, u_tx, u_xx, u_xxx, u_txx;
};

struct Prolongation {
    double tau, xi, eta;
    double eta_t, eta_x, eta_xx;
    SolutionDerivatives solution;
};

/// Second prolongation of a point generator along a solution:
///   eta^J = D_J(eta - xi u_x - tau u_t) + xi u_{Jx} + tau u_{Jt}.
/// Total derivatives are ordinary derivatives of the characteristic composed
/// with the solution, read off nested jets.
inline Prolongation prolong(const PointGenerator& gen, const NestedSolution& solution, double t, double x) {
    const auto lifted = jet_lift_nested(t, x, 0.0);
    const Jet3 u = solution(lifted.t, lifted.x);
    const Jet ti = Jet::variable(t, Dir::t, DirSet::tx());
    const Jet xi_in = Jet::variable(x, Dir::x, DirSet::tx());
    const Jet& U = u.value;
    const Jet& Ut = u.d[0];
    const Jet& Ux = u.d[1];
    const Jet tau = gen.tau(ti, xi_in, U);
    const Jet xi = gen.xi(ti, xi_in, U);
    const Jet eta = gen.eta(ti, xi_in, U);
    const Jet Q = eta - xi * Ux - tau * Ut;

    Prolongation p{};
    auto& s = p.solution;
    s.u = U.value;
    s.u_t = Ut.value;
    s.u_x = Ux.value;
    s.u_tt = u.dd[0].value;
    s.u_tx = u.dd[1].value;
    s.u_xx = u.dd[2].value;
    s.u_xxx = u.dd[2].dx();
    s.u_txx = u.dd[2].dt();
    p.tau = tau.value;
    p.xi = xi.value;
    p.eta = eta.value;
    p.eta_t = Q.dt() + p.xi * s.u_tx + p.tau * s.u_tt;
    p.eta_x = Q.dx() + p.xi * s.u_xx + p.tau * s.u_tx;
    p.eta_xx = Q.dxx() + p.xi * s.u_xxx + p.tau * s.u_txx;
    return p;
}

struct SpaceTimePoint {
    double t;
    double x;
};

struct LscReport {
    double max_condition = 0.0; ///< max |X(A)| over samples
    double max_pde_residual = 0.0;
};

/// Evaluate pr v (A) with A = u_t - a(x) u_xx - c(x) u_x on a closed-form
/// solution at each sample. The solution must satisfy the PDE first.
inline LscReport lsc_verify(const PdeProblem& pde, const PointGenerator& gen, const NestedSolution& solution,
                            std::span<const SpaceTimePoint> samples) {
    if (samples.empty()) throw UsageError("lsc_verify: empty sample set");
    LscReport rep;
    std::vector<Prolongation> pro;
    pro.reserve(samples.size());
    for (const auto& s : samples) {
        pro.push_back(prolong(gen, solution, s.t, s.x));
        const auto& d = pro.back().solution;
        const double a = pde.a(s.x), c = pde.c(s.x);
        const double res = d.u_t - a * d.u_xx - c * d.u_x;
        const double scale = 1.0 + std::abs(d.u_t) + std::abs(a * d.u_xx) + std::abs(c * d.u_x);
        rep.max_pde_residual = std::max(rep.max_pde_residual, std::abs(res) / scale);
    }
    if (rep.max_pde_residual > 1e-8)
        throw UsageError("lsc_verify: solution does not satisfy the PDE (max scaled residual " +
                         std::to_string(rep.max_pde_residual) + ")");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& p = pro[i];
        const auto& d = p.solution;
        const double x = samples[i].x;
        const double dA_dx = -pde.a_x(x) * d.u_xx - pde.c_x(x) * d.u_x;
        const double X = p.xi * dA_dx + p.eta_t - pde.c(x) * p.eta_x - pde.a(x) * p.eta_xx;
        rep.max_condition = std::max(rep.max_condition, std::abs(X));
    }
    return rep;
}

} // namespace gspinn
