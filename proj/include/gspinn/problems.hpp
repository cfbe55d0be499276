#pragma once

#include "gspinn/autodiff.hpp"
#include "gspinn/errors.hpp"
#include "gspinn/generator.hpp"
#include "gspinn/jet.hpp"
#include "gspinn/quadrature.hpp"

#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace gspinn {

// ---------------------------------------------------------------------------
// Closed-form kernels.

/// Heat kernel of u_t = D u_xx in one dimension,
/// (4 pi D t)^{-1/2} exp(-(x-y)^2 / (4 D t)). D = 1/2 gives the
/// (2 pi t)^{-1/2} exp(-(x-y)^2 / 2t) form used for training.
template <class T>
T heat_kernel(const T& t, const T& x, double y, double diffusivity = 0.5) {
    using std::exp;
    using std::sqrt;
    if (!(primal(t) > 0.0)) throw DomainError("heat kernel requires t > 0");
    const T r = x - y;
    const T four_dt = 4.0 * diffusivity * t;
    return exp(-(r * r) / four_dt) / sqrt(std::numbers::pi * four_dt);
}

/// (2 pi t)^{-n/2} exp(-|x-y|^2 / 2t) at the diagonal points (x,...,x) and
/// (y,...,y) of R^n; n = 1 is the ordinary one-dimensional kernel.
inline double heat_kernel_exact(double t, double x, double y, int n = 1) {
    if (n < 1) throw UsageError("dimension must be >= 1");
    if (!(t > 0.0)) throw DomainError("heat kernel requires t > 0");
    const double r2 = double(n) * (x - y) * (x - y);
    return std::pow(2.0 * std::numbers::pi * t, -0.5 * n) * std::exp(-r2 / (2.0 * t));
}

/// n-dimensional heat kernel (2 pi t)^{-n/2} exp(-|x-y|^2 / 2t).
inline double heat_kernel_exact(double t, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.empty()) throw UsageError("heat kernel: x and y must have equal nonzero dimension");
    if (!(t > 0.0)) throw DomainError("heat kernel requires t > 0");
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - y[i]) * (x[i] - y[i]);
    return std::pow(2.0 * std::numbers::pi * t, -0.5 * double(x.size())) * std::exp(-r2 / (2.0 * t));
}

/// Kernel of u_t = x u_xx + u_x / 2 on x > 0:
/// (pi t y)^{-1/2} exp(-(x+y)/t) cosh(2 sqrt(x y) / t).
template <class T>
T diffusion_kernel(const T& t, const T& x, double y) {
    using std::cosh;
    using std::exp;
    using std::sqrt;
    if (!(primal(t) > 0.0)) throw DomainError("diffusion kernel requires t > 0");
    if (!(y > 0.0)) throw DomainError("diffusion kernel requires y > 0");
    if constexpr (std::is_same_v<T, double>) {
        if (!(x >= 0.0)) throw DomainError("diffusion kernel requires x >= 0");
    } else {
        // sqrt(x y) has no Taylor expansion at x = 0
        if (!(primal(x) > 0.0)) throw DomainError("diffusion kernel jets require x > 0");
    }
    return exp(-(x + y) / t) * cosh(2.0 * sqrt(x * y) / t) / sqrt(std::numbers::pi * y * t);
}

inline double diffusion_kernel_exact(double t, double x, double y) { return diffusion_kernel(t, x, y); }

// ---------------------------------------------------------------------------
// Residuals.

/// K_t - 1/2 sum_i K_{x_i x_i}.
inline double heat_residual(double K_t, std::span<const double> K_xx_diagonal) {
    if (K_xx_diagonal.empty()) throw UsageError("heat residual needs n >= 1 second derivatives");
    double lap = 0.0;
    for (double v : K_xx_diagonal) lap += v;
    return K_t - 0.5 * lap;
}

inline double heat_residual(const KernelJet& jet, int n = 1) {
    if (n != 1) throw UsageError("KernelJet carries one spatial coordinate; use the span overload for n > 1");
    return jet.K_t - 0.5 * jet.K_xx;
}

/// K_t - x K_xx - b K_x.
inline double diffusion_residual(const KernelJet& jet, double x, double b = 0.5) {
    if (!(x > 0.0)) throw DomainError("diffusion residual requires x > 0");
    return jet.K_t - x * jet.K_xx - b * jet.K_x;
}

// ---------------------------------------------------------------------------
// Problems.

enum class ProblemKind { heat, diffusion };

struct DomainBox {
    double t_max = 1.0;
    double x_lo = -2.0;
    double x_hi = 2.0;

    bool valid() const { return t_max > 0.0 && x_hi > x_lo; }
};

/// Coefficients of the residual K_t - L_x K written as
/// value*K + t*K_t + x*K_x + xx*K_xx.
struct ResidualCoefficients {
    double value = 0.0;
    double t = 1.0;
    double x = 0.0;
    double xx = 0.0;
};

struct CatalogEntry {
    Generator generator;
    bool invariant = false;
};

/// A linear parabolic problem u_t = a(x) u_xx + c(x) u_x with its kernel
/// oracle, domain box and symmetry catalog.
class PdeProblem {
public:
    ProblemKind kind = ProblemKind::heat;
    std::string name = "heat";
    int dimension = 1;
    /// heat: u_t = D u_xx; the training problem uses D = 1/2
    double diffusivity = 0.5;
    /// diffusion: drift coefficient b
    double b = 0.5;
    DomainBox box;
    /// lower bound for sampled t (excluded)
    double t_floor = 0.0;
    /// lower bound for sampled x, y
    double space_floor = -std::numeric_limits<double>::infinity();
    std::vector<CatalogEntry> catalog;

    double sample_x_lo() const { return std::max(box.x_lo, space_floor); }

    /// a(x), a'(x), c(x), c'(x) of u_t = a u_xx + c u_x.
    double a(double x) const { return kind == ProblemKind::heat ? diffusivity : x; }
    double a_x(double) const { return kind == ProblemKind::heat ? 0.0 : 1.0; }
    double c(double) const { return kind == ProblemKind::heat ? 0.0 : b; }
    double c_x(double) const { return 0.0; }

    ResidualCoefficients residual_coefficients(double x) const { return {0.0, 1.0, -c(x), -a(x)}; }

    double residual(const KernelJet& jet, double x) const {
        if (kind == ProblemKind::diffusion && !(x > 0.0)) throw DomainError("diffusion residual requires x > 0");
        const auto rc = residual_coefficients(x);
        return rc.value * jet.K + rc.t * jet.K_t + rc.x * jet.K_x + rc.xx * jet.K_xx;
    }

    template <class T>
    T kernel(const T& t, const T& x, double y) const {
        if (kind == ProblemKind::heat) return heat_kernel(t, x, y, diffusivity);
        if (b != 0.5) throw UsageError("closed-form diffusion kernel is only known for b = 1/2");
        return diffusion_kernel(t, x, y);
    }

    double exact(double t, double x, double y) const { return kernel(t, x, y); }

    /// K, K_t, K_x, K_xx of the exact kernel.
    KernelJet exact_jet(double t, double x, double y) const {
        const auto p = jet_lift(t, x, y, DirSet::tx());
        const Jet k = kernel(p.t, p.x, y);
        return {k.value, k.dt(), k.dx(), k.dxx()};
    }

    const Generator& invariant_generator() const {
        for (const auto& e : catalog)
            if (e.invariant) return e.generator;
        throw UsageError("problem '" + name + "' has no invariant generator");
    }

    /// Catalog lookup by label; "invariant" resolves to the invariant entry.
    const Generator* find_generator(const std::string& label) const {
        if (label == "invariant") return &invariant_generator();
        for (const auto& e : catalog)
            if (e.generator.label == label) return &e.generator;
        return nullptr;
    }
};

namespace detail {

inline CoefficientFn coef(std::function<Jet(const Jet&, const Jet&, double)> f) { return f; }

} // namespace detail

/// Symmetry algebra of u_t = D u_xx (n = 1 coordinates per generator; the
/// dilation and projective terms carry n):
///   v0 = d_t, v1 = d_x, v2 = 2t d_t + x d_x, v3 = u d_u,
///   v4 = 2Dt d_x - x u d_u, v5 = t^2 d_t + t x d_x - (n t/2 + x^2/(4D)) u d_u
/// plus the kernel-invariant combination v2 - n v3 - y v1.
inline std::vector<CatalogEntry> heat_catalog(int n = 1, double diffusivity = 0.5) {
    const double D = diffusivity;
    const auto zero = constant_coefficient(0.0);
    Generator v0{"v0", constant_coefficient(1.0), zero, zero, n};
    Generator v1{"v1", zero, constant_coefficient(1.0), zero, n};
    Generator v2{"v2", detail::coef([](const Jet& t, const Jet&, double) { return 2.0 * t; }),
                 detail::coef([](const Jet&, const Jet& x, double) { return x; }), zero, n};
    Generator v3{"v3", zero, zero, constant_coefficient(1.0), n};
    Generator v4{"v4", zero, detail::coef([D](const Jet& t, const Jet&, double) { return 2.0 * D * t; }),
                 detail::coef([](const Jet&, const Jet& x, double) { return -x; }), n};
    Generator v5{"v5", detail::coef([](const Jet& t, const Jet&, double) { return t * t; }),
                 detail::coef([](const Jet& t, const Jet& x, double) { return t * x; }),
                 detail::coef([n, D](const Jet& t, const Jet& x, double) { return -(0.5 * n * t + x * x / (4.0 * D)); }),
                 n};
    Generator inv = linear_combination({{{1.0, 0.0}, v2}, {{-double(n), 0.0}, v3}, {{0.0, -1.0}, v1}}, "v2-n*v3-y*v1");
    return {{v0, false}, {v1, false}, {v2, false}, {v3, false}, {v4, false}, {v5, false}, {inv, true}};
}

/// Symmetry algebra of u_t = x u_xx + b u_x:
///   v0 = u d_u, v1 = d_t, v2 = t d_t + x d_x,
///   v3 = t^2 d_t + 2tx d_x - (x + b t) u d_u
/// plus the kernel-invariant combination v3 + y v0.
inline std::vector<CatalogEntry> diffusion_catalog(double b = 0.5) {
    const auto zero = constant_coefficient(0.0);
    Generator v0{"v0", zero, zero, constant_coefficient(1.0), 1};
    Generator v1{"v1", constant_coefficient(1.0), zero, zero, 1};
    Generator v2{"v2", detail::coef([](const Jet& t, const Jet&, double) { return t; }),
                 detail::coef([](const Jet&, const Jet& x, double) { return x; }), zero, 1};
    Generator v3{"v3", detail::coef([](const Jet& t, const Jet&, double) { return t * t; }),
                 detail::coef([](const Jet& t, const Jet& x, double) { return 2.0 * t * x; }),
                 detail::coef([b](const Jet& t, const Jet& x, double) { return -(x + b * t); }), 1};
    Generator inv = linear_combination({{{1.0, 0.0}, v3}, {{0.0, 1.0}, v0}}, "v3+y*v0");
    return {{v0, false}, {v1, false}, {v2, false}, {v3, false}, {inv, true}};
}

inline PdeProblem make_heat_problem(int n = 1, double diffusivity = 0.5) {
    if (n < 1) throw UsageError("heat dimension must be >= 1");
    if (!(diffusivity > 0.0)) throw UsageError("heat diffusivity must be > 0");
    PdeProblem p;
    p.kind = ProblemKind::heat;
    p.name = "heat";
    p.dimension = n;
    p.diffusivity = diffusivity;
    p.box = {1.0, -2.0, 2.0};
    p.t_floor = 0.0;
    p.catalog = heat_catalog(n, diffusivity);
    return p;
}

inline PdeProblem make_diffusion_problem(double b = 0.5) {
    if (!(b > 0.0)) throw UsageError("diffusion coefficient b must be > 0");
    PdeProblem p;
    p.kind = ProblemKind::diffusion;
    p.name = "diffusion";
    p.b = b;
    p.box = {1.0, 0.0, 2.0};
    p.t_floor = 0.02;
    p.space_floor = 0.05;
    p.catalog = diffusion_catalog(b);
    return p;
}

inline PdeProblem make_problem(const std::string& name) {
    if (name == "heat") return make_heat_problem();
    if (name == "diffusion") return make_diffusion_problem();
    throw UsageError("unknown problem '" + name + "' (expected heat or diffusion)");
}

// ---------------------------------------------------------------------------
// Integral identities.

using KernelFn = std::function<double(double t, double x, double y)>;

/// int kernel(t1, x, z) kernel(t2, z, y) dz.
inline double compose_kernel(const KernelFn& kernel, double t1, double t2, double x, double y, const GaussLegendre& rule) {
    if (!(t1 > 0.0) || !(t2 > 0.0)) throw DomainError("compose_kernel requires t1 > 0 and t2 > 0");
    return rule.integrate([&](double z) { return kernel(t1, x, z) * kernel(t2, z, y); });
}

/// u(t, x) = int kernel(t, x, y) u0(y) dy.
inline double cauchy_solve(const KernelFn& kernel, const std::function<double(double)>& u0, double t, double x,
                           const GaussLegendre& rule) {
    if (!(t > 0.0)) throw DomainError("cauchy_solve requires t > 0");
    return rule.integrate([&](double y) { return kernel(t, x, y) * u0(y); });
}

} // namespace gspinn
