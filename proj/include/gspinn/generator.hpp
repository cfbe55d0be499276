#pragma once

#include "gspinn/errors.hpp"
#include "gspinn/jet.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace gspinn {

/// Coefficient of an infinitesimal generator as a function of (t, x) with the
/// source point y as a parameter. Jet-valued so derivatives along the
/// solution come for free.
using CoefficientFn = std::function<Jet(const Jet& t, const Jet& x, double y)>;

/// v = tau(t,x;y) d_t + xi(t,x;y) d_x + phi(t,x;y) u d_u
///
/// For the heat family in n > 1 dimensions the generator acts identically on
/// each coordinate; `dimension` then scales the divergence of xi.
struct Generator {
    std::string label;
    CoefficientFn tau;
    CoefficientFn xi;
    CoefficientFn phi;
    int dimension = 1;

    double tau_at(double t, double x, double y) const { return tau(Jet(t), Jet(x), y).value; }
    double xi_at(double t, double x, double y) const { return xi(Jet(t), Jet(x), y).value; }
    double phi_at(double t, double x, double y) const { return phi(Jet(t), Jet(x), y).value; }

    /// d(xi)/dx at (t, x; y).
    double xi_x(double t, double x, double y) const {
        const auto p = jet_lift(t, x, y, DirSet::x());
        return xi(p.t, p.x, y).dx();
    }

    /// Divergence of the spatial part: dimension * xi_x.
    double divergence(double t, double x, double y) const { return dimension * xi_x(t, x, y); }
};

inline CoefficientFn constant_coefficient(double c) {
    return [c](const Jet& t, const Jet&, double) { return t * 0.0 + c; };
}

inline Generator zero_generator() {
    return {"0", constant_coefficient(0.0), constant_coefficient(0.0), constant_coefficient(0.0), 1};
}

/// Multiplier a + b*y of a generator in a linear combination.
struct Multiplier {
    double constant = 0.0;
    double per_y = 0.0;

    double at(double y) const { return constant + per_y * y; }
};

struct CombinationTerm {
    Multiplier multiplier;
    Generator generator;
};

/// sum_k m_k(y) v_k. All terms must share the same dimension.
inline Generator linear_combination(const std::vector<CombinationTerm>& terms, std::string label) {
    if (terms.empty()) throw UsageError("linear combination needs at least one generator");
    const int dim = terms.front().generator.dimension;
    for (const auto& term : terms)
        if (term.generator.dimension != dim) throw UsageError("cannot combine generators of different dimension");
    auto combine = [terms](CoefficientFn Generator::*member) -> CoefficientFn {
        return [terms, member](const Jet& t, const Jet& x, double y) {
            Jet acc = t * 0.0;
            for (const auto& term : terms) {
                const double m = term.multiplier.at(y);
                if (m != 0.0) acc = acc + m * (term.generator.*member)(t, x, y);
            }
            return acc;
        };
    };
    return {std::move(label), combine(&Generator::tau), combine(&Generator::xi), combine(&Generator::phi), dim};
}

inline Generator scaled(const Generator& g, double s) {
    return linear_combination({{{s, 0.0}, g}}, std::to_string(s) + "*(" + g.label + ")");
}

/// General point generator tau(t,x,u) d_t + xi(t,x,u) d_x + eta(t,x,u) d_u
/// on (t, x, u) with no parameter. Used where eta need not be linear in u.
using PointCoefficientFn = std::function<Jet(const Jet& t, const Jet& x, const Jet& u)>;

struct PointGenerator {
    std::string label;
    PointCoefficientFn tau;
    PointCoefficientFn xi;
    PointCoefficientFn eta;
};

/// Specialize a generator to a fixed source point y, with eta = phi * u.
inline PointGenerator at_source(const Generator& g, double y) {
    return {g.label,
            [g, y](const Jet& t, const Jet& x, const Jet&) { return g.tau(t, x, y); },
            [g, y](const Jet& t, const Jet& x, const Jet&) { return g.xi(t, x, y); },
            [g, y](const Jet& t, const Jet& x, const Jet& u) { return g.phi(t, x, y) * u; }};
}

} // namespace gspinn
