#pragma once

#include "gspinn/errors.hpp"

#include <array>
#include <cmath>
#include <cstdint>

/// \file jet.hpp
///
/// Second-order Taylor jets over the two tracked inputs (t, x).
///
/// A `Jet2<T>` carries a value, the two first-order coefficients and the
/// three distinct second-order coefficients (tt, tx, xx). `T` is either
/// `double` or another jet; nesting `Jet2<Jet2<double>>` yields mixed
/// derivatives up to order four, which the prolongation checks use for the
/// third-order terms of closed-form solutions.

namespace gspinn {

enum class Dir : std::uint8_t { t = 0, x = 1 };

/// Set of tracked directions. Jets with an empty set are constants and mix
/// freely with any other jet.
struct DirSet {
    std::uint8_t bits = 0;

    static constexpr DirSet none() { return {0}; }
    static constexpr DirSet t() { return {1}; }
    static constexpr DirSet x() { return {2}; }
    static constexpr DirSet tx() { return {3}; }

    constexpr bool contains(Dir d) const { return (bits >> static_cast<int>(d)) & 1U; }
    constexpr bool empty() const { return bits == 0; }
    friend constexpr bool operator==(DirSet a, DirSet b) { return a.bits == b.bits; }
};

namespace detail {
// index of the unordered pair (i, j) in the second-order array: tt=0, tx=1, xx=2
constexpr int pair_index(int i, int j) { return i + j; }
} // namespace detail

template <class T>
struct Jet2 {
    T value{};
    std::array<T, 2> d{};
    std::array<T, 3> dd{};
    DirSet dirs{};

    constexpr Jet2() = default;
    // Constants: all coefficients zero, no tracked directions.
    constexpr Jet2(double c) : value(c), d{T(0.0), T(0.0)}, dd{T(0.0), T(0.0), T(0.0)} {}
    // Nested jets also accept a constant of the inner type.
    template <class U = T, class = std::enable_if_t<!std::is_same_v<U, double>>>
    constexpr Jet2(const T& c) : value(c), d{T(0.0), T(0.0)}, dd{T(0.0), T(0.0), T(0.0)} {}

    /// Seeded variable: value v, d[dir] = 1.
    static Jet2 variable(const T& v, Dir dir, DirSet tracked) {
        if (!tracked.contains(dir)) throw UsageError("jet variable seeded on an untracked direction");
        Jet2 j(v);
        j.dirs = tracked;
        j.d[static_cast<int>(dir)] = T(1.0);
        return j;
    }

    const T& grad(Dir a) const { return d[static_cast<int>(a)]; }
    const T& hess(Dir a, Dir b) const {
        return dd[detail::pair_index(static_cast<int>(a), static_cast<int>(b))];
    }

    T dt() const { return d[0]; }
    T dx() const { return d[1]; }
    T dtt() const { return dd[0]; }
    T dtx() const { return dd[1]; }
    T dxx() const { return dd[2]; }
};

using Jet = Jet2<double>;
using Jet3 = Jet2<Jet2<double>>;

/// Strip every jet level and return the plain value.
inline double primal(double v) { return v; }
template <class T>
double primal(const Jet2<T>& j) { return primal(j.value); }

namespace detail {

template <class T>
DirSet merge_dirs(const Jet2<T>& a, const Jet2<T>& b) {
    if (a.dirs.empty()) return b.dirs;
    if (b.dirs.empty() || a.dirs == b.dirs) return a.dirs;
    throw UsageError("jet operands track different direction sets");
}

/// Generic chain rule for a scalar function with value f0, f' = f1, f'' = f2
/// evaluated at a.value.
template <class T>
Jet2<T> chain(const Jet2<T>& a, const T& f0, const T& f1, const T& f2) {
    Jet2<T> r;
    r.dirs = a.dirs;
    r.value = f0;
    for (int i = 0; i < 2; ++i) r.d[i] = f1 * a.d[i];
    for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) {
            const int k = pair_index(i, j);
            r.dd[k] = f1 * a.dd[k] + f2 * a.d[i] * a.d[j];
        }
    return r;
}

} // namespace detail

template <class T>
Jet2<T> operator+(const Jet2<T>& a, const Jet2<T>& b) {
    Jet2<T> r;
    r.dirs = detail::merge_dirs(a, b);
    r.value = a.value + b.value;
    for (int i = 0; i < 2; ++i) r.d[i] = a.d[i] + b.d[i];
    for (int k = 0; k < 3; ++k) r.dd[k] = a.dd[k] + b.dd[k];
    return r;
}

template <class T>
Jet2<T> operator-(const Jet2<T>& a) {
    Jet2<T> r;
    r.dirs = a.dirs;
    r.value = -a.value;
    for (int i = 0; i < 2; ++i) r.d[i] = -a.d[i];
    for (int k = 0; k < 3; ++k) r.dd[k] = -a.dd[k];
    return r;
}

template <class T>
Jet2<T> operator-(const Jet2<T>& a, const Jet2<T>& b) {
    return a + (-b);
}

template <class T>
Jet2<T> operator*(const Jet2<T>& a, const Jet2<T>& b) {
    Jet2<T> r;
    r.dirs = detail::merge_dirs(a, b);
    r.value = a.value * b.value;
    for (int i = 0; i < 2; ++i) r.d[i] = a.value * b.d[i] + a.d[i] * b.value;
    for (int i = 0; i < 2; ++i)
        for (int j = i; j < 2; ++j) {
            const int k = detail::pair_index(i, j);
            r.dd[k] = a.value * b.dd[k] + a.dd[k] * b.value + a.d[i] * b.d[j] + a.d[j] * b.d[i];
        }
    return r;
}

/// Multiply every coefficient by a plain scalar.
template <class T>
Jet2<T> scale(const Jet2<T>& a, double s) {
    Jet2<T> r;
    r.dirs = a.dirs;
    r.value = a.value * s;
    for (int i = 0; i < 2; ++i) r.d[i] = a.d[i] * s;
    for (int k = 0; k < 3; ++k) r.dd[k] = a.dd[k] * s;
    return r;
}

/// s * a + c
template <class T>
Jet2<T> affine(const Jet2<T>& a, double s, double c) {
    Jet2<T> r = scale(a, s);
    r.value = r.value + c;
    return r;
}

template <class T>
Jet2<T> operator*(const Jet2<T>& a, double s) { return scale(a, s); }
template <class T>
Jet2<T> operator*(double s, const Jet2<T>& a) { return scale(a, s); }
template <class T>
Jet2<T> operator+(const Jet2<T>& a, double c) { return affine(a, 1.0, c); }
template <class T>
Jet2<T> operator+(double c, const Jet2<T>& a) { return affine(a, 1.0, c); }
template <class T>
Jet2<T> operator-(const Jet2<T>& a, double c) { return affine(a, 1.0, -c); }
template <class T>
Jet2<T> operator-(double c, const Jet2<T>& a) { return affine(a, -1.0, c); }

template <class T>
Jet2<T> reciprocal(const Jet2<T>& a) {
    const T inv = T(1.0) / a.value;
    const T inv2 = inv * inv;
    return detail::chain(a, inv, -inv2, 2.0 * inv2 * inv);
}

template <class T>
Jet2<T> operator/(const Jet2<T>& a, const Jet2<T>& b) { return a * reciprocal(b); }
template <class T>
Jet2<T> operator/(const Jet2<T>& a, double s) { return scale(a, 1.0 / s); }
template <class T>
Jet2<T> operator/(double c, const Jet2<T>& b) { return scale(reciprocal(b), c); }

template <class T>
Jet2<T> exp(const Jet2<T>& a) {
    using std::exp;
    const T e = exp(a.value);
    return detail::chain(a, e, e, e);
}

template <class T>
Jet2<T> log(const Jet2<T>& a) {
    using std::log;
    const T inv = T(1.0) / a.value;
    return detail::chain(a, log(a.value), inv, -(inv * inv));
}

template <class T>
Jet2<T> sqrt(const Jet2<T>& a) {
    using std::sqrt;
    const T s = sqrt(a.value);
    const T f1 = 0.5 / s;
    return detail::chain(a, s, f1, -0.5 * f1 / a.value);
}

template <class T>
Jet2<T> tanh(const Jet2<T>& a) {
    using std::tanh;
    const T th = tanh(a.value);
    const T s = 1.0 - th * th;
    return detail::chain(a, th, s, -2.0 * th * s);
}

template <class T>
Jet2<T> cosh(const Jet2<T>& a) {
    using std::cosh;
    using std::sinh;
    const T c = cosh(a.value);
    return detail::chain(a, c, sinh(a.value), c);
}

template <class T>
Jet2<T> sinh(const Jet2<T>& a) {
    using std::cosh;
    using std::sinh;
    const T s = sinh(a.value);
    return detail::chain(a, s, cosh(a.value), s);
}

template <class T>
Jet2<T> sin(const Jet2<T>& a) {
    using std::cos;
    using std::sin;
    const T s = sin(a.value);
    return detail::chain(a, s, cos(a.value), -s);
}

template <class T>
Jet2<T> cos(const Jet2<T>& a) {
    using std::cos;
    using std::sin;
    const T c = cos(a.value);
    return detail::chain(a, c, -sin(a.value), -c);
}

/// a^p for real p (a > 0 unless p is a non-negative integer).
template <class T>
Jet2<T> pow(const Jet2<T>& a, double p) {
    using std::pow;
    const T f1 = p * pow(a.value, p - 1.0);
    return detail::chain(a, pow(a.value, p), f1, (p * (p - 1.0)) * pow(a.value, p - 2.0));
}

/// Input jets for a point (t, x, y). Tracked coordinates are seeded with a
/// unit coefficient on their own direction; y is always passive.
template <class T = double>
struct LiftedPoint {
    Jet2<T> t, x, y;
};

template <class T = double>
LiftedPoint<T> jet_lift(double t, double x, double y, DirSet tracked) {
    LiftedPoint<T> p{Jet2<T>(t), Jet2<T>(x), Jet2<T>(y)};
    p.t.dirs = p.x.dirs = p.y.dirs = tracked;
    if (tracked.contains(Dir::t)) p.t = Jet2<T>::variable(T(t), Dir::t, tracked);
    if (tracked.contains(Dir::x)) p.x = Jet2<T>::variable(T(x), Dir::x, tracked);
    return p;
}

/// Lift (t, x) into doubly nested jets. The inner level tracks (t, x) so
/// every outer coefficient is itself a jet of the same coordinates.
inline LiftedPoint<Jet> jet_lift_nested(double t, double x, double y) {
    const Jet ti = Jet::variable(t, Dir::t, DirSet::tx());
    const Jet xi = Jet::variable(x, Dir::x, DirSet::tx());
    LiftedPoint<Jet> p{Jet3::variable(ti, Dir::t, DirSet::tx()), Jet3::variable(xi, Dir::x, DirSet::tx()),
                       Jet3(Jet(y))};
    p.y.dirs = DirSet::tx();
    return p;
}

} // namespace gspinn
