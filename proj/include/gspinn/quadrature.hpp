#pragma once

#include "gspinn/errors.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace gspinn {

/// Gauss-Legendre rule with `n` nodes mapped onto [lo, hi].
///
/// Nodes come from Newton iteration on P_n started at the Chebyshev-like
/// guess cos(pi (i - 1/4) / (n + 1/2)); weights are 2 / ((1 - x^2) P_n'(x)^2).
class GaussLegendre {
public:
    GaussLegendre(int n, double lo = -1.0, double hi = 1.0) : lo_(lo), hi_(hi) {
        if (n < 1) throw UsageError("Gauss-Legendre rule needs at least one node");
        if (!(hi > lo)) throw UsageError("Gauss-Legendre interval must satisfy lo < hi");
        nodes_.resize(n);
        weights_.resize(n);
        const double half = 0.5 * (hi - lo);
        const double mid = 0.5 * (hi + lo);
        const int m = (n + 1) / 2;
        for (int i = 0; i < m; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int iter = 0; iter < 100; ++iter) {
                double p0 = 1.0, p1 = 0.0;
                for (int k = 1; k <= n; ++k) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
                }
                dp = n * (z * p0 - p1) / (z * z - 1.0);
                const double dz = p0 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            // recompute derivative at the converged root
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes_[i] = mid - half * z;
            nodes_[n - 1 - i] = mid + half * z;
            weights_[i] = weights_[n - 1 - i] = half * w;
        }
    }

    int size() const { return static_cast<int>(nodes_.size()); }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    template <class F>
    double integrate(F&& f) const {
        double sum = 0.0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) sum += weights_[i] * f(nodes_[i]);
        return sum;
    }

private:
    double lo_, hi_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

} // namespace gspinn
