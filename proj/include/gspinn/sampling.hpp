#pragma once

#include "gspinn/autodiff.hpp"
#include "gspinn/errors.hpp"
#include "gspinn/problems.hpp"
#include "gspinn/rng.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gspinn {

struct SamplerConfig {
    int n_initial = 500;
    int n_residual = 5000;
    int n_symmetry = 5000;
    DomainBox box;
    /// sampled t lies in (t_floor, t_max]
    double t_floor = 0.0;
    /// sampled x, y lie in [max(box.x_lo, space_floor), box.x_hi)
    double space_floor = -std::numeric_limits<double>::infinity();
    /// standard deviation of the Gaussian that stands in for delta(x - y)
    double sigma = 0.1;
    std::uint64_t seed = 0;
    bool resample_each_iteration = false;

    double x_lo() const { return std::max(box.x_lo, space_floor); }

    void validate() const {
        if (n_initial < 0 || n_residual < 0 || n_symmetry < 0) throw UsageError("collocation counts must be >= 0");
        if (!(sigma > 0.0) || !std::isfinite(sigma)) throw UsageError("sigma must be > 0");
        if (!box.valid() || !(x_lo() < box.x_hi)) throw UsageError("degenerate domain box");
        if (!(t_floor >= 0.0) || !(t_floor < box.t_max)) throw UsageError("t_floor must lie in [0, t_max)");
    }

    static SamplerConfig for_problem(const PdeProblem& p, int n0, int nr, int ns, std::uint64_t seed = 0) {
        SamplerConfig c;
        c.n_initial = n0;
        c.n_residual = nr;
        c.n_symmetry = ns;
        c.box = p.box;
        c.t_floor = p.t_floor;
        c.space_floor = p.space_floor;
        c.seed = seed;
        return c;
    }
};

struct CollocationBatch {
    PointMatrix initial;           ///< rows t (= 0), x, y
    Eigen::VectorXd initial_target; ///< Gaussian g(x, y)
    PointMatrix residual;
    PointMatrix symmetry;
};

/// g(x, y) = (2 pi sigma^2)^{-1/2} exp(-(x-y)^2 / (2 sigma^2)).
inline double delta_gaussian(double x, double y, double sigma) {
    const double r = x - y;
    return std::exp(-r * r / (2.0 * sigma * sigma)) / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
}

namespace detail {

inline PointMatrix sample_interior(const SamplerConfig& cfg, int count, Stream stream, std::uint64_t epoch) {
    PointMatrix pts(3, count);
    const CounterRng rng(cfg.seed, stream, epoch);
    const double span_t = cfg.box.t_max - cfg.t_floor;
    for (int i = 0; i < count; ++i) {
        // 1 - U lies in (0, 1], giving t in (t_floor, t_max]
        pts(0, i) = cfg.t_floor + span_t * (1.0 - rng.uniform(std::uint64_t(i), 0));
        pts(1, i) = rng.uniform(cfg.x_lo(), cfg.box.x_hi, std::uint64_t(i), 1);
        pts(2, i) = rng.uniform(cfg.x_lo(), cfg.box.x_hi, std::uint64_t(i), 2);
    }
    return pts;
}

} // namespace detail

inline void sample_initial(const SamplerConfig& cfg, PointMatrix& points, Eigen::VectorXd& targets, std::uint64_t epoch = 0) {
    cfg.validate();
    points.resize(3, cfg.n_initial);
    targets.resize(cfg.n_initial);
    const CounterRng rng(cfg.seed, Stream::initial_points, epoch);
    for (int i = 0; i < cfg.n_initial; ++i) {
        points(0, i) = 0.0;
        points(1, i) = rng.uniform(cfg.x_lo(), cfg.box.x_hi, std::uint64_t(i), 1);
        points(2, i) = rng.uniform(cfg.x_lo(), cfg.box.x_hi, std::uint64_t(i), 2);
        targets(i) = delta_gaussian(points(1, i), points(2, i), cfg.sigma);
    }
}

inline PointMatrix sample_residual(const SamplerConfig& cfg, std::uint64_t epoch = 0) {
    cfg.validate();
    return detail::sample_interior(cfg, cfg.n_residual, Stream::residual_points, epoch);
}

inline PointMatrix sample_symmetry(const SamplerConfig& cfg, std::uint64_t epoch = 0) {
    cfg.validate();
    return detail::sample_interior(cfg, cfg.n_symmetry, Stream::symmetry_points, epoch);
}

/// Full batch for one epoch; epoch 0 is the fixed training set.
inline CollocationBatch sample_batch(const SamplerConfig& cfg, std::uint64_t epoch = 0) {
    CollocationBatch b;
    sample_initial(cfg, b.initial, b.initial_target, epoch);
    b.residual = sample_residual(cfg, epoch);
    b.symmetry = sample_symmetry(cfg, epoch);
    return b;
}

} // namespace gspinn
