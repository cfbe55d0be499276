#include "fd.hpp"
#include "gspinn/rng.hpp"
#include "gspinn/training.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gspinn;

namespace {

SamplerConfig small_sampler(const PdeProblem& p, int n0, int nr, int ns, std::uint64_t seed = 0) {
    return SamplerConfig::for_problem(p, n0, nr, ns, seed);
}

// Residual of each term at every point when the network is replaced by the
// exact kernel's jets.
double max_exact_term_residual(const PdeProblem& p, const LinearJetTerm& term) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < term.points.cols(); ++i) {
        const KernelJet j = p.exact_jet(term.points(0, i), term.points(1, i), term.points(2, i));
        double r = -(term.target.size() ? term.target(i) : 0.0);
        if (term.c_value.size()) r += term.c_value(i) * j.K;
        if (term.c_t.size()) r += term.c_t(i) * j.K_t;
        if (term.c_x.size()) r += term.c_x(i) * j.K_x;
        if (term.c_xx.size()) r += term.c_xx(i) * j.K_xx;
        worst = std::max(worst, std::abs(r));
    }
    return worst;
}

} // namespace

TEST(Schedule, Examples) {
    TrainConfig cfg;
    EXPECT_EQ(lr_schedule(0, cfg), 1e-3);
    EXPECT_NEAR(lr_schedule(10, cfg), 8.1707280688754689e-4, 1e-18);
    cfg.gamma = 1.5;
    EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(Loss, ExactKernelAnnihilatesResidualAndSymmetry) {
    // 1/2 mean r^2 of the exact kernel's jets, away from t = 0
    for (const PdeProblem& p : {make_heat_problem(), make_diffusion_problem()}) {
        SamplerConfig s = small_sampler(p, 0, 400, 400, 1);
        s.t_floor = 0.05;
        const GspinnLoss loss(p, sample_batch(s), &p.invariant_generator());
        ASSERT_EQ(loss.terms().size(), 3u);
        for (std::size_t k = 1; k < 3; ++k) {
            const double r = max_exact_term_residual(p, loss.terms()[k]);
            EXPECT_LE(0.5 * r * r, 1e-12) << p.name << " " << loss.terms()[k].name;
        }
    }
}

TEST(Loss, VanillaWhenNoSymmetryPoints) {
    const PdeProblem heat = make_heat_problem();
    const MlpParams p = init_mlp({3, 12, 12, 1}, 3);
    const CollocationBatch b = sample_batch(small_sampler(heat, 50, 80, 0));
    const LossComponents vanilla = total_loss(p, b, heat, nullptr);
    const LossComponents with_gen = total_loss(p, b, heat, &heat.invariant_generator());
    EXPECT_EQ(vanilla.total, with_gen.total);
    EXPECT_EQ(vanilla.initial, with_gen.initial);
    EXPECT_TRUE(std::isnan(vanilla.symmetry));
    EXPECT_EQ(with_gen.symmetry, 0.0);
}

TEST(Loss, EmptyBatchIsZero) {
    const PdeProblem heat = make_heat_problem();
    const LossComponents c = total_loss(init_mlp({3, 8, 1}, 0), sample_batch(small_sampler(heat, 0, 0, 0)), heat, nullptr);
    EXPECT_EQ(c.total, 0.0);
}

TEST(Loss, SymmetryPointsRequireGenerator) {
    const PdeProblem heat = make_heat_problem();
    EXPECT_THROW(GspinnLoss(heat, sample_batch(small_sampler(heat, 5, 5, 5)), nullptr), UsageError);
}

TEST(Loss, ComponentsSumWithWeights) {
    const PdeProblem heat = make_heat_problem();
    const MlpParams p = init_mlp({3, 12, 12, 1}, 4);
    const CollocationBatch b = sample_batch(small_sampler(heat, 30, 40, 50));
    LossWeights w;
    w.initial = 2.0;
    w.residual = 0.5;
    w.symmetry = 3.0;
    const LossComponents c = total_loss(p, b, heat, &heat.invariant_generator(), w);
    EXPECT_NEAR(c.total, 2.0 * c.initial + 0.5 * c.residual + 3.0 * c.symmetry, 1e-14 * c.total);
    const LossComponents unit = total_loss(p, b, heat, &heat.invariant_generator());
    EXPECT_EQ(c.initial, unit.initial);
    EXPECT_EQ(c.symmetry, unit.symmetry);
}

TEST(Loss, InitialComponentMatchesDefinition) {
    const PdeProblem heat = make_heat_problem();
    const MlpParams p = init_mlp({3, 10, 1}, 5);
    const CollocationBatch b = sample_batch(small_sampler(heat, 25, 0, 0));
    double acc = 0.0;
    for (int i = 0; i < 25; ++i) {
        const double r = p.evaluate(0.0, b.initial(1, i), b.initial(2, i)) - b.initial_target(i);
        acc += r * r;
    }
    EXPECT_NEAR(total_loss(p, b, heat, nullptr).initial, 0.5 * acc / 25.0, 1e-12);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
    for (bool gs : {false, true}) {
        const PdeProblem heat = make_heat_problem();
        const MlpParams p0 = init_mlp({3, 8, 8, 1}, 6);
        const CollocationBatch b = sample_batch(small_sampler(heat, 10, 10, gs ? 10 : 0, 3));
        const GspinnLoss loss(heat, b, gs ? &heat.invariant_generator() : nullptr);
        Eigen::VectorXd grad;
        loss.evaluate(p0, grad);
        const CounterRng rng(21, Stream::test_cases);
        for (std::uint64_t k = 0; k < 15; ++k) {
            const Eigen::Index i = Eigen::Index(rng.bits(k) % std::uint64_t(p0.size()));
            const double g = fd::d1(
                [&](double v) {
                    MlpParams q = p0;
                    q.values()(i) = v;
                    return loss.evaluate(q).total;
                },
                p0.values()(i));
            EXPECT_LT(fd::rel_err(grad(i), g), 1e-4) << (gs ? "gspinn" : "pinn") << " coordinate " << i;
        }
    }
}

TEST(Loss, SupervisedTermAddsToTotal) {
    const PdeProblem heat = make_heat_problem();
    const MlpParams p = init_mlp({3, 8, 1}, 0);
    GspinnLoss loss(heat, sample_batch(small_sampler(heat, 5, 5, 0)), nullptr);
    const double before = loss.evaluate(p).total;
    PointMatrix pts(3, 1);
    pts << 0.5, 0.1, 0.2;
    const double v = p.evaluate(0.5, 0.1, 0.2);
    loss.add_supervised("data", pts, Eigen::VectorXd::Constant(1, v - 2.0), 1.5);
    EXPECT_NEAR(loss.evaluate(p).total, before + 1.5 * 0.5 * 4.0, 1e-12);
}

TEST(Mse, ZeroNetworkGivesMeanSquaredKernel) {
    const PdeProblem heat = make_heat_problem();
    const EvalGrid grid{3, 5, 5, 0.2};
    const PointMatrix pts = eval_points(heat, grid);
    ASSERT_EQ(pts.cols(), 75);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) acc += std::pow(heat.exact(pts(0, i), pts(1, i), pts(2, i)), 2);
    EXPECT_NEAR(evaluate_mse(MlpParams({3, 4, 1}), heat, grid), acc / 75.0, 1e-15);
    const double fresh = evaluate_mse(init_mlp({3, 20, 20, 1}, 1), heat);
    EXPECT_TRUE(std::isfinite(fresh));
    EXPECT_GT(fresh, 0.0);
}

TEST(Mse, DiffusionGridAvoidsBoundary) {
    const PointMatrix pts = eval_points(make_diffusion_problem());
    EXPECT_GE(pts.row(1).minCoeff(), 0.05);
    EXPECT_GE(pts.row(2).minCoeff(), 0.05);
    EXPECT_GE(pts.row(0).minCoeff(), 0.1);
}

namespace {

TrainConfig short_config() {
    TrainConfig cfg;
    cfg.adam_steps = 60;
    cfg.lbfgs_max_iters = 60;
    cfg.loops_per_iteration = 20;
    cfg.e_stop = -1.0;
    return cfg;
}

} // namespace

TEST(Train, ShortRunIsDeterministic) {
    const PdeProblem heat = make_heat_problem();
    const SamplerConfig s = small_sampler(heat, 40, 60, 60, 2);
    MlpParams a = init_mlp({3, 10, 10, 1}, 2), b = a;
    const TrainReport ra = train(a, heat, s, &heat.invariant_generator(), short_config());
    const TrainReport rb = train(b, heat, s, &heat.invariant_generator(), short_config());
    EXPECT_TRUE(a == b);
    EXPECT_EQ(ra.final_mse, rb.final_mse);
    ASSERT_EQ(ra.rows.size(), rb.rows.size());
    for (std::size_t i = 0; i < ra.rows.size(); ++i) EXPECT_EQ(ra.rows[i].loss_total, rb.rows[i].loss_total);
}

TEST(Train, LogLayoutAndMonotoneLbfgs) {
    const PdeProblem heat = make_heat_problem();
    MlpParams p = init_mlp({3, 10, 10, 1}, 3);
    const TrainReport r = train(p, heat, small_sampler(heat, 40, 60, 60, 3), &heat.invariant_generator(), short_config());
    EXPECT_EQ(r.adam_steps, 60);
    EXPECT_GT(r.lbfgs_iters, 0);
    ASSERT_GE(r.rows.size(), 5u);
    // Adam rows at 0, 20, 40 and the final iterate
    EXPECT_EQ(r.rows[0].iter, 0);
    EXPECT_EQ(r.rows[1].iter, 20);
    EXPECT_EQ(r.rows[3].iter, 60);
    EXPECT_EQ(r.rows[0].lr, 1e-3);
    EXPECT_NEAR(r.rows[2].lr, 0.98 * 0.98e-3, 1e-18);
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        EXPECT_GE(r.rows[i].iter, r.rows[i - 1].iter);
        EXPECT_GE(r.rows[i].elapsed_s, r.rows[i - 1].elapsed_s);
    }
    for (std::size_t i = 4; i < r.rows.size(); ++i) EXPECT_LE(r.rows[i].loss_total, r.rows[i - 1].loss_total);
    for (const auto& s : r.line_searches) EXPECT_LE(s.f, s.f0);
    EXPECT_EQ(r.rows.back().loss_total, r.final_loss.total);
    EXPECT_TRUE(std::isfinite(r.final_mse));
}

TEST(Train, PinnRowsHaveNoSymmetryColumn) {
    const PdeProblem heat = make_heat_problem();
    MlpParams p = init_mlp({3, 6, 1}, 0);
    TrainConfig cfg = short_config();
    cfg.lbfgs_max_iters = 0;
    const TrainReport r = train(p, heat, small_sampler(heat, 10, 10, 0), nullptr, cfg);
    for (const auto& row : r.rows) EXPECT_TRUE(std::isnan(row.loss_sym));
    EXPECT_EQ(r.lbfgs_iters, 0);
}

TEST(Train, EarlyStopSkipsLbfgs) {
    const PdeProblem heat = make_heat_problem();
    MlpParams p = init_mlp({3, 6, 1}, 0);
    TrainConfig cfg = short_config();
    cfg.e_stop = 1e9;
    const TrainReport r = train(p, heat, small_sampler(heat, 10, 10, 10), &heat.invariant_generator(), cfg);
    EXPECT_EQ(r.stop, StopReason::e_stop);
    EXPECT_EQ(r.adam_steps, 0);
    EXPECT_EQ(r.lbfgs_iters, 0);
}

TEST(Train, ResamplingChangesTrajectory) {
    const PdeProblem heat = make_heat_problem();
    SamplerConfig s = small_sampler(heat, 20, 30, 30, 4);
    TrainConfig cfg = short_config();
    cfg.lbfgs_max_iters = 0;
    MlpParams a = init_mlp({3, 8, 1}, 1), b = a;
    train(a, heat, s, &heat.invariant_generator(), cfg);
    s.resample_each_iteration = true;
    train(b, heat, s, &heat.invariant_generator(), cfg);
    EXPECT_FALSE(a == b);
}
