#include "gspinn/problems.hpp"
#include "gspinn/sampling.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gspinn;

TEST(DeltaGaussian, PeakAndSymmetry) {
    EXPECT_NEAR(delta_gaussian(0.3, 0.3, 0.1), 3.9894228040143266, 1e-14);
    EXPECT_EQ(delta_gaussian(0.1, 0.5, 0.1), delta_gaussian(0.5, 0.1, 0.1));
    EXPECT_LT(delta_gaussian(0.0, 1.0, 0.1), 1e-20);
}

TEST(Sampling, HeatBatchStaysInBox) {
    const SamplerConfig cfg = SamplerConfig::for_problem(make_heat_problem(), 500, 10000, 10000, 3);
    const CollocationBatch b = sample_batch(cfg);
    ASSERT_EQ(b.initial.cols(), 500);
    ASSERT_EQ(b.residual.cols(), 10000);
    ASSERT_EQ(b.symmetry.cols(), 10000);
    for (const PointMatrix* m : {&b.residual, &b.symmetry}) {
        EXPECT_GT(m->row(0).minCoeff(), 0.0);
        EXPECT_LE(m->row(0).maxCoeff(), 1.0);
        EXPECT_GE(m->row(1).minCoeff(), -2.0);
        EXPECT_LT(m->row(1).maxCoeff(), 2.0);
        EXPECT_GE(m->row(2).minCoeff(), -2.0);
        EXPECT_LT(m->row(2).maxCoeff(), 2.0);
    }
    EXPECT_EQ(b.initial.row(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sampling, DiffusionRespectsFloors) {
    const PdeProblem d = make_diffusion_problem();
    const CollocationBatch b = sample_batch(SamplerConfig::for_problem(d, 500, 10000, 10000, 1));
    EXPECT_GT(b.residual.row(0).minCoeff(), 0.02);
    EXPECT_GE(b.residual.row(1).minCoeff(), 0.05);
    EXPECT_GE(b.residual.row(2).minCoeff(), 0.05);
    EXPECT_GE(b.initial.row(1).minCoeff(), 0.05);
    EXPECT_GE(b.initial.row(2).minCoeff(), 0.05);
}

TEST(Sampling, InitialTargetsAreGaussian) {
    SamplerConfig cfg = SamplerConfig::for_problem(make_heat_problem(), 200, 0, 0, 5);
    cfg.sigma = 0.2;
    const CollocationBatch b = sample_batch(cfg);
    for (int i = 0; i < 200; ++i)
        EXPECT_EQ(b.initial_target(i), delta_gaussian(b.initial(1, i), b.initial(2, i), 0.2));
}

TEST(Sampling, SameSeedIsBitwiseIdentical) {
    const SamplerConfig cfg = SamplerConfig::for_problem(make_heat_problem(), 100, 300, 300, 9);
    const CollocationBatch a = sample_batch(cfg), b = sample_batch(cfg);
    EXPECT_TRUE(a.initial == b.initial);
    EXPECT_TRUE(a.residual == b.residual);
    EXPECT_TRUE(a.symmetry == b.symmetry);
}

TEST(Sampling, StreamsSeedsAndEpochsDiffer) {
    SamplerConfig cfg = SamplerConfig::for_problem(make_heat_problem(), 100, 300, 300, 9);
    const CollocationBatch a = sample_batch(cfg);
    EXPECT_FALSE(a.residual == a.symmetry);
    EXPECT_FALSE(a.residual == sample_batch(cfg, 1).residual);
    cfg.seed = 10;
    EXPECT_FALSE(a.residual == sample_batch(cfg).residual);
}

TEST(Sampling, CountsAreIndependentPrefixes) {
    // a point's coordinates depend only on its index
    const PdeProblem heat = make_heat_problem();
    const PointMatrix small = sample_residual(SamplerConfig::for_problem(heat, 0, 50, 0, 2));
    const PointMatrix big = sample_residual(SamplerConfig::for_problem(heat, 0, 500, 0, 2));
    EXPECT_TRUE(small == big.leftCols(50));
}

TEST(Sampling, MeanTimeIsHalf) {
    const PointMatrix r = sample_residual(SamplerConfig::for_problem(make_heat_problem(), 0, 10000, 0, 4));
    EXPECT_NEAR(r.row(0).mean(), 0.5, 0.01);
    EXPECT_NEAR(r.row(1).mean(), 0.0, 0.05);
}

TEST(Sampling, EmptyTermsAllowed) {
    const CollocationBatch b = sample_batch(SamplerConfig::for_problem(make_heat_problem(), 0, 10, 0, 0));
    EXPECT_EQ(b.initial.cols(), 0);
    EXPECT_EQ(b.initial_target.size(), 0);
    EXPECT_EQ(b.symmetry.cols(), 0);
}

TEST(Sampling, InvalidConfigurations) {
    SamplerConfig cfg = SamplerConfig::for_problem(make_heat_problem(), 10, 10, 10);
    cfg.sigma = 0.0;
    EXPECT_THROW(sample_batch(cfg), UsageError);
    cfg.sigma = 0.1;
    cfg.n_residual = -1;
    EXPECT_THROW(sample_batch(cfg), UsageError);
    cfg.n_residual = 10;
    cfg.t_floor = 1.0;
    EXPECT_THROW(sample_batch(cfg), UsageError);
}
