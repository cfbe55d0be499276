#include "fd.hpp"
#include "gspinn/autodiff.hpp"
#include "gspinn/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace gspinn;

namespace {

// Finite-difference jets of a plain forward pass.
KernelJet fd_jets(const MlpParams& p, double t, double x, double y) {
    KernelJet j;
    j.K = p.evaluate(t, x, y);
    j.K_t = fd::d1([&](double s) { return p.evaluate(s, x, y); }, t);
    j.K_x = fd::d1([&](double s) { return p.evaluate(t, s, y); }, x);
    j.K_xx = fd::d2([&](double s) { return p.evaluate(t, s, y); }, x);
    return j;
}

LinearJetTerm random_term(const std::string& name, int n, std::uint64_t seed, bool with_t, bool with_x, bool with_xx) {
    const CounterRng rng(seed, Stream::test_cases);
    LinearJetTerm term;
    term.name = name;
    term.points.resize(3, n);
    term.c_value.resize(n);
    term.target.resize(n);
    if (with_t) term.c_t.resize(n);
    if (with_x) term.c_x.resize(n);
    if (with_xx) term.c_xx.resize(n);
    for (int i = 0; i < n; ++i) {
        term.points.col(i) << rng.uniform(0.05, 1.0, i, 0), rng.uniform(-2.0, 2.0, i, 1), rng.uniform(-2.0, 2.0, i, 2);
        term.c_value(i) = rng.uniform(-1.0, 1.0, i, 3);
        term.target(i) = rng.uniform(-1.0, 1.0, i, 4);
        if (with_t) term.c_t(i) = rng.uniform(-1.0, 1.0, i, 5);
        if (with_x) term.c_x(i) = rng.uniform(-1.0, 1.0, i, 6);
        if (with_xx) term.c_xx(i) = rng.uniform(-1.0, 1.0, i, 7);
    }
    return term;
}

} // namespace

TEST(ForwardJets, ZeroNetworkGivesZeroJets) {
    const MlpParams p({3, 16, 16, 1});
    const KernelJet j = forward_jets(p, 0.5, 0.3, -0.1);
    EXPECT_EQ(j.K, 0.0);
    EXPECT_EQ(j.K_t, 0.0);
    EXPECT_EQ(j.K_x, 0.0);
    EXPECT_EQ(j.K_xx, 0.0);
}

TEST(ForwardJets, AffineNetwork) {
    MlpParams p({3, 1});
    p.weight(0) << 0.7, -1.3, 2.1;
    p.bias(0) << 0.4;
    const KernelJet j = forward_jets(p, 0.5, 0.3, -0.1);
    EXPECT_DOUBLE_EQ(j.K, 0.7 * 0.5 - 1.3 * 0.3 - 2.1 * 0.1 + 0.4);
    EXPECT_EQ(j.K_t, 0.7);
    EXPECT_EQ(j.K_x, -1.3);
    EXPECT_EQ(j.K_xx, 0.0);
}

TEST(ForwardJets, RandomTanhNetworkMatchesFiniteDifferences) {
    const MlpParams p = init_mlp({3, 16, 16, 1}, 0);
    const KernelJet j = forward_jets(p, 0.5, 0.3, -0.1);
    const KernelJet f = fd_jets(p, 0.5, 0.3, -0.1);
    EXPECT_NEAR(j.K, f.K, 1e-14);
    EXPECT_LT(fd::rel_err(j.K_t, f.K_t), 1e-5);
    EXPECT_LT(fd::rel_err(j.K_x, f.K_x), 1e-5);
    EXPECT_LT(fd::rel_err(j.K_xx, f.K_xx), 1e-5);
}

TEST(ForwardJets, HundredRandomNetworksAndPoints) {
    const CounterRng rng(42, Stream::test_cases);
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        const int w = 4 + int(rng.bits(k, 0) % 29);
        const MlpParams p = init_mlp({3, w, w, 1}, k);
        const double t = rng.uniform(0.0, 1.0, k, 1), x = rng.uniform(-2.0, 2.0, k, 2), y = rng.uniform(-2.0, 2.0, k, 3);
        const KernelJet j = forward_jets(p, t, x, y);
        const KernelJet f = fd_jets(p, t, x, y);
        worst = std::max({worst, fd::rel_err(j.K_t, f.K_t), fd::rel_err(j.K_x, f.K_x), fd::rel_err(j.K_xx, f.K_xx)});
    }
    EXPECT_LE(worst, 1e-5);
}

TEST(ForwardJets, BatchedTapeMatchesPointwise) {
    const MlpParams p = init_mlp({3, 12, 9, 1}, 2);
    PointMatrix pts(3, 5);
    pts << 0.1, 0.2, 0.3, 0.4, 0.9, -1.0, 0.5, 1.5, -0.2, 0.0, 0.3, -0.3, 1.1, 2.0, -2.0;
    ChannelSet all;
    all.t = all.x = all.xx = true;
    const JetTape tape(p, pts, all);
    for (int i = 0; i < 5; ++i) {
        const KernelJet a = tape.jet(i);
        const KernelJet b = forward_jets(p, pts(0, i), pts(1, i), pts(2, i));
        EXPECT_EQ(a.K, b.K);
        EXPECT_EQ(a.K_t, b.K_t);
        EXPECT_EQ(a.K_xx, b.K_xx);
        EXPECT_NEAR(a.K, p.evaluate(pts(0, i), pts(1, i), pts(2, i)), 1e-14);
    }
}

TEST(ForwardJets, OverflowReportsLayer) {
    MlpParams p = init_mlp({3, 4, 4, 1}, 0);
    p.weight(1).setConstant(std::numeric_limits<double>::infinity());
    try {
        forward_jets(p, 0.5, 0.1, 0.2);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_EQ(e.where(), 1);
    }
}

TEST(LossGradient, ZeroNetworkIsStationaryInOutputBias) {
    const MlpParams p({3, 8, 1});
    LinearJetTerm term{"k2", PointMatrix::Constant(3, 1, 0.3), Eigen::VectorXd::Ones(1), {}, {}, {}, {}, 1.0};
    const LossEvaluation ev = loss_gradient(p, {term});
    const Eigen::Index bias_out = p.size() - 1;
    EXPECT_EQ(ev.grad(bias_out), 0.0);
    EXPECT_EQ(ev.total, 0.0);
}

TEST(LossGradient, ConstantNetworkScalarQuadratic) {
    // K = c; loss = (K - 1)^2 = 2 * (1/2 mean r^2) with one point
    MlpParams p({3, 1});
    const double c = 2.5;
    p.bias(0) << c;
    LinearJetTerm term{"q", PointMatrix::Zero(3, 1), Eigen::VectorXd::Ones(1), {}, {}, {}, Eigen::VectorXd::Ones(1), 2.0};
    const LossEvaluation ev = loss_gradient(p, {term});
    EXPECT_DOUBLE_EQ(ev.total, (c - 1) * (c - 1));
    EXPECT_DOUBLE_EQ(ev.grad(p.size() - 1), 2 * (c - 1));
}

TEST(LossGradient, MatchesFiniteDifferencesInRandomCoordinates) {
    const MlpParams p0 = init_mlp({3, 10, 10, 1}, 9);
    const std::vector<LinearJetTerm> terms = {random_term("a", 10, 1, false, false, false),
                                              random_term("b", 10, 2, true, true, true),
                                              random_term("c", 10, 3, true, true, false)};
    const LossEvaluation ev = loss_gradient(p0, terms);
    const CounterRng rng(5, Stream::test_cases);
    for (std::uint64_t k = 0; k < 20; ++k) {
        const Eigen::Index i = Eigen::Index(rng.bits(k, 0) % std::uint64_t(p0.size()));
        auto f = [&](double v) {
            MlpParams q = p0;
            q.values()(i) = v;
            return loss_gradient(q, terms, false).total;
        };
        const double g = fd::d1(f, p0.values()(i));
        EXPECT_LT(fd::rel_err(ev.grad(i), g), 1e-4) << "coordinate " << i;
    }
}

TEST(LossGradient, ComponentsIndependentOfGradientRequest) {
    const MlpParams p = init_mlp({3, 10, 10, 1}, 4);
    const std::vector<LinearJetTerm> terms = {random_term("a", 300, 1, true, true, true), random_term("b", 7, 2, true, false, false)};
    const LossEvaluation with = loss_gradient(p, terms, true);
    const LossEvaluation without = loss_gradient(p, terms, false);
    ASSERT_EQ(with.components.size(), without.components.size());
    for (std::size_t i = 0; i < with.components.size(); ++i) EXPECT_EQ(with.components[i], without.components[i]);
    EXPECT_EQ(with.total, without.total);
    EXPECT_EQ(without.grad.size(), 0);
}

TEST(LossGradient, LinearInWeights) {
    const MlpParams p = init_mlp({3, 10, 1}, 4);
    LinearJetTerm a = random_term("a", 40, 1, true, true, true);
    const LossEvaluation one = loss_gradient(p, {a});
    a.weight = 2.0;
    const LossEvaluation two = loss_gradient(p, {a});
    EXPECT_EQ(two.total, 2.0 * one.total);
    EXPECT_TRUE(two.grad == 2.0 * one.grad);
}

TEST(LossGradient, DeterministicBitwise) {
    const MlpParams p = init_mlp({3, 20, 20, 1}, 8);
    const std::vector<LinearJetTerm> terms = {random_term("a", 600, 1, true, true, true)};
    const LossEvaluation a = loss_gradient(p, terms);
    const LossEvaluation b = loss_gradient(p, terms);
    EXPECT_EQ(a.total, b.total);
    EXPECT_TRUE(a.grad == b.grad);
}

TEST(LossGradient, NonFiniteResidualNamesTermAndPoint) {
    const MlpParams p = init_mlp({3, 4, 1}, 0);
    LinearJetTerm a = random_term("initial", 300, 1, false, false, false);
    a.target(277) = std::numeric_limits<double>::quiet_NaN();
    try {
        loss_gradient(p, {a});
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_EQ(e.where(), 277);
        EXPECT_EQ(e.term(), "initial");
    }
}

TEST(LossGradient, EmptyTermContributesZero) {
    const MlpParams p = init_mlp({3, 4, 1}, 0);
    LinearJetTerm empty;
    empty.name = "empty";
    const LossEvaluation ev = loss_gradient(p, {empty});
    EXPECT_EQ(ev.total, 0.0);
    EXPECT_EQ(ev.grad.norm(), 0.0);
}

TEST(LossGradient, MismatchedCoefficientLengthRejected) {
    const MlpParams p = init_mlp({3, 4, 1}, 0);
    LinearJetTerm a = random_term("a", 5, 1, true, false, false);
    a.c_t.resize(3);
    EXPECT_THROW(loss_gradient(p, {a}), UsageError);
}
