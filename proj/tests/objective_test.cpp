#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pglearn/error.hpp"
#include "pglearn/objective.hpp"
#include "support/oracles.hpp"

using namespace pglearn;

namespace {

Eigen::MatrixXd dense(const SparseMatrix &m) { return Eigen::MatrixXd(m); }

// Scatter an edge tensor column back into a dense n x n matrix.
Eigen::MatrixXd dense_slice(const SparseMatrix &pattern, const EdgeTensor &t, Index m) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(pattern.rows(), pattern.cols());
    Index e = 0;
    for (Index i = 0; i < pattern.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(pattern, i); it; ++it) out(i, it.col()) = t(e++, m);
    return out;
}

struct Fixture {
    oracle::Instance inst;
    SparseGraph graph;
    Eigen::MatrixXd y;
    std::vector<Index> validation;
};

Fixture make_fixture(std::uint64_t seed, Index n = 30, Index d = 5, int c = 3, int k = 5) {
    std::mt19937_64 rng(seed);
    Fixture f{oracle::random_instance(rng, n, d, c, k), {}, Eigen::MatrixXd::Zero(n, c), {}};
    f.graph = build_knn_graph(f.inst.x, {k, f.inst.a});
    for (Index i = 0; i < n; ++i) {
        if (i % 3 == 0) f.y(i, f.inst.labels[static_cast<std::size_t>(i)]) = 1.0;
        if (i % 3 == 1) f.validation.push_back(i);
    }
    return f;
}

}  // namespace

TEST(RankLoss, EqualScoresGiveLn2PerPair) {
    const std::vector<int> truth{0, 1, 1, 2};
    const std::vector<Index> val{0, 1, 2, 3};
    const RankLoss r = rank_loss(Eigen::MatrixXd::Constant(4, 3, 0.3), val, truth);
    // class 0: 1*3, class 1: 2*2, class 2: 1*3
    EXPECT_EQ(r.pair_count, 10);
    EXPECT_NEAR(r.value, 10 * std::log(2.0), 1e-14);
}

TEST(RankLoss, LargeMarginIsTiny) {
    const std::vector<int> truth{0, 1};
    const std::vector<Index> val{0, 1};
    Eigen::MatrixXd f(2, 2);
    f << 20, 0, 0, 20;
    const RankLoss r = rank_loss(f, val, truth);
    EXPECT_LE(r.value, r.pair_count * 2.1e-9);
    EXPECT_GT(r.value, 0.0);
}

TEST(RankLoss, HandExample) {
    Eigen::MatrixXd f(2, 2);
    f << 0.8, 0.2, 0.3, 0.7;
    const RankLoss r = rank_loss(f, std::vector<Index>{0, 1}, std::vector<int>{0, 1});
    EXPECT_EQ(r.pair_count, 2);
    EXPECT_NEAR(r.value, 2 * std::log1p(std::exp(-0.5)), 1e-15);
    EXPECT_NEAR(r.value, 0.948, 5e-4);
}

TEST(RankLoss, DegenerateValidationSet) {
    try {
        rank_loss(Eigen::MatrixXd::Ones(2, 2), std::vector<Index>{0, 1}, std::vector<int>{1, 1});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), "degenerate_validation_set");
    }
}

TEST(RankLoss, MatchesOracleAndStaysFiniteForHugeMargins) {
    const Fixture fx = make_fixture(1);
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, {}).F;
    EXPECT_NEAR(rank_loss(f, fx.validation, fx.inst.labels).value, oracle::rank_loss(f, fx.validation, fx.inst.labels),
                1e-10);
    EXPECT_TRUE(std::isfinite(neg_log_sigmoid(-1000.0)));
    EXPECT_NEAR(neg_log_sigmoid(-1000.0), 1000.0, 1e-9);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
}

TEST(Omega, HandValues) {
    Eigen::MatrixXd x(2, 2);
    x << 0, 0, 1, 2;
    const SparseGraph g = build_knn_graph(x, {1, Eigen::Vector2d(1, 0.25)});
    const EdgeTensor om = compute_omega(g.weights, delta_x_on_pattern(x, g.weights));
    const double w = std::exp(-2.0);
    EXPECT_NEAR(om(0, 0), -w, 1e-16);
    EXPECT_NEAR(om(0, 1), -4 * w, 1e-16);

    Eigen::MatrixXd same = Eigen::MatrixXd::Zero(2, 2);
    const SparseGraph g0 = build_knn_graph(same, {1, Eigen::Vector2d(1, 1)});
    EXPECT_EQ(compute_omega(g0.weights, delta_x_on_pattern(same, g0.weights)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Omega, FiniteDifferenceOfPairWeight) {
    std::mt19937_64 rng(4);
    const auto inst = oracle::random_instance(rng, 12, 4, 2, 3);
    const SparseGraph g = build_knn_graph(inst.x, {3, inst.a});
    const EdgeTensor om = compute_omega(g.weights, delta_x_on_pattern(inst.x, g.weights));
    Index e = 0;
    for (Index i = 0; i < g.weights.outerSize(); ++i)
        for (SparseMatrix::InnerIterator it(g.weights, i); it; ++it, ++e)
            for (Index m = 0; m < 4; ++m) {
                const double h = 1e-6 * std::max(inst.a(m), 1.0);
                Eigen::VectorXd ap = inst.a, am = inst.a;
                ap(m) += h;
                am(m) -= h;
                const double fd = (pair_weight(inst.x.row(i).transpose(), inst.x.row(it.col()).transpose(), ap) -
                                   pair_weight(inst.x.row(i).transpose(), inst.x.row(it.col()).transpose(), am)) /
                                  (2 * h);
                EXPECT_NEAR(om(e, m), fd, 1e-6 * std::max(std::abs(fd), 1e-3));
            }
}

TEST(GradP, PathGraphMatchesElementwise) {
    Eigen::MatrixXd x(3, 1);
    x << 0, 0.7, 1.9;
    const SparseGraph g = build_knn_graph(x, {1, Eigen::VectorXd::Constant(1, 0.8)});
    ASSERT_EQ(g.edge_count(), 4);
    const EdgeTensor dp = grad_P(g, compute_omega(g.weights, delta_x_on_pattern(x, g.weights)));
    const auto ref = oracle::dP_elementwise(x, dense(g.weights));
    EXPECT_LE((dense_slice(g.weights, dp, 0) - ref[0]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradP, DuplicatePointsContributeNothingFromOmega) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 2);
    const SparseGraph g = build_knn_graph(x, {3, Eigen::Vector2d::Zero()});
    const EdgeTensor dp = grad_P(g, compute_omega(g.weights, delta_x_on_pattern(x, g.weights)));
    EXPECT_EQ(dp.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GradP, MatchesFiniteDifferenceOfNormalize) {
    const Fixture fx = make_fixture(5, 25, 3, 2, 4);
    const EdgeTensor dp = grad_P(fx.graph, compute_omega(fx.graph.weights, delta_x_on_pattern(fx.inst.x, fx.graph.weights)));
    for (Index m = 0; m < 3; ++m) {
        const double h = 1e-6 * std::max(fx.inst.a(m), 1.0);
        Eigen::VectorXd ap = fx.inst.a, am = fx.inst.a;
        ap(m) += h;
        am(m) -= h;
        const Eigen::MatrixXd fd =
            (dense(reweight(fx.graph, fx.inst.x, ap).normalized) - dense(reweight(fx.graph, fx.inst.x, am).normalized)) /
            (2 * h);
        const Eigen::MatrixXd an = dense_slice(fx.graph.weights, dp, m);
        EXPECT_LE((an - fd).cwiseAbs().maxCoeff(), 1e-5 * std::max(an.cwiseAbs().maxCoeff(), 1e-8));
    }
}

TEST(GradF, ZeroForcingGivesZero) {
    const Fixture fx = make_fixture(6);
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, {}).F;
    const EdgeTensor zero = EdgeTensor::Zero(fx.graph.edge_count(), 5);
    const GradFResult r = grad_F(fx.graph.normalized, f, zero, {});
    ASSERT_EQ(r.dF.size(), 5u);
    for (const auto &m : r.dF) EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
}

TEST(GradF, MatchesDenseOracle) {
    const Fixture fx = make_fixture(7);
    const SolverOptions opts{0.99, 1e-12, 20000};
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, opts).F;
    const EdgeTensor dp = grad_P(fx.graph, compute_omega(fx.graph.weights, delta_x_on_pattern(fx.inst.x, fx.graph.weights)));
    const GradFResult r = grad_F(fx.graph.normalized, f, dp, opts, 2);
    EXPECT_TRUE(r.converged);
    const Eigen::MatrixXd w = dense(fx.graph.weights);
    for (Index m = 0; m < 5; ++m) {
        const Eigen::MatrixXd ref = oracle::dF(w, f, dense_slice(fx.graph.weights, dp, m), alpha_from_mu(0.99));
        EXPECT_LE((r.dF[static_cast<std::size_t>(m)] - ref).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(GradF, ThreadCountDoesNotChangeResult) {
    const Fixture fx = make_fixture(8);
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, {}).F;
    const EdgeTensor dp = grad_P(fx.graph, compute_omega(fx.graph.weights, delta_x_on_pattern(fx.inst.x, fx.graph.weights)));
    const GradFResult one = grad_F(fx.graph.normalized, f, dp, {}, 1);
    const GradFResult three = grad_F(fx.graph.normalized, f, dp, {}, 3);
    for (std::size_t m = 0; m < one.dF.size(); ++m) EXPECT_EQ(one.dF[m], three.dF[m]);
}

TEST(GradF, MatchesFiniteDifferenceOfSolve) {
    const Fixture fx = make_fixture(9);
    const SolverOptions opts{0.99, 1e-12, 20000};
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, opts).F;
    const EdgeTensor dp = grad_P(fx.graph, compute_omega(fx.graph.weights, delta_x_on_pattern(fx.inst.x, fx.graph.weights)));
    const GradFResult r = grad_F(fx.graph.normalized, f, dp, opts);
    for (Index m = 0; m < 5; ++m) {
        const double h = 1e-6 * std::max(fx.inst.a(m), 1.0);
        Eigen::VectorXd ap = fx.inst.a, am = fx.inst.a;
        ap(m) += h;
        am(m) -= h;
        const Eigen::MatrixXd fd = (lgc_power_solve(reweight(fx.graph, fx.inst.x, ap).normalized, fx.y, opts).F -
                                    lgc_power_solve(reweight(fx.graph, fx.inst.x, am).normalized, fx.y, opts).F) /
                                   (2 * h);
        const auto &an = r.dF[static_cast<std::size_t>(m)];
        EXPECT_LE((an - fd).cwiseAbs().maxCoeff(), 1e-4 * an.cwiseAbs().maxCoeff());
    }
}

TEST(GradLoss, ZeroDerivativesGiveZero) {
    const Fixture fx = make_fixture(10);
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, {}).F;
    std::vector<Eigen::MatrixXd> df(3, Eigen::MatrixXd::Zero(30, 3));
    EXPECT_EQ(grad_loss(f, df, fx.validation, fx.inst.labels), Eigen::VectorXd::Zero(3));
}

TEST(GradLoss, SinglePairWithEqualScores) {
    const Eigen::MatrixXd f = Eigen::MatrixXd::Zero(2, 2);
    // only class 0 has members, so only c' = 0 contributes one pair (0, 1)
    const std::vector<int> truth{0, 2};
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = 0.6;
    d(1, 0) = 0.2;
    const std::vector<Eigen::MatrixXd> df{d};
    const Eigen::VectorXd g = grad_loss(f, df, std::vector<Index>{0, 1}, truth);
    EXPECT_NEAR(g(0), -0.5 * (0.6 - 0.2), 1e-15);
}

TEST(GradLoss, MatchesOracleAssembly) {
    const Fixture fx = make_fixture(11);
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, {}).F;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    std::vector<Eigen::MatrixXd> df(4, Eigen::MatrixXd(30, 3));
    for (auto &m : df)
        for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    const Eigen::VectorXd g = grad_loss(f, df, fx.validation, fx.inst.labels);
    EXPECT_LE((g - oracle::rank_loss_grad(f, df, fx.validation, fx.inst.labels)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LossGradient, EndToEndFiniteDifference) {
    const Fixture fx = make_fixture(12);
    const SolverOptions opts{0.99, 1e-10, 50000};
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, opts).F;
    const GradientResult gr = loss_gradient(fx.inst.x, fx.graph, f, fx.validation, fx.inst.labels, opts);
    auto loss_at = [&](const Eigen::VectorXd &a) {
        const auto g = reweight(fx.graph, fx.inst.x, a);
        return rank_loss(lgc_power_solve(g.normalized, fx.y, opts).F, fx.validation, fx.inst.labels).value;
    };
    for (Index m = 0; m < 5; ++m) {
        const double h = 1e-6 * std::max(fx.inst.a(m), 1.0);
        Eigen::VectorXd ap = fx.inst.a, am = fx.inst.a;
        ap(m) += h;
        am(m) -= h;
        const double fd = (loss_at(ap) - loss_at(am)) / (2 * h);
        EXPECT_LE(std::abs(gr.gradient(m) - fd), 1e-4 * std::abs(fd)) << "dimension " << m;
    }
}

TEST(LossGradient, StatsWithinSparsityBound) {
    const Fixture fx = make_fixture(13, 60, 4, 3, 5);
    const auto f = lgc_power_solve(fx.graph.normalized, fx.y, {}).F;
    const GradientResult gr = loss_gradient(fx.inst.x, fx.graph, f, fx.validation, fx.inst.labels, {});
    EXPECT_EQ(gr.stats.edge_count, fx.graph.edge_count());
    EXPECT_EQ(gr.stats.tensor_entries, fx.graph.edge_count() * 4);
    EXPECT_LE(gr.stats.tensor_entries, 2 * 5 * 60 * 4);
    EXPECT_TRUE(gr.stats.df_converged);
}

TEST(LossGradient, SmallStepAlongNegativeGradientDescends) {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
        const Fixture fx = make_fixture(seed);
        const SolverOptions opts{0.99, 1e-10, 50000};
        const auto f = lgc_power_solve(fx.graph.normalized, fx.y, opts).F;
        const GradientResult gr = loss_gradient(fx.inst.x, fx.graph, f, fx.validation, fx.inst.labels, opts);
        const double base = rank_loss(f, fx.validation, fx.inst.labels).value;
        const Eigen::VectorXd dir = -gr.gradient / gr.gradient.cwiseAbs().maxCoeff();
        bool descended = false;
        for (double gamma = 0.05; gamma > 1e-8 && !descended; gamma /= 2) {
            const Eigen::VectorXd a = (fx.inst.a + gamma * fx.inst.a.maxCoeff() * dir).cwiseMax(1e-12);
            const auto g = reweight(fx.graph, fx.inst.x, a);
            descended = rank_loss(lgc_power_solve(g.normalized, fx.y, opts).F, fx.validation, fx.inst.labels).value < base;
        }
        EXPECT_TRUE(descended) << "seed " << seed;
    }
}
