#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "ar_oracle.hpp"
#include "neutrosim/motion_ar.hpp"

using namespace neutrosim;
using namespace neutrosim::motion;

namespace {

Trajectory make_traj(std::string id, std::vector<Point2> pts, Condition c = Condition::Normal) {
    Trajectory t;
    t.cell_id = std::move(id);
    t.condition = c;
    t.points = std::move(pts);
    return t;
}

MatrixXd random_matrix(int r, int c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = n(rng);
    return m;
}

ObservationMatrix centered(const MatrixXd& Y) {
    ObservationMatrix obs;
    obs.mean = Y.rowwise().mean();
    obs.Y = Y.colwise() - obs.mean;
    obs.cells = static_cast<std::size_t>(Y.rows() / 2);
    return obs;
}

double max_coef_error(const std::vector<MatrixXd>& a, const std::vector<MatrixXd>& b) {
    double e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, (a[i] - b[i]).cwiseAbs().maxCoeff());
    return e;
}

}  // namespace

TEST(Pool, StationaryTrajectoryCentersToZero) {
    auto obs = pool_trajectories({make_traj("a", {{5, 7}, {5, 7}, {5, 7}})}, Condition::Normal);
    EXPECT_EQ(obs.Y.rows(), 2);
    EXPECT_EQ(obs.Y.cols(), 3);
    EXPECT_EQ(obs.Y.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Pool, SingleTrajectoryRowsAreCenteredDisplacements) {
    auto obs = pool_trajectories({make_traj("a", {{1, 1}, {2, 3}, {4, 2}})}, Condition::Normal);
    // displacements x: 0 1 3 (mean 4/3), y: 0 2 1 (mean 1)
    EXPECT_NEAR(obs.mean(0), 4.0 / 3, 1e-15);
    EXPECT_NEAR(obs.mean(1), 1.0, 1e-15);
    EXPECT_NEAR(obs.Y(0, 2), 3 - 4.0 / 3, 1e-15);
    EXPECT_NEAR(obs.Y(1, 1), 1.0, 1e-15);
    EXPECT_LT(obs.Y.rowwise().mean().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pool, DuplicateTrajectoriesGiveDuplicateBlocks) {
    auto t = make_traj("a", {{0, 0}, {1, 2}, {3, 1}, {2, 2}});
    auto u = t;
    u.cell_id = "b";
    auto obs = pool_trajectories({t, u}, Condition::Normal);
    EXPECT_EQ(obs.Y.rows(), 4);
    EXPECT_EQ(obs.Y.topRows(2), obs.Y.bottomRows(2));
}

TEST(Pool, TranslationInvariantTruncatesAndFiltersCondition) {
    auto a = make_traj("a", {{0, 0}, {1, 0}, {2, 1}, {9, 9}});
    auto b = make_traj("b", {{100, 50}, {101, 50}, {102, 51}});
    auto c = make_traj("c", {{0, 0}, {5, 5}}, Condition::Inhibited);
    auto obs = pool_trajectories({a, b, c}, Condition::Normal);
    EXPECT_EQ(obs.Y.cols(), 3);
    EXPECT_EQ(obs.cells, 2u);
    EXPECT_EQ(obs.Y.topRows(2), obs.Y.bottomRows(2));
}

TEST(Pool, Errors) {
    EXPECT_THROW(pool_trajectories({}, Condition::Normal), InvalidArgument);
    auto c = make_traj("c", {{0, 0}, {5, 5}}, Condition::Inhibited);
    EXPECT_THROW(pool_trajectories({c}, Condition::Normal), InvalidArgument);
    EXPECT_THROW(pool_trajectories({c}, Condition::Inhibited, 3), InvalidArgument);
}

TEST(Subspace, RankOneCapturesAllEnergy) {
    std::mt19937_64 rng(1);
    MatrixXd Y = random_matrix(5, 1, rng) * random_matrix(1, 30, rng);
    auto s = fit_subspace(Y, 1);
    EXPECT_LT(s.singular_values(1), 1e-12 * s.singular_values(0));
    EXPECT_LT((Y - s.C * s.C.transpose() * Y).norm(), 1e-10 * Y.norm());
}

TEST(Subspace, FullRankRoundTripAndOrthonormality) {
    std::mt19937_64 rng(2);
    for (auto [p, T] : {std::pair{6, 50}, {8, 5}, {3, 3}}) {
        MatrixXd Y = random_matrix(p, T, rng);
        const std::size_t q = static_cast<std::size_t>(std::min(p, T));
        auto s = fit_subspace(Y, q);
        EXPECT_LE((Y - s.C * s.C.transpose() * Y).norm(), 1e-8);
        EXPECT_LE((s.C.transpose() * s.C - MatrixXd::Identity(q, q)).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Subspace, SingularValuesMatchEigensolverOracle) {
    std::mt19937_64 rng(3);
    MatrixXd Y = random_matrix(6, 50, rng);
    auto s = fit_subspace(Y, 3);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Y * Y.transpose());
    VectorXd ev = eig.eigenvalues().reverse();  // ascending -> descending
    ASSERT_EQ(s.singular_values.size(), 6);
    for (int i = 0; i < 6; ++i) {
        EXPECT_NEAR(s.singular_values(i) * s.singular_values(i), ev(i), 1e-8 * std::max(1.0, ev(0)));
        if (i > 0) {
            EXPECT_LE(s.singular_values(i), s.singular_values(i - 1));
        }
    }
    // Columns are eigenvectors of Y Y^T with the documented sign.
    for (int j = 0; j < 3; ++j) {
        VectorXd v = eig.eigenvectors().col(5 - j);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        EXPECT_LT((v - s.C.col(j)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Subspace, Errors) {
    MatrixXd Y = MatrixXd::Ones(3, 4);
    EXPECT_THROW(fit_subspace(Y, 0), InvalidArgument);
    EXPECT_THROW(fit_subspace(Y, 4), InvalidArgument);
    Y(0, 0) = std::nan("");
    EXPECT_THROW(fit_subspace(Y, 1), NumericError);
}

TEST(EncodeDecode, ProjectionProperties) {
    std::mt19937_64 rng(4);
    MatrixXd C = ar_oracle::orthonormal(6, 2, rng);
    VectorXd mean = random_matrix(6, 1, rng);
    // In span: exact round trip.
    MatrixXd Yin = (C * random_matrix(2, 20, rng)).colwise() + mean;
    EXPECT_LT((decode(encode(Yin, C, mean), C, mean) - Yin).cwiseAbs().maxCoeff(), 1e-10);
    // General: residual orthogonal to span(C), idempotent.
    MatrixXd Y = random_matrix(6, 20, rng);
    MatrixXd Yh = decode(encode(Y, C, mean), C, mean);
    EXPECT_LT((C.transpose() * (Y - Yh)).norm(), 1e-10);
    MatrixXd Yhh = decode(encode(Yh, C, mean), C, mean);
    EXPECT_LT((Yhh - Yh).cwiseAbs().maxCoeff(), 1e-10);
    // Full square orthonormal C: perfect round trip.
    MatrixXd Q = ar_oracle::orthonormal(6, 6, rng);
    EXPECT_LT((decode(encode(Y, Q, mean), Q, mean) - Y).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EncodeDecode, DimensionMismatch) {
    MatrixXd C = MatrixXd::Identity(4, 2);
    EXPECT_THROW(encode(MatrixXd::Zero(3, 5), C, VectorXd::Zero(3)), InvalidArgument);
    EXPECT_THROW(decode(MatrixXd::Zero(3, 5), C, VectorXd::Zero(4)), InvalidArgument);
}

TEST(FitAr, ConstantSequenceGivesIdentity) {
    MatrixXd X = MatrixXd::Constant(1, 10, 2.5);
    auto fit = fit_ar(X, 1);
    EXPECT_NEAR(fit.B[0](0, 0), 1.0, 1e-12);
    EXPECT_NEAR(fit.residual_cov(0, 0), 0.0, 1e-20);
}

TEST(FitAr, ScalarAr1) {
    MatrixXd X(1, 30);
    X(0, 0) = 1;
    for (int t = 1; t < 30; ++t) X(0, t) = 0.5 * X(0, t - 1);
    EXPECT_NEAR(fit_ar(X, 1).B[0](0, 0), 0.5, 1e-10);
}

TEST(FitAr, ScalarAr2AndOverfitOrder) {
    MatrixXd X(1, 60);
    X(0, 0) = 1;
    X(0, 1) = 0.3;
    for (int t = 2; t < 60; ++t) X(0, t) = 1.5 * X(0, t - 1) - 0.56 * X(0, t - 2);
    auto fit = fit_ar(X, 2);
    EXPECT_NEAR(fit.B[0](0, 0), 1.5, 1e-8);
    EXPECT_NEAR(fit.B[1](0, 0), -0.56, 1e-8);
    // Order 3 on a noiseless order-2 process: lag 3 is linearly dependent on
    // the first two, so it is dropped.
    auto fit3 = fit_ar(X, 3);
    EXPECT_FALSE(fit3.ridge);
    EXPECT_EQ(fit3.active_order, 2u);
    EXPECT_NEAR(fit3.B[0](0, 0), 1.5, 1e-8);
    EXPECT_NEAR(fit3.B[1](0, 0), -0.56, 1e-8);
    EXPECT_EQ(fit3.B[2](0, 0), 0.0);
}

TEST(FitAr, RecoversRandomStableSystems) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const int q = 1 + trial % 4;
        const int d = 1 + (trial / 4) % 3;
        auto B = ar_oracle::stable_coefficients(q, d, 0.9, rng);
        auto X = ar_oracle::simulate(B, q * d + 40, 0.0, rng);
        auto fit = fit_ar(X, static_cast<std::size_t>(d));
        EXPECT_FALSE(fit.ridge);
        EXPECT_LT(max_coef_error(fit.B, B), 1e-8) << "q=" << q << " d=" << d;
        EXPECT_LT(fit.residual_cov.cwiseAbs().maxCoeff(), 1e-16);
    }
}

TEST(FitAr, ResidualCovarianceIsEmpiricalAndPsd) {
    std::mt19937_64 rng(6);
    auto B = ar_oracle::stable_coefficients(3, 2, 0.8, rng);
    auto X = ar_oracle::simulate(B, 4000, 0.5, rng);
    auto fit = fit_ar(X, 2);
    EXPECT_LT(max_coef_error(fit.B, B), 0.05);
    EXPECT_NEAR(fit.residual_cov(0, 0), 0.25, 0.03);
    EXPECT_EQ(fit.residual_cov, fit.residual_cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(fit.residual_cov);
    EXPECT_GE(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(FitAr, RidgeWhenEvenOneLagIsSingular) {
    // Constant 2-vector: the single-lag regressor has rank 1 < q.
    MatrixXd X(2, 12);
    X.row(0).setConstant(1.0);
    X.row(1).setConstant(2.0);
    auto fit = fit_ar(X, 1);
    EXPECT_TRUE(fit.ridge);
    EXPECT_LT((fit.B[0] * X.col(0) - X.col(0)).norm(), 1e-6);
}

TEST(FitAr, InsufficientData) {
    EXPECT_THROW(fit_ar(MatrixXd::Zero(2, 4), 2), InvalidArgument);  // needs T >= 5
    EXPECT_NO_THROW(fit_ar(MatrixXd::Ones(1, 3), 2));
    EXPECT_THROW(fit_ar(MatrixXd::Zero(2, 10), 0), InvalidArgument);
}

TEST(GridSearch, SelectsPlantedModel) {
    int hits = 0;
    for (int trial = 0; trial < 5; ++trial) {
        std::mt19937_64 rng(100 + trial);
        auto B = ar_oracle::stable_coefficients(3, 2, 0.95, rng);
        auto X = ar_oracle::simulate(B, 1000, 0.1, rng);
        auto Y = ar_oracle::observe(ar_oracle::orthonormal(20, 3, rng), X, 0.01, rng);
        auto r = grid_search(centered(Y));
        hits += r.q == 3 && r.d == 2;
    }
    EXPECT_GE(hits, 4);
}

TEST(GridSearch, DefaultRangesAndTrainScoreMonotoneInQ) {
    std::mt19937_64 rng(7);
    auto B = ar_oracle::stable_coefficients(3, 2, 0.9, rng);
    auto X = ar_oracle::simulate(B, 300, 0.2, rng);
    auto Y = ar_oracle::observe(ar_oracle::orthonormal(12, 3, rng), X, 0.05, rng);
    auto r = grid_search(centered(Y));
    ASSERT_EQ(r.cells.size(), 90u);
    EXPECT_EQ(r.cells.front().q, 2u);
    EXPECT_EQ(r.cells.front().d, 1u);
    EXPECT_EQ(r.cells.back().q, 10u);
    EXPECT_EQ(r.cells.back().d, 10u);
    for (std::size_t d = 1; d <= 10; ++d)
        for (std::size_t q = 3; q <= 10; ++q) {
            const auto& lo = r.cells[(q - 3) * 10 + d - 1];
            const auto& hi = r.cells[(q - 2) * 10 + d - 1];
            ASSERT_TRUE(lo.ok && hi.ok);
            EXPECT_LE(hi.train_score, lo.train_score * (1 + 1e-12)) << "q=" << q << " d=" << d;
        }
    EXPECT_EQ(r.model.q, r.q);
    EXPECT_EQ(r.model.states.cols(), 300);
}

TEST(GridSearch, TiesGoToSmallerQ) {
    // A rotation by 2pi/16 over whole periods: the training prefix is already
    // centered, every cell reproduces the data to round-off and all tie.
    MatrixXd X(2, 80);
    const double w = 2 * M_PI / 16;
    for (int t = 0; t < 80; ++t) {
        X(0, t) = std::cos(w * t);
        X(1, t) = std::sin(w * t);
    }
    std::mt19937_64 rng(8);
    MatrixXd Y = ar_oracle::orthonormal(6, 2, rng) * X;
    auto r = grid_search(centered(Y), {2, 4}, {1, 3}, 0.8, 0.0);
    EXPECT_EQ(r.q, 2u);
    EXPECT_EQ(r.d, 1u);
}

TEST(GridSearch, AllCellsFailing) {
    MatrixXd Y = MatrixXd::Random(4, 6);
    EXPECT_THROW(grid_search(centered(Y), {5, 6}, {1, 2}), InvalidArgument);
    EXPECT_THROW(grid_search(centered(Y), {3, 2}, {1, 2}), InvalidArgument);
}

namespace {

ARModel planted_model(std::mt19937_64& rng, int q = 3, int d = 2, int p = 8) {
    ARModel m;
    m.q = static_cast<std::size_t>(q);
    m.d = static_cast<std::size_t>(d);
    m.B = ar_oracle::stable_coefficients(q, d, 0.9, rng);
    m.C = ar_oracle::orthonormal(p, q, rng);
    m.mean = random_matrix(p, 1, rng);
    MatrixXd L = random_matrix(q, q, rng);
    m.state_cov = L * L.transpose();
    m.obs_var = VectorXd::Zero(p);
    m.states = random_matrix(q, 30, rng);
    return m;
}

// The AR recursion evaluated term by term.
MatrixXd brute_force(const ARModel& m, const MatrixXd& seed, int n) {
    const int q = int(m.q), d = int(m.d);
    MatrixXd X = MatrixXd::Zero(q, n);
    for (int t = 0; t < n; ++t) {
        if (t < d) {
            X.col(t) = seed.col(t);
            continue;
        }
        for (int r = 0; r < q; ++r) {
            double s = 0.0;
            for (int i = 1; i <= d; ++i)
                for (int c = 0; c < q; ++c) s += m.B[std::size_t(i - 1)](r, c) * X(c, t - i);
            X(r, t) = s;
        }
    }
    return X;
}

}  // namespace

TEST(Synthesize, EmptyAndFixedPoint) {
    std::mt19937_64 rng(9);
    ARModel m = planted_model(rng, 2, 1);
    EXPECT_EQ(synthesize_states(m, 0, std::nullopt, rng).cols(), 0);
    m.B[0] = MatrixXd::Identity(2, 2);
    MatrixXd seed(2, 1);
    seed << 0.3, -1.2;
    MatrixXd X = synthesize_states(m, 25, seed, rng, 0.0);
    for (int t = 0; t < 25; ++t) EXPECT_EQ(X.col(t), seed.col(0));
}

TEST(Synthesize, NoiselessMatchesBruteForceBitwise) {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        ARModel m = planted_model(rng, 1 + trial % 4, 1 + trial % 3);
        MatrixXd seed = random_matrix(int(m.q), int(m.d), rng);
        MatrixXd X = synthesize_states(m, 200, seed, rng, 0.0);
        MatrixXd ref = brute_force(m, seed, 200);
        EXPECT_EQ(0, std::memcmp(X.data(), ref.data(), sizeof(double) * std::size_t(X.size())));
    }
}

TEST(Synthesize, DefaultSeedIsWindowOfFittedStates) {
    std::mt19937_64 rng(11);
    ARModel m = planted_model(rng);
    std::mt19937_64 a(5), b(5);
    MatrixXd X = synthesize_states(m, 40, std::nullopt, a);
    EXPECT_EQ(X, synthesize_states(m, 40, std::nullopt, b));
    bool found = false;
    for (Eigen::Index s = 0; s + 2 <= m.states.cols(); ++s)
        found |= m.states.middleCols(s, 2) == X.leftCols(2);
    EXPECT_TRUE(found);
}

TEST(Synthesize, NoiseHasModelCovariance) {
    std::mt19937_64 rng(12);
    ARModel m = planted_model(rng, 2, 1);
    for (auto& b : m.B) b.setZero();
    MatrixXd X = synthesize_states(m, 20001, MatrixXd::Zero(2, 1), rng, 2.0);
    MatrixXd V = X.rightCols(20000);
    MatrixXd cov = V * V.transpose() / 20000.0;
    EXPECT_LT((cov - 4.0 * m.state_cov).cwiseAbs().maxCoeff(), 0.1 * m.state_cov.cwiseAbs().maxCoeff() * 4);
}

TEST(Synthesize, Errors) {
    std::mt19937_64 rng(13);
    ARModel m = planted_model(rng);
    EXPECT_THROW(synthesize_states(m, 10, MatrixXd::Zero(3, 1), rng), InvalidArgument);
    ARModel bad = m;
    bad.state_cov = -MatrixXd::Identity(3, 3);
    EXPECT_THROW(synthesize_states(bad, 10, std::nullopt, rng), NumericError);
    EXPECT_THROW(synthesize_states(ARModel{}, 10, std::nullopt, rng), InvalidArgument);
}

TEST(StatesToTrajectory, RoundTripAndNullState) {
    std::vector<Trajectory> trajs;
    std::mt19937_64 rng(14);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int c = 0; c < 4; ++c) {
        Trajectory t = make_traj("c" + std::to_string(c), {});
        Point2 p{10.0 * c, 5.0};
        for (int f = 0; f < 50; ++f) {
            t.points.push_back(p);
            p.x += n(rng);
            p.y += n(rng);
        }
        trajs.push_back(t);
    }
    auto obs = pool_trajectories(trajs, Condition::Normal);
    ARModel m = fit_model(obs, 3, 2);
    std::vector<Point2> origins;
    for (auto& t : trajs) origins.push_back(t.points.front());
    auto back = states_to_trajectory(m.states, m, origins);
    MatrixXd proj = m.C * m.states;
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t f = 0; f < 50; ++f) {
            EXPECT_NEAR(back[c].points[f].x, origins[c].x + m.mean(2 * c) + proj(2 * c, f), 1e-8);
            EXPECT_NEAR(back[c].points[f].y, origins[c].y + m.mean(2 * c + 1) + proj(2 * c + 1, f), 1e-8);
        }
    auto still = states_to_trajectory(MatrixXd::Zero(3, 7), m, {{1, 2}});
    for (std::size_t c = 0; c < 4; ++c)
        for (const Point2& p : still[c].points) {
            EXPECT_EQ(p.x, 1 + m.mean(2 * c));
            EXPECT_EQ(p.y, 2 + m.mean(2 * c + 1));
        }
    EXPECT_THROW(states_to_trajectory(MatrixXd::Zero(2, 7), m, {{0, 0}}), InvalidArgument);
    EXPECT_THROW(states_to_trajectory(MatrixXd::Zero(3, 7), m, {{0, 0}, {1, 1}}), InvalidArgument);
}

namespace {

std::vector<double> step_lengths(const std::vector<Trajectory>& ts) {
    std::vector<double> out;
    for (const auto& t : ts)
        for (std::size_t i = 1; i < t.size(); ++i)
            out.push_back(std::hypot(t.points[i].x - t.points[i - 1].x, t.points[i].y - t.points[i - 1].y));
    std::sort(out.begin(), out.end());
    return out;
}

double quantile(const std::vector<double>& s, double p) { return s[std::size_t(p * double(s.size() - 1))]; }

}  // namespace

TEST(StatesToTrajectory, SynthesizedStepLengthsStayInEnvelope) {
    std::mt19937_64 rng(15);
    auto B = ar_oracle::stable_coefficients(3, 2, 0.95, rng);
    auto X = ar_oracle::simulate(B, 400, 0.3, rng);
    MatrixXd Y = ar_oracle::observe(ar_oracle::orthonormal(10, 3, rng), X, 0.05, rng);
    std::vector<Trajectory> trajs;
    for (int c = 0; c < 5; ++c) {
        Trajectory t = make_traj("c" + std::to_string(c), {});
        for (int f = 0; f < 400; ++f) t.points.push_back({Y(2 * c, f), Y(2 * c + 1, f)});
        trajs.push_back(t);
    }
    auto obs = pool_trajectories(trajs, Condition::Normal);
    ARModel m = grid_search(obs).model;
    MatrixXd Xs = synthesize_states(m, 400, std::nullopt, rng);
    auto synth = states_to_trajectory(Xs, m, {{0, 0}});
    auto real = step_lengths(trajs);
    auto fake = step_lengths(synth);
    const double iqr_real = quantile(real, 0.75) - quantile(real, 0.25);
    const double iqr_fake = quantile(fake, 0.75) - quantile(fake, 0.25);
    EXPECT_LT(iqr_fake, 2 * iqr_real);
    EXPECT_GT(iqr_fake, 0.5 * iqr_real);
}

TEST(Histogram, DegenerateConservationSymmetry) {
    MatrixXd same = MatrixXd::Constant(2, 9, 4.0);
    auto h = pc_histogram(same, 1, 5);
    EXPECT_EQ(std::count_if(h.counts.begin(), h.counts.end(), [](auto c) { return c > 0; }), 1);
    EXPECT_EQ(h.counts[0], 9u);

    std::mt19937_64 rng(16);
    MatrixXd X = random_matrix(2, 100000, rng);
    auto g = pc_histogram(X, 0, 20);
    // Histogram-implied mass on each side of zero; the bin straddling zero
    // is split linearly.
    std::size_t total = 0;
    double left = 0, right = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        total += g.counts[i];
        const double lo = g.edges[i], hi = g.edges[i + 1];
        const double f = std::clamp((0.0 - lo) / (hi - lo), 0.0, 1.0);
        left += f * double(g.counts[i]);
        right += (1 - f) * double(g.counts[i]);
    }
    EXPECT_EQ(total, 100000u);
    EXPECT_EQ(g.edges.front(), X.row(0).minCoeff());
    EXPECT_EQ(g.edges.back(), X.row(0).maxCoeff());
    EXPECT_LT(std::abs(left - right), 0.05 * std::max(left, right));
}

TEST(Histogram, Errors) {
    EXPECT_THROW(pc_histogram(MatrixXd::Zero(2, 0), 0, 3), InvalidArgument);
    EXPECT_THROW(pc_histogram(MatrixXd::Zero(2, 3), 2, 3), InvalidArgument);
    EXPECT_THROW(pc_histogram(MatrixXd::Zero(2, 3), 0, 0), InvalidArgument);
}

TEST(ModelFile, RoundTripAndCorruption) {
    std::mt19937_64 rng(17);
    ARModel m = planted_model(rng);
    m.condition = Condition::Inhibited;
    std::stringstream ss;
    save_model(m, ss);
    const std::string bytes = ss.str();
    EXPECT_EQ(bytes.substr(0, 4), "NARM");
    std::istringstream in(bytes);
    ARModel r = load_model(in);
    EXPECT_EQ(r.q, m.q);
    EXPECT_EQ(r.d, m.d);
    EXPECT_EQ(r.condition, m.condition);
    EXPECT_EQ(r.C, m.C);
    EXPECT_EQ(r.mean, m.mean);
    EXPECT_EQ(r.B[1], m.B[1]);
    EXPECT_EQ(r.state_cov, m.state_cov);
    EXPECT_EQ(r.obs_var, m.obs_var);
    EXPECT_EQ(r.states, m.states);

    std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(load_model(truncated), FormatError);
    std::string bad = bytes;
    bad[0] = 'X';
    std::istringstream badmagic(bad);
    EXPECT_THROW(load_model(badmagic), FormatError);
    std::istringstream trailing(bytes + "z");
    EXPECT_THROW(load_model(trailing), FormatError);
    std::string v2 = bytes;
    v2[4] = 2;
    std::istringstream version(v2);
    EXPECT_THROW(load_model(version), FormatError);
}

TEST(FitModel, InvariantsHold) {
    std::mt19937_64 rng(18);
    auto B = ar_oracle::stable_coefficients(2, 2, 0.9, rng);
    auto X = ar_oracle::simulate(B, 200, 0.2, rng);
    MatrixXd C0 = ar_oracle::orthonormal(6, 2, rng);
    auto Y = ar_oracle::observe(C0, X, 0.05, rng);
    ARModel m = fit_model(centered(Y), 2, 2);
    // C is identified only up to a rotation, so compare spans.
    EXPECT_LT((C0 - m.C * (m.C.transpose() * C0)).norm(), 0.05);
    EXPECT_LT((m.C.transpose() * m.C - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_EQ(m.state_cov, m.state_cov.transpose());
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(m.state_cov).eigenvalues().minCoeff(), 0.0);
    EXPECT_GE(m.obs_var.minCoeff(), 0.0);
    // C is identified up to a rotation, so compare spans.
    EXPECT_GT(m.obs_var.maxCoeff(), 0.0);
}
