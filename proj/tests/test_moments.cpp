#include <gtest/gtest.h>

#include <cmath>

#include "stomor/errors.hpp"
#include "stomor/moments.hpp"
#include "test_util.hpp"

using namespace stomor;
using namespace stomor::testing;

TEST(MomentStep, ScalarFixedPointIsStationary) {
    const LinearSde sys = scalar_system(-1, 0, 1, 0, 1);
    const SignalGenerator gen = scalar_generator(0, 0, 1);
    const Mat X = moment_sde_step(scalar(1.0), sys, gen, 1e-2, 0.37);
    EXPECT_DOUBLE_EQ(X(0, 0), 1.0);
}

TEST(MomentStep, DeterministicReductionIsSylvesterFlow) {
    std::mt19937_64 rng(1);
    LinearSde sys = random_stable_system(rng, 4, 0.5, 0.0, 0.0);
    SignalGenerator gen = random_generator(rng, 2, 0.0);
    const Mat X = random_matrix(rng, 4, 2);
    const double dt = 1e-2;
    const Mat expected = X + dt * (sys.A * X - X * gen.S + sys.B * gen.L);
    EXPECT_LT((moment_sde_step(X, sys, gen, dt, 0.8) - expected).norm(), 1e-14);
}

TEST(MomentStep, TwoNoiseWithoutGeneratorNoiseMatchesShared) {
    std::mt19937_64 rng(2);
    const LinearSde sys = random_stable_system(rng, 3, 0.5, 0.1, 0.3);
    const SignalGenerator gen = random_generator(rng, 2, 0.0);
    const Mat X = random_matrix(rng, 3, 2);
    const Mat a = moment_sde_step(X, sys, gen, 1e-3, 0.02);
    const Mat b = moment_sde_step_two_noise(X, sys, gen, 1e-3, 0.02, -0.05);
    EXPECT_LT((a - b).norm(), 1e-15);
}

TEST(MomentStep, TwoNoiseDriftWithoutSystemNoise) {
    std::mt19937_64 rng(3);
    LinearSde sys = random_stable_system(rng, 3, 0.5, 0.0, 0.0);
    const SignalGenerator gen = random_generator(rng, 2, 0.4);
    const Mat X = random_matrix(rng, 3, 2);
    const double dt = 1e-3;
    const Mat J2 = gen.J * gen.J;
    const Mat expected = X + dt * (sys.A * X - X * (gen.S - J2) + sys.B * gen.L) - X * gen.J * 0.1;
    EXPECT_LT((moment_sde_step_two_noise(X, sys, gen, dt, -0.3, 0.1) - expected).norm(), 1e-14);
}

TEST(MeanMoment, ScalarExamples) {
    const MeanMoment a = solve_mean_moment(scalar_system(-1, 0, 1, 0, 1), scalar_generator(0, 0, 1));
    EXPECT_TRUE(a.solvable);
    EXPECT_NEAR(a.Pi(0, 0), 1.0, 1e-15);
    const MeanMoment b = solve_mean_moment(scalar_system(-2, 0.5, 1, 0, 1), scalar_generator(0, 1, 1));
    EXPECT_NEAR(b.Pi(0, 0), 2.0 / 3.0, 1e-15);
    EXPECT_TRUE(b.attractive);
}

TEST(MeanMoment, RandomResidual) {
    std::mt19937_64 rng(4);
    const LinearSde sys = random_stable_system(rng, 20, 0.5, 0.05, 0.1);
    const SignalGenerator gen = random_generator(rng, 3, 0.3);
    const MeanMoment m = solve_mean_moment(sys, gen);
    const Mat forcing = sys.B * gen.L - sys.G * gen.L * gen.J;
    const Mat res = sys.A * m.Pi - m.Pi * (gen.S - gen.J * gen.J) - sys.F * m.Pi * gen.J + forcing;
    EXPECT_LT(res.norm(), 1e-10 * (1.0 + forcing.norm()));
    EXPECT_NEAR(m.residual, res.norm(), 1e-14);
}

TEST(MeanMoment, SingularOperator) {
    const LinearSde sys = scalar_system(0, 0, 1, 0, 1);
    const SignalGenerator gen = scalar_generator(0, 0, 1);
    EXPECT_THROW(solve_mean_moment(sys, gen), SingularSystem);
    const MeanMoment m = try_solve_mean_moment(sys, gen);
    EXPECT_FALSE(m.solvable);
    EXPECT_EQ(m.Pi.size(), 0);
}

namespace {

double time_average_of_moment(const LinearSde& sys, const SignalGenerator& gen, bool two_noise,
                              std::uint64_t seed) {
    const double dt = 1e-3;
    const std::size_t steps = 2000000;
    MomentStepper stepper(sys, gen, dt);
    BrownianStream wx(seed, 0, dt, 0);
    BrownianStream ws(seed, 0, dt, 1);
    Mat X = Mat::Zero(1, 1);
    double sum = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        if (two_noise) {
            stepper.step_two_noise(X, wx.next(), ws.next());
        } else {
            stepper.step(X, wx.next());
        }
        sum += X(0, 0);
    }
    return sum / static_cast<double>(steps);
}

}  // namespace

TEST(MomentProcess, TimeAverageApproachesPi) {
    const LinearSde sys = scalar_system(-1.5, 0.3, 1, 0.5, 1);
    const SignalGenerator gen = scalar_generator(0.08, 0.4, 1);
    const double pi = solve_mean_moment(sys, gen).Pi(0, 0);
    EXPECT_NEAR(time_average_of_moment(sys, gen, false, 21) / pi, 1.0, 0.05);
}

TEST(MomentProcess, TwoNoiseTimeAverageApproachesSylvester) {
    const LinearSde sys = scalar_system(-1.5, 0.3, 1, 0.5, 1);
    const SignalGenerator gen = scalar_generator(0.08, 0.4, 1);
    // A Pi - Pi (S - J^2) + B L = 0 for the two-noise mean
    const double pi = -1.0 / (-1.5 - (0.08 - 0.16));
    EXPECT_NEAR(time_average_of_moment(sys, gen, true, 22) / pi, 1.0, 0.05);
}

TEST(MomentProcess, PathAverageWithinConfidenceInterval) {
    std::mt19937_64 rng(5);
    const LinearSde sys = random_stable_system(rng, 3, 1.0, 0.2, 0.3);
    const SignalGenerator gen = random_generator(rng, 2, 0.3);
    const MeanMoment pi = solve_mean_moment(sys, gen);
    const double dt = 1e-3;
    const std::size_t n_paths = 200;
    const std::size_t steps = 8000;
    MomentStepper stepper(sys, gen, dt);
    Mat sum = Mat::Zero(3, 2), sq = Mat::Zero(3, 2);
    for (std::size_t p = 0; p < n_paths; ++p) {
        BrownianStream w(77, p, dt);
        Mat X = Mat::Zero(3, 2);
        for (std::size_t k = 0; k < steps; ++k) stepper.step(X, w.next());
        sum += X;
        sq += X.cwiseProduct(X);
    }
    const double np = static_cast<double>(n_paths);
    const Mat mean = sum / np;
    for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 2; ++j) {
            const double var = (sq(i, j) - np * mean(i, j) * mean(i, j)) / (np - 1.0);
            const double se = std::sqrt(var / np);
            // EM bias is O(dt); 3 SE plus a small absolute slack for it
            EXPECT_NEAR(mean(i, j), pi.Pi(i, j), 3.0 * se + 1e-3);
        }
    }
}

TEST(SecondMoment, ScalarWorkedExample) {
    const LinearSde sys = scalar_system(-1, 0, 1, 1, 1);
    const SignalGenerator gen = scalar_generator(0, 0, 1);
    const MeanMoment pi = solve_mean_moment(sys, gen);
    const SecondMoment k = solve_second_moment(sys, gen, pi);
    EXPECT_NEAR(k.A_aug(0, 0), -2.0, 1e-15);
    EXPECT_NEAR(k.B_aug(0, 0), 3.0, 1e-15);
    EXPECT_NEAR(k.K(0, 0), 1.5, 1e-14);
    EXPECT_LT(k.residual, 1e-14);
}

TEST(SecondMoment, DeterministicSystemFactorizes) {
    // with F = G = 0 the second moment is Pi (x) Pi, so (C(x)C) K (w(x)w) = (C Pi w)^2
    std::mt19937_64 rng(6);
    const LinearSde sys = random_stable_system(rng, 4, 0.5, 0.0, 0.0);
    const SignalGenerator gen = random_generator(rng, 2, 0.0);
    const MeanMoment pi = solve_mean_moment(sys, gen);
    const SecondMoment k = solve_second_moment(sys, gen, pi);
    EXPECT_LT((k.K - kron(pi.Pi, pi.Pi)).norm(), 1e-10);
    const Vec w = random_matrix(rng, 2, 1).col(0);
    const Mat ww = w * w.transpose();
    const double lhs = (kron(sys.C, sys.C) * k.K * vec(ww))(0, 0);
    const double rhs = std::pow((sys.C * pi.Pi * w)(0, 0), 2);
    EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(SecondMoment, UnforcedIsZero) {
    std::mt19937_64 rng(7);
    LinearSde sys = random_stable_system(rng, 3, 0.5, 0.1, 0.0);
    sys.B.setZero();
    const SignalGenerator gen = random_generator(rng, 2, 0.0);
    const SecondMoment k = solve_second_moment(sys, gen, solve_mean_moment(sys, gen));
    EXPECT_EQ(k.K.norm(), 0.0);
}

TEST(SecondMoment, RequiresDeterministicGenerator) {
    const LinearSde sys = scalar_system(-1, 0, 1, 1, 1);
    const SignalGenerator gen = scalar_generator(0.5, 1, 1);
    const MeanMoment pi = solve_mean_moment(sys, gen);
    EXPECT_THROW(solve_second_moment(sys, gen, pi), std::invalid_argument);
    MeanMoment missing;
    EXPECT_THROW(solve_second_moment(sys, scalar_generator(0, 0, 1), missing), std::invalid_argument);
}

TEST(SecondMoment, RandomResidual) {
    std::mt19937_64 rng(8);
    const LinearSde sys = random_stable_system(rng, 12, 0.5, 0.05, 0.5);
    const SignalGenerator gen = random_generator(rng, 3, 0.0);
    const SecondMoment k = solve_second_moment(sys, gen, solve_mean_moment(sys, gen));
    const Mat res = k.A_aug * k.K + k.B_aug - k.K * k.S_aug;
    EXPECT_LT(res.norm(), 1e-10 * (1.0 + k.B_aug.norm()));
    EXPECT_TRUE(k.warnings.empty());
}

TEST(SecondMoment, RepeatedGeneratorEigenvaluesWarn) {
    const LinearSde sys = scalar_system(-1, 0.1, 1, 0.2, 1);
    SignalGenerator gen;
    gen.S = Mat::Zero(2, 2);
    gen.J = Mat::Zero(2, 2);
    gen.L = Mat::Ones(1, 2);
    gen.omega0 = Vec::Ones(2);
    const SecondMoment k = solve_second_moment(sys, gen, solve_mean_moment(sys, gen));
    EXPECT_FALSE(k.warnings.empty());
    EXPECT_LT(k.residual, 1e-12);
}

namespace {

// Iterates the mean and second-moment ODEs to their fixed point.
Mat stationary_second_moment(const LinearSde& sys, double u, double dt, std::size_t steps) {
    const Index n = sys.order();
    Mat M = Mat::Zero(n, n);
    Vec m = Vec::Zero(n);
    for (std::size_t k = 0; k < steps; ++k) {
        const Mat next = second_moment_ode_step(M, m, u, sys, dt);
        m += dt * (sys.A * m + sys.B.col(0) * u);
        M = next;
    }
    return M;
}

}  // namespace

TEST(SecondMomentOde, TrivialStep) {
    const LinearSde sys = scalar_system(-1, 0.5, 1, 1, 1);
    EXPECT_EQ(second_moment_ode_step(Mat::Zero(1, 1), Vec::Zero(1), 0.0, sys, 0.1).norm(), 0.0);
}

TEST(SecondMomentOde, SymmetricIncrement) {
    std::mt19937_64 rng(9);
    const LinearSde sys = random_stable_system(rng, 4, 0.5, 0.2, 0.5);
    Mat M = random_matrix(rng, 4, 4);
    M = M * M.transpose();
    const Mat next = second_moment_ode_step(M, random_matrix(rng, 4, 1).col(0), 0.7, sys, 0.01);
    EXPECT_EQ((next - next.transpose()).norm(), 0.0);
}

TEST(SecondMomentOde, ScalarStationaryValue) {
    const LinearSde sys = scalar_system(-1, 0, 1, 1, 1);
    const Mat M = stationary_second_moment(sys, 1.0, 1e-2, 5000);
    EXPECT_NEAR(M(0, 0), 1.5, 1e-10);
}

TEST(SecondMomentOde, AgreesWithAugmentedSylvester) {
    std::mt19937_64 rng(10);
    for (Index n : {1, 3}) {
        const LinearSde sys = random_stable_system(rng, n, 0.5, 0.1, 0.5);
        SignalGenerator gen = scalar_generator(0, 0, 0.8, 1.3);
        const SecondMoment k = solve_second_moment(sys, gen, solve_mean_moment(sys, gen));
        const double u = 0.8 * 1.3;
        const Mat M = stationary_second_moment(sys, u, 1e-2, 40000);
        const Mat kw = k.K * 1.3 * 1.3;  // K vec(w w^T) with nu = 1
        const Mat vm = vec(M);
        EXPECT_LT((vm - kw).norm(), 1e-6 * kw.norm()) << "n = " << n;
    }
}

TEST(Rearrange, OuterProductIdentity) {
    std::mt19937_64 rng(11);
    const Mat x = random_matrix(rng, 3, 1);
    const Mat y = random_matrix(rng, 2, 1);
    EXPECT_LT((vec(x * y.transpose()) - kron(y, x)).norm(), 1e-15);
    const Mat a = random_matrix(rng, 2, 3);
    const Mat b = random_matrix(rng, 3, 2);
    const Mat r = rearrange(kron(a, b), 2, 3, 3, 2);
    EXPECT_LT((r - vec(a) * vec(b).transpose()).norm(), 1e-14);
    EXPECT_THROW(rearrange(Mat::Ones(3, 3), 2, 2, 2, 2), DimensionError);
}

TEST(NearestKronecker, ExactProductRecovery) {
    std::mt19937_64 rng(12);
    const Mat a = random_matrix(rng, 2, 2);
    const Mat b = random_matrix(rng, 2, 2);
    const KroneckerFactorization f = nearest_kronecker(kron(a, b), 2, 2, 2, 2);
    EXPECT_LT(f.separability_error, 1e-12);
    EXPECT_LT((kron(f.T1, f.T2) - kron(a, b)).norm(), 1e-12);
}

TEST(NearestKronecker, ScalarSquareRoot) {
    const KroneckerFactorization f = nearest_kronecker(scalar(4.0), 1, 1, 1, 1);
    EXPECT_NEAR(f.T1(0, 0), 2.0, 1e-15);
    EXPECT_NEAR(f.T2(0, 0), 2.0, 1e-15);
    const KroneckerFactorization g = nearest_kronecker(scalar(-4.0), 1, 1, 1, 1);
    EXPECT_NEAR(g.T1(0, 0), 2.0, 1e-15);
    EXPECT_NEAR(g.T2(0, 0), -2.0, 1e-15);
}

TEST(NearestKronecker, ErrorEqualsDirectNorm) {
    std::mt19937_64 rng(13);
    const Mat q = random_matrix(rng, 4, 4);
    const KroneckerFactorization f = nearest_kronecker(q, 2, 2, 2, 2);
    EXPECT_NEAR(f.separability_error, (q - kron(f.T1, f.T2)).norm(), 1e-10);
}

TEST(NearestKronecker, SignConventionAndZero) {
    std::mt19937_64 rng(14);
    const Mat q = random_matrix(rng, 6, 4);
    const KroneckerFactorization f = nearest_kronecker(q, 3, 2, 2, 2);
    Index i = 0, j = 0;
    f.T1.cwiseAbs().maxCoeff(&i, &j);
    EXPECT_GT(f.T1(i, j), 0.0);
    const KroneckerFactorization z = nearest_kronecker(Mat::Zero(4, 4), 2, 2, 2, 2);
    EXPECT_EQ(z.T1.norm(), 0.0);
    EXPECT_EQ(z.T2.norm(), 0.0);
    EXPECT_EQ(z.separability_error, 0.0);
}

TEST(NearestKronecker, PerturbationNeverImproves) {
    std::mt19937_64 rng(15);
    const Mat q = random_matrix(rng, 6, 6);
    const KroneckerFactorization f = nearest_kronecker(q, 3, 3, 2, 2);
    const double best = (q - kron(f.T1, f.T2)).norm();
    for (int k = 0; k < 20; ++k) {
        const Mat t1 = f.T1 + 1e-3 * random_matrix(rng, 3, 3);
        EXPECT_GE((q - kron(t1, f.T2)).norm(), best - 1e-12);
    }
}
