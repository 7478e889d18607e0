#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "stomor/errors.hpp"
#include "stomor/experiment.hpp"
#include "test_util.hpp"

using namespace stomor;
using namespace stomor::testing;
namespace fs = std::filesystem;

namespace {

const std::string kData = STOMOR_DATA_DIR;

ModelFile scalar_meansquare_model() {
    ModelFile f;
    f.sys = load_system(kData + "/scalar_system.txt");
    f.gen = load_generator(kData + "/constant_generator.txt");
    ReductionSettings s;
    s.method = RomKind::mean_square;
    s.poles = "-1";
    return run_reduction(f.sys, f.gen, s).file;
}

}  // namespace

TEST(RandomSystem, MarginInvariantOverSeeds) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const LinearSde s = make_random_system({6, 0.5, 0.05, 0.1, seed});
        EXPECT_NEAR(spectrum(s.A).max_real_part, -0.5, 1e-9) << "seed " << seed;
        EXPECT_LT((s.F - 0.05 * s.A).norm(), 1e-15);
        EXPECT_LT((s.G - 0.1 * s.B).norm(), 1e-15);
    }
}

TEST(RandomSystem, DeterministicAndZeroNoise) {
    const LinearSde a = make_random_system({5, 0.5, 0.0, 0.0, 3});
    const LinearSde b = make_random_system({5, 0.5, 0.0, 0.0, 3});
    const LinearSde c = make_random_system({5, 0.5, 0.0, 0.0, 4});
    EXPECT_EQ(a.A, b.A);
    EXPECT_NE(a.A, c.A);
    EXPECT_TRUE(a.F.isZero(0.0));
    EXPECT_TRUE(a.G.isZero(0.0));
    EXPECT_THROW(make_random_system({0, 0.5, 0.0, 0.0, 0}), std::invalid_argument);
}

TEST(OscillatorGenerator, CommutingStructure) {
    const SignalGenerator g = make_example1_generator(11);
    EXPECT_LT((g.S * g.J - g.J * g.S).norm(), 1e-14);
    // S - J^2/2 is the rotation W, so the generator is neutrally stable
    Mat W(2, 2);
    W << 0, 5, -5, 0;
    EXPECT_LT((g.S - 0.5 * g.J * g.J - W).norm(), 1e-14);
    const SignalGenerator z = make_oscillator_generator(0, 0, Mat::Ones(1, 2), Vec::Ones(2));
    EXPECT_EQ(z.S, W);
    EXPECT_TRUE(z.is_deterministic());
}

TEST(OscillatorGenerator, ZeroLyapunovExponents) {
    const LinearSde sys = make_random_system({3, 1.0, 0.0, 0.0, 1});
    const SignalGenerator g = make_example1_generator(5);
    AssumptionOptions opts;
    opts.system.horizon = 20.0;
    opts.generator.horizon = 500.0;
    opts.generator.dt = 1e-3;
    const AssumptionReport r = check_assumptions(sys, g, opts);
    EXPECT_TRUE(r.generator_zero);
    EXPECT_TRUE(r.system_negative);
}

TEST(ConstantGenerator, Shape) {
    const SignalGenerator g = make_constant_generator(2);
    EXPECT_EQ(g.order(), 1);
    EXPECT_EQ(g.S(0, 0), 0.0);
    EXPECT_EQ(g.omega0[0], 1.0);
}

TEST(PoleList, Parsing) {
    const auto p = parse_pole_list("-1, -0.5+3i,-0.5-3i, -2e-1, 2i");
    ASSERT_EQ(p.size(), 5u);
    EXPECT_EQ(p[0], Complex(-1, 0));
    EXPECT_EQ(p[1], Complex(-0.5, 3));
    EXPECT_EQ(p[2], Complex(-0.5, -3));
    EXPECT_EQ(p[3], Complex(-0.2, 0));
    EXPECT_EQ(p[4], Complex(0, 2));
    EXPECT_THROW(parse_pole_list(""), std::invalid_argument);
    EXPECT_THROW(parse_pole_list("-1,abc"), std::invalid_argument);
}

TEST(DominantPoles, ConjugateClosed) {
    Mat A = Mat::Zero(4, 4);
    A(0, 0) = -3;
    A.block(1, 1, 2, 2) << -1, 2, -2, -1;
    A(3, 3) = -0.5;
    const auto one = dominant_poles(A, 1);
    EXPECT_EQ(one[0], Complex(-0.5, 0));
    const auto two = dominant_poles(A, 2);
    // -0.5 fills one slot; the pair does not fit, so the next real pole follows
    EXPECT_EQ(two[0], Complex(-0.5, 0));
    EXPECT_EQ(two[1].imag(), 0.0);
    const auto three = dominant_poles(A, 3);
    EXPECT_NEAR(three[1].real(), -1.0, 1e-12);
    EXPECT_NEAR(three[1].imag(), -three[2].imag(), 1e-12);
}

TEST(NearestPoles, MatchesSpectrumOfS) {
    Mat A = Mat::Zero(5, 5);
    A.block(0, 0, 2, 2) << -0.5, 1, -1, -0.5;
    A.block(2, 2, 2, 2) << -2, 4.5, -4.5, -2;
    A(4, 4) = -0.1;
    Mat S(2, 2);
    S << 0, 5, -5, 0;
    const auto pair = nearest_poles(A, S);
    ASSERT_EQ(pair.size(), 2u);
    EXPECT_NEAR(pair[0].real(), -2.0, 1e-12);
    EXPECT_NEAR(std::abs(pair[0].imag()), 4.5, 1e-12);
    EXPECT_EQ(pair[1], std::conj(pair[0]));

    // a real eigenvalue of S takes the closest real eigenvalue of A
    const auto real = nearest_poles(A, Mat::Constant(1, 1, -0.2));
    ASSERT_EQ(real.size(), 1u);
    EXPECT_NEAR(real[0].real(), -0.1, 1e-12);

    // no complex eigenvalues in A: falls back to dominant ones
    const Mat D = Vec(Eigen::Vector3d(-1, -2, -3)).asDiagonal();
    const auto fallback = nearest_poles(D, S);
    EXPECT_EQ(fallback, dominant_poles(D, 2));
}

TEST(Sources, RandomAndFiles) {
    const LinearSde s = system_from_source("random:n=4,margin=0.7,f=0,g=0.2,seed=9");
    EXPECT_EQ(s.order(), 4);
    EXPECT_NEAR(spectrum(s.A).max_real_part, -0.7, 1e-9);
    EXPECT_EQ(s.A, make_random_system({4, 0.7, 0.0, 0.2, 9}).A);
    EXPECT_THROW(system_from_source("random:n=4,bogus=1"), std::invalid_argument);
    EXPECT_THROW(system_from_source("random:n=2.5"), std::invalid_argument);
    EXPECT_EQ(system_from_source(kData + "/scalar_system.txt").A(0, 0), -1.0);
    EXPECT_EQ(generator_from_source("example1:4").S, make_example1_generator(4).S);
    EXPECT_EQ(generator_from_source("constant:4").L, make_constant_generator(4).L);
    EXPECT_THROW(generator_from_source("example1:x"), std::invalid_argument);
    EXPECT_THROW(generator_from_source(kData + "/nope.txt"), IoError);
}

TEST(Mechanical, FixtureSatisfiesSecondOrderForm) {
    const std::string dir = kData + "/mechanical/";
    const Mat M = load_matrix(dir + "M.mtx");
    const Mat K = load_matrix(dir + "K.mtx");
    const Mat D = load_matrix(dir + "D.txt");
    const Mat BH = load_matrix(dir + "BH.txt");
    const LinearSde sys = assemble_mechanical(M, K, D, BH, 24);
    ASSERT_EQ(sys.order(), 26);
    EXPECT_EQ(sys.C(0, 24), 1.0);
    EXPECT_EQ(sys.C.sum(), 1.0);
    EXPECT_LT((sys.F - 0.01 * sys.A).norm(), 1e-15);
    EXPECT_EQ(sys.G, sys.B);

    // for x = [q; v] and input u: M v' + D v + K q = -B_H u
    std::mt19937_64 rng(1);
    const Vec x = random_matrix(rng, 26, 1).col(0);
    const double u = 0.7;
    const Vec dx = sys.A * x + sys.B.col(0) * u;
    const Vec q = x.head(13), v = x.tail(13);
    EXPECT_LT((dx.head(13) - v).norm(), 1e-14);
    EXPECT_LT((M * dx.tail(13) + D * v + K * q + BH.col(0) * u).norm(), 1e-10);
    EXPECT_TRUE(spectrum(sys.A).is_hurwitz);
    EXPECT_THROW(assemble_mechanical(M, K, D, BH, 26), DimensionError);
}

TEST(Reduction, ScalarMeanSquareFromFiles) {
    const ModelFile f = scalar_meansquare_model();
    EXPECT_EQ(f.model.kind, RomKind::mean_square);
    EXPECT_NEAR(f.model.Cr(0, 0), std::sqrt(1.5), 1e-6);
    EXPECT_NEAR(f.model.Br(0, 0), 1.0 / std::sqrt(1.5), 1e-6);
    EXPECT_NEAR(std::abs(f.model.Fr(0, 0)), std::sqrt(2.0 / 3.0), 1e-6);
}

TEST(Reduction, MeanModelCertificateSign) {
    const LinearSde sys = load_system(kData + "/scalar_system.txt");
    const SignalGenerator gen = load_generator(kData + "/constant_generator.txt");
    ReductionSettings s;
    s.method = RomKind::moment_mean;
    s.poles = "-1";
    s.gr = "zero";
    EXPECT_NO_THROW(run_reduction(sys, gen, s));
    s.poles = "1";
    EXPECT_THROW(run_reduction(sys, gen, s), CertificateFailed);
}

TEST(Reduction, ExactAndRules) {
    const LinearSde sys = make_random_system({6, 0.5, 0.05, 0.1, 2});
    const SignalGenerator gen = make_example1_generator(2);
    ReductionSettings s;
    s.exact.estimate_exponents = false;
    const ReductionResult r = run_reduction(sys, gen, s);
    EXPECT_EQ(r.file.model.kind, RomKind::exact);
    EXPECT_LT((r.file.model.Gr - 0.05 * r.file.model.Br).norm(), 1e-15);
    const auto near = nearest_poles(sys.A, gen.S);
    const SpectrumReport sp = spectrum(r.file.model.Ar);
    EXPECT_NEAR(sp.eigenvalues[0].real(), near[0].real(), 1e-8);
    s.poles = "auto";
    const auto dom = dominant_poles(sys.A, 2);
    const SpectrumReport sd = spectrum(run_reduction(sys, gen, s).file.model.Ar);
    EXPECT_NEAR(sd.eigenvalues[0].real(), dom[0].real(), 1e-8);
    s.gr = "nonsense";
    EXPECT_THROW(run_reduction(sys, gen, s), std::invalid_argument);
    s.gr = "";
    s.method = RomKind::mean_square;
    EXPECT_THROW(run_reduction(sys, gen, s), std::invalid_argument);
}

TEST(Cdf, StepFunction) {
    const auto c = empirical_cdf({0.3, 0.1, 0.1, 0.2});
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0], std::make_pair(0.1, 0.5));
    EXPECT_EQ(c[1], std::make_pair(0.2, 0.75));
    EXPECT_EQ(c[2], std::make_pair(0.3, 1.0));
    EXPECT_TRUE(empirical_cdf({}).empty());
}

TEST(Validation, ZeroSystemHasZeroError) {
    ModelFile f;
    f.sys = scalar_system(-1, 0.3, 0, 0, 1);
    f.gen = scalar_generator(0, 0, 1);
    f.model.kind = RomKind::moment_mean;
    f.model.Ar = scalar(-1);
    f.model.Br = scalar(0);
    f.model.Fr = scalar(0);
    f.model.Gr = scalar(0);
    f.model.Cr = scalar(0);
    ValidationConfig cfg;
    cfg.horizon = 2.0;
    cfg.n_paths = 10;
    const ValidationReport r = run_validation(f, cfg);
    for (double e : r.mean_abs_err) EXPECT_EQ(e, 0.0);
    for (const auto& probe : r.probe_errors) {
        const auto cdf = empirical_cdf(probe);
        ASSERT_EQ(cdf.size(), 1u);
        EXPECT_EQ(cdf[0], std::make_pair(0.0, 1.0));
    }
    // probes beyond the horizon are dropped
    EXPECT_EQ(r.probe_times.size(), 1u);
}

TEST(Validation, ThreadCountDoesNotChangeResults) {
    const ModelFile f = scalar_meansquare_model();
    ValidationConfig cfg;
    cfg.horizon = 3.0;
    cfg.n_paths = 37;
    cfg.seed = 5;
    cfg.randomize_omega0 = true;
    cfg.threads = 1;
    const ValidationReport a = run_validation(f, cfg);
    cfg.threads = 4;
    const ValidationReport b = run_validation(f, cfg);
    EXPECT_EQ(a.mean_abs_err, b.mean_abs_err);
    EXPECT_EQ(a.var_abs_err, b.var_abs_err);
    EXPECT_EQ(a.probe_errors, b.probe_errors);
    EXPECT_EQ(a.y.mean, b.y.mean);
    EXPECT_EQ(a.y2.se, b.y2.se);
}

TEST(Validation, StatisticsAgreeWithDirectComputation) {
    const ModelFile f = scalar_meansquare_model();
    ValidationConfig cfg;
    cfg.horizon = 2.0;
    cfg.n_paths = 12;
    cfg.burn_in_fraction = 0.5;
    cfg.track_moment = false;
    cfg.max_points = 2001;
    const ValidationReport r = run_validation(f, cfg);
    ASSERT_EQ(r.times.size(), 2001u);
    // direct per-time mean of |y - y_rom| from independently simulated paths
    CoSimulationSetup setup{&f.sys, &f.gen, &f.model, Mat(), f.gen.omega0};
    SimulationOptions o;
    o.horizon = 2.0;
    std::vector<double> sum(2001, 0.0);
    double mean_y = 0.0;
    for (std::size_t p = 0; p < 12; ++p) {
        const CoSimulationTrace t = simulate_interconnection(setup, o, 0, p);
        double yp = 0.0;
        for (std::size_t k = 0; k < t.y.size(); ++k) {
            sum[k] += std::abs(t.y[k] - t.y_rom[k]);
            if (k >= 1000) yp += t.y[k];
        }
        mean_y += yp / 1001.0;
    }
    for (std::size_t k = 0; k < 2001; k += 250) EXPECT_NEAR(r.mean_abs_err[k], sum[k] / 12.0, 1e-12);
    EXPECT_NEAR(r.y.mean, mean_y / 12.0, 1e-12);
    EXPECT_TRUE(r.has_ref2);
    EXPECT_NEAR(r.ref2.mean, 1.5, 1e-9);
    EXPECT_NEAR(r.ref.mean, 1.0, 1e-12);
}

TEST(Validation, CsvSchema) {
    const ModelFile f = scalar_meansquare_model();
    ValidationConfig cfg;
    cfg.horizon = 3.0;
    cfg.n_paths = 8;
    cfg.probe_times = {1.5, 2.5};
    const ValidationReport r = run_validation(f, cfg);
    const fs::path dir = fs::temp_directory_path() / "stomor_csv_test";
    emit_validation_csv(r, dir.string());
    const CsvTable errors = read_csv((dir / "errors.csv").string());
    EXPECT_EQ(errors.header, (std::vector<std::string>{"t", "mean_abs_err", "var_abs_err"}));
    EXPECT_EQ(errors.rows.size(), r.times.size());
    const CsvTable cdf = read_csv((dir / "cdf.csv").string());
    EXPECT_EQ(cdf.header, (std::vector<std::string>{"probe_time", "abs_err", "cdf"}));
    double prev_t = -1.0, prev_f = 0.0;
    for (const auto& row : cdf.rows) {
        if (row[0] != prev_t) prev_f = 0.0;
        EXPECT_GT(row[2], prev_f);
        EXPECT_LE(row[2], 1.0);
        prev_t = row[0];
        prev_f = row[2];
    }
    const CsvTable paths = read_csv((dir / "paths.csv").string());
    EXPECT_EQ(paths.rows.size(), 8u);
    const CsvTable moments = read_csv((dir / "moments.csv").string());
    ASSERT_EQ(moments.rows.size(), 1u);
    EXPECT_EQ(moments.header.front(), "y_mean");
    EXPECT_EQ(moments.header.back(), "ref2_se");
}

TEST(Validation, MassDivergenceThrows) {
    ModelFile f;
    f.sys = scalar_system(20.0, 0, 1, 0, 1);
    f.gen = scalar_generator(0, 0, 1);
    f.model.kind = RomKind::moment_mean;
    f.model.Ar = scalar(-1);
    f.model.Br = scalar(1);
    f.model.Fr = scalar(0);
    f.model.Gr = scalar(0);
    f.model.Cr = scalar(1);
    ValidationConfig cfg;
    cfg.horizon = 5.0;
    cfg.n_paths = 4;
    EXPECT_THROW(run_validation(f, cfg), DivergenceError);
}

TEST(Validation, ConfigChecks) {
    ValidationConfig cfg;
    cfg.burn_in_fraction = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = ValidationConfig{};
    cfg.n_paths = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(WorkerCount, EnvironmentCap) {
    ::setenv("STOMOR_THREADS", "2", 1);
    EXPECT_EQ(worker_count(8), 2u);
    EXPECT_EQ(worker_count(1), 1u);
    ::setenv("STOMOR_THREADS", "junk", 1);
    EXPECT_EQ(worker_count(3), 3u);
    ::unsetenv("STOMOR_THREADS");
    EXPECT_EQ(worker_count(5), 5u);
}
