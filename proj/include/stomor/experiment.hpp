#pragma once

///
/// \file experiment.hpp
///
/// Experiment plumbing: random instances, stock generators, the mechanical
/// assembly, source strings, reduction and Monte Carlo validation.
///

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stomor/io.hpp"
#include "stomor/moments.hpp"
#include "stomor/rom.hpp"
#include "stomor/sde.hpp"
#include "stomor/simulation.hpp"

namespace stomor {

struct RandomSystemSpec {
    Index n = 10;
    double margin = 0.5;
    double f_scale = 0.05;  // F = f_scale * A
    double g_scale = 0.1;   // G = g_scale * B
    std::uint64_t seed = 0;
};

/// A = M - (max Re spectrum(M) + margin) I with M uniform on [-1, 1].
LinearSde make_random_system(const RandomSystemSpec& spec);

/// J = c0 I + c1 W, S = W + J^2/2 with W = [0 5; -5 0]; seeded c0, c1 and L.
SignalGenerator make_example1_generator(std::uint64_t seed);

/// Constant input: nu = 1, S = 0, J = 0, omega0 = 1, seeded L.
SignalGenerator make_constant_generator(std::uint64_t seed);

/// Generator with explicit coefficients for Example-1-type inputs.
SignalGenerator make_oscillator_generator(double c0, double c1, const Mat& L, const Vec& omega0);

/// Second-order form M q'' + D q' + K q = B_H u as a first-order system with
/// A = [0 I; -M^-1 K  -M^-1 D], B = [0; -M^-1 B_H], C = e_output^T,
/// F = f_scale A and G = g_scale B. `output_state` is 0-based.
LinearSde assemble_mechanical(const Mat& M, const Mat& K, const Mat& D, const Mat& BH,
                              Index output_state, double f_scale = 0.01, double g_scale = 1.0);

/// "random:n=10,margin=0.5,f=0.05,g=0.1,seed=3" or a system file path.
LinearSde system_from_source(const std::string& source);
RandomSystemSpec parse_random_spec(const std::string& body);

/// "example1:SEED", "constant:SEED" or a generator file path.
SignalGenerator generator_from_source(const std::string& source);

/// Comma-separated complex numbers: "-1,-2", "-0.5+3i,-0.5-3i".
std::vector<Complex> parse_pole_list(const std::string& text);

/// nu dominant eigenvalues of A (largest real part first) chosen so the set is
/// closed under conjugation.
std::vector<Complex> dominant_poles(const Mat& A, Index nu);

/// Eigenvalues of A nearest to those of S, one per eigenvalue of S, matched
/// greedily and closed under conjugation. Slots without a match fall back to
/// dominant eigenvalues.
std::vector<Complex> nearest_poles(const Mat& A, const Mat& S);

struct ReductionSettings {
    RomKind method = RomKind::exact;
    /// "auto" (dominant), "nearest" (closest to the spectrum of S) or a pole list.
    std::string poles = "nearest";
    /// "zero", "scaled:C", "poles:auto" or "poles:LIST". Empty picks
    /// "scaled:0.05" for exact/mean and "zero" for meansquare.
    std::string gr;
    /// Moment-mean Fr: "j-minus-gl" (J - Gr L), "minus-gl" (-Gr L) or "zero".
    std::string fr = "j-minus-gl";
    ExactRomOptions exact;
};

struct ReductionResult {
    ModelFile file;
    MeanMoment Pi;
    std::optional<SecondMoment> K;
    std::vector<std::string> notes;
};

ReductionResult run_reduction(const LinearSde& sys, const SignalGenerator& gen,
                              const ReductionSettings& settings);

struct ValidationConfig {
    double dt = 1e-3;
    double horizon = 10.0;
    double burn_in_fraction = 0.2;
    std::size_t n_paths = 50;
    std::uint64_t seed = 0;
    NoiseCoupling coupling = NoiseCoupling::shared;
    bool randomize_omega0 = false;
    bool square_wave = false;
    SquareWave wave;
    std::vector<double> probe_times{1.5, 2.5, 5.0, 7.5, 10.0};
    /// 0 means hardware concurrency; STOMOR_THREADS caps either way.
    std::size_t threads = 0;
    /// Upper bound on stored time points per path.
    std::size_t max_points = 2000;
    /// Fraction of the horizon used for tail statistics.
    double tail_fraction = 0.1;
    bool track_moment = true;

    void validate() const;
};

struct SteadyStat {
    double mean = 0.0;
    double se = 0.0;
};

struct PathSummary {
    std::size_t index = 0;
    bool diverged = false;
    double tail_mean_abs_err = 0.0;
    double tail_rms_y = 0.0;
    /// Post burn-in time averages.
    double mean_y = 0.0;
    double mean_y_rom = 0.0;
    double mean_y2 = 0.0;
    double mean_y_rom2 = 0.0;
    double mean_abs_err = 0.0;
    double mean_ref = 0.0;     // C Pi w
    double mean_ref2 = 0.0;    // (C(x)C) K (w(x)w), when K is available
};

struct ValidationReport {
    std::vector<double> times;
    std::vector<double> mean_abs_err;
    std::vector<double> var_abs_err;
    std::vector<double> probe_times;               // snapped to the record grid
    std::vector<std::vector<double>> probe_errors; // sorted |e| per probe
    std::vector<PathSummary> paths;
    std::size_t diverged = 0;
    SteadyStat y, y_rom, y2, y_rom2, abs_err, ref, ref2;
    bool has_ref2 = false;
    double tail_mean_abs_err = 0.0;
    double tail_rms_y = 0.0;
};

/// Threads actually used for `requested` (0 = hardware), honoring STOMOR_THREADS.
std::size_t worker_count(std::size_t requested);

/// Throws DivergenceError if more than 10% of paths diverge.
ValidationReport run_validation(const ModelFile& model, const ValidationConfig& config);

/// (value, F(value)) pairs of the empirical CDF of `samples`.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> samples);

/// errors.csv, cdf.csv, paths.csv and moments.csv in `dir`.
void emit_validation_csv(const ValidationReport& report, const std::string& dir);

}  // namespace stomor
