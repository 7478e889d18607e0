#pragma once

///
/// \file sde.hpp
///
/// System and generator types, seeded Brownian paths, the Euler-Maruyama
/// step, and discrete-QR Lyapunov exponent estimation.
///
/// All drift expressions handed to the integrator are Ito drifts; the
/// integrator never adds a correction of its own.
///

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stomor/linalg.hpp"

namespace stomor {

/// dx = (A x + B u) dt + (F x + G u) dW,  y = C x.
struct LinearSde {
    Mat A;  // n x n
    Mat B;  // n x 1
    Mat C;  // 1 x n
    Mat F;  // n x n
    Mat G;  // n x 1

    Index order() const { return A.rows(); }
    /// Throws DimensionError on inconsistent shapes, Error on non-finite data.
    void validate() const;
};

/// dw = S w dt + J w dW,  u = L w.
struct SignalGenerator {
    Mat S;       // nu x nu
    Mat J;       // nu x nu
    Mat L;       // 1 x nu
    Vec omega0;  // nu

    Index order() const { return S.rows(); }
    void validate() const;
    bool is_deterministic() const { return J.isZero(0.0); }
};

enum class NoiseCoupling { shared, independent };

std::string to_string(NoiseCoupling c);
NoiseCoupling parse_coupling(const std::string& s);

/// Counter-mode seed derivation: splitmix64 finalizer applied to
/// (base, path_index, stream) in sequence. Distinct triples give
/// decorrelated engine seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t path_index, std::uint64_t stream = 0);

/// Incremental source of Wiener increments, N(0, dt) i.i.d.
class BrownianStream {
public:
    BrownianStream(std::uint64_t seed, std::uint64_t path_index, double dt,
                   std::uint64_t stream = 0);

    double next() { return sqrt_dt_ * normal_(engine_); }
    double dt() const { return dt_; }

private:
    double dt_;
    double sqrt_dt_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

struct BrownianPath {
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::vector<double> increments;
    std::uint64_t seed = 0;
    std::uint64_t path_index = 0;

    /// W at the n_steps + 1 grid points, starting from W_0 = 0.
    std::vector<double> cumulative() const;
};

/// Deterministic in (seed, path_index, dt, n_steps, stream). Throws
/// std::invalid_argument unless dt > 0.
BrownianPath generate_path(std::uint64_t seed, std::uint64_t path_index, double dt,
                           std::size_t n_steps, std::uint64_t stream = 0);

/// state + drift*dt + diffusion*dW.
Vec em_step(const Vec& state, const Vec& drift, const Vec& diffusion, double dt, double dW);

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;  // empty unless recording was requested
    std::vector<double> outputs;

    std::size_t size() const { return outputs.size(); }
};

struct LyapunovOptions {
    std::uint64_t seed = 0;
    double dt = 1e-3;
    double horizon = 100.0;
    std::size_t reorth_interval = 10;
};

struct LyapunovSpectrum {
    std::vector<double> exponents;  // non-increasing, 1/s
    std::vector<double> half_horizon_exponents;
    double horizon = 0.0;
    std::size_t reorthonormalization_interval = 0;
    /// Heuristic: full- and half-horizon estimates agree within 0.02 per exponent.
    bool converged = false;

    double max() const { return exponents.empty() ? 0.0 : exponents.front(); }
    double min() const { return exponents.empty() ? 0.0 : exponents.back(); }
};

inline constexpr double kLyapunovTolerance = 0.02;

/// Discrete-QR estimate of the Lyapunov spectrum of d(Phi) = (A dt + F dW) Phi.
LyapunovSpectrum lyapunov_exponents(const Mat& A, const Mat& F, const LyapunovOptions& opts);

struct AssumptionOptions {
    LyapunovOptions system{0, 1e-3, 100.0, 10};
    LyapunovOptions generator{1, 1e-4, 2000.0, 10};
    double tolerance = kLyapunovTolerance;
};

struct AssumptionReport {
    LyapunovSpectrum system_spectrum;
    LyapunovSpectrum generator_spectrum;
    bool system_negative = false;   // every exponent <= -tolerance
    bool generator_zero = false;    // every |exponent| < tolerance
    bool commuting = false;         // S J == J S
    /// Set only when `commuting`: spectrum of S - J^2/2 simple and on the
    /// imaginary axis, which makes every generator exponent zero.
    bool commuting_shortcut_zero = false;
    std::vector<Complex> shortcut_spectrum;
};

AssumptionReport check_assumptions(const LinearSde& sys, const SignalGenerator& gen,
                                   const AssumptionOptions& opts = {});

}  // namespace stomor
