#pragma once

///
/// \file simulation.hpp
///
/// Euler-Maruyama co-simulation of generator, full system, reduced model and
/// moment process on seeded Brownian streams.
///

#include <cstdint>
#include <functional>
#include <optional>

#include "stomor/linalg.hpp"
#include "stomor/rom.hpp"
#include "stomor/sde.hpp"

namespace stomor {

enum class InputMode { generator, square_wave };

/// u(t) = amplitude * sign(sin(2 pi t / period)).
struct SquareWave {
    double amplitude = -0.05;
    double period = 10.0;

    double operator()(double t) const;
};

struct SimulationOptions {
    double dt = 1e-3;
    double horizon = 10.0;
    NoiseCoupling coupling = NoiseCoupling::shared;
    InputMode input = InputMode::generator;
    SquareWave square_wave;
    /// A sample is delivered every `record_every` steps, starting at t = 0.
    std::size_t record_every = 1;
    double divergence_threshold = 1e12;

    std::size_t steps() const;
    void validate() const;
};

/// Everything the integrator advances. `rom` may be null. The moment process
/// is advanced iff X0 is non-empty; the exact kind requires it.
struct CoSimulationSetup {
    const LinearSde* sys = nullptr;
    const SignalGenerator* gen = nullptr;
    const ReducedModel* rom = nullptr;
    Mat X0;
    Vec omega0;
};

struct PathSample {
    std::size_t step = 0;
    double t = 0.0;
    double u = 0.0;
    double y = 0.0;
    double y_rom = 0.0;      // 0 without a reduced model
    double y_moment = 0.0;   // C X_t w_t, 0 without a moment process
    const Vec* omega = nullptr;  // generator state, valid during the callback
};

using SampleSink = std::function<void(const PathSample&)>;

/// Runs one path. System noise comes from stream 0 of (seed, path_index); a
/// generator with J != 0 under independent coupling uses stream 1. The
/// reduced model always shares the system increments. Throws DivergenceError
/// when a state leaves the guard.
void simulate_path(const CoSimulationSetup& setup, const SimulationOptions& opts,
                   std::uint64_t seed, std::uint64_t path_index, const SampleSink& sink);

struct CoSimulationTrace {
    std::vector<double> times;
    std::vector<double> u;
    std::vector<double> y;
    std::vector<double> y_rom;
    std::vector<double> y_moment;
};

/// Collects simulate_path samples into vectors.
CoSimulationTrace simulate_interconnection(const CoSimulationSetup& setup,
                                           const SimulationOptions& opts, std::uint64_t seed,
                                           std::uint64_t path_index = 0);

/// Full-system output trajectory only (no reduced model, no moment process).
Trajectory simulate_system(const LinearSde& sys, const SignalGenerator& gen,
                           const SimulationOptions& opts, std::uint64_t seed,
                           std::uint64_t path_index = 0);

}  // namespace stomor
