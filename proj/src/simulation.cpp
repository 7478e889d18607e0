#include "stomor/simulation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "stomor/errors.hpp"
#include "stomor/moments.hpp"

namespace stomor {

namespace {

// One Euler-Maruyama step of dx = (A x + b u) dt + (F x + g u) dW, with the
// drift matrix pre-scaled by dt.
class AffineStepper {
public:
    AffineStepper(const Mat& A, const Mat& B, const Mat& F, const Mat& G, double dt)
        : n_(A.rows()),
          Ad_(A * dt),
          F_(F),
          bd_(B.col(0) * dt),
          g_(G.col(0)),
          has_f_(!F.isZero(0.0)),
          has_g_(!G.isZero(0.0)),
          tmp_(A.rows()) {}

    void step(Vec& x, double u, double dW) {
        const double* ad = Ad_.data();
        const double* f = F_.data();
        const double* xp = x.data();
        for (Index i = 0; i < n_; ++i) {
            double s = xp[i] + bd_[i] * u;
            if (has_g_) s += g_[i] * u * dW;
            const double* arow = ad + i * n_;
            if (has_f_) {
                const double* frow = f + i * n_;
                for (Index j = 0; j < n_; ++j) s += (arow[j] + dW * frow[j]) * xp[j];
            } else {
                for (Index j = 0; j < n_; ++j) s += arow[j] * xp[j];
            }
            tmp_[i] = s;
        }
        x.swap(tmp_);
    }

private:
    Index n_;
    Mat Ad_;
    Mat F_;
    Vec bd_;
    Vec g_;
    bool has_f_;
    bool has_g_;
    Vec tmp_;
};

double max_abs(const Vec& v) {
    double m = 0.0;
    for (Index i = 0; i < v.size(); ++i) {
        const double a = std::abs(v[i]);
        if (!(a <= m)) m = a;  // propagates NaN as a large value
    }
    return m;
}

}  // namespace

double SquareWave::operator()(double t) const {
    const double s = std::sin(2.0 * std::numbers::pi * t / period);
    if (s > 0.0) return amplitude;
    if (s < 0.0) return -amplitude;
    return 0.0;
}

std::size_t SimulationOptions::steps() const {
    return static_cast<std::size_t>(std::llround(horizon / dt));
}

void SimulationOptions::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
    if (!(horizon >= 0.0)) throw std::invalid_argument("horizon must be non-negative");
    if (record_every == 0) throw std::invalid_argument("record interval must be at least 1");
    if (input == InputMode::square_wave && !(square_wave.period > 0.0)) {
        throw std::invalid_argument("square-wave period must be positive");
    }
}

void simulate_path(const CoSimulationSetup& setup, const SimulationOptions& opts,
                   std::uint64_t seed, std::uint64_t path_index, const SampleSink& sink) {
    if (setup.sys == nullptr || setup.gen == nullptr) {
        throw std::invalid_argument("simulate_path: system and generator are required");
    }
    opts.validate();
    const LinearSde& sys = *setup.sys;
    const SignalGenerator& gen = *setup.gen;
    const ReducedModel* rom = setup.rom;
    const Index n = sys.order();
    const Index nu = gen.order();
    const bool track_moment = setup.X0.size() > 0;
    if (track_moment && (setup.X0.rows() != n || setup.X0.cols() != nu)) {
        throw DimensionError("simulate_path: X0 must be " + std::to_string(n) + "x" + std::to_string(nu));
    }
    if (setup.omega0.size() != nu) throw DimensionError("simulate_path: omega0 has the wrong size");
    if (rom != nullptr) {
        rom->validate();
        if (rom->kind == RomKind::exact && !track_moment) {
            throw std::invalid_argument("simulate_path: the exact model needs the moment process");
        }
        if (rom->kind == RomKind::exact && rom->order() != nu) {
            throw DimensionError("simulate_path: exact model order differs from the generator");
        }
    }

    const double dt = opts.dt;
    const bool use_generator = opts.input == InputMode::generator;
    const bool gen_noisy = !gen.is_deterministic();
    const bool independent = opts.coupling == NoiseCoupling::independent;

    AffineStepper plant(sys.A, sys.B, sys.F, sys.G, dt);
    const Mat zero_col = Mat::Zero(nu, 1);
    AffineStepper source(gen.S, zero_col, gen.J, zero_col, dt);
    std::optional<AffineStepper> reduced;
    if (rom != nullptr) reduced.emplace(rom->Ar, rom->Br, rom->Fr, rom->Gr, dt);
    std::optional<MomentStepper> moment;
    if (track_moment) moment.emplace(sys, gen, dt);

    BrownianStream sys_noise(seed, path_index, dt, 0);
    BrownianStream gen_noise(seed, path_index, dt, 1);

    Vec x = Vec::Zero(n);
    Vec w = setup.omega0;
    Vec xr = rom != nullptr ? Vec::Zero(rom->order()) : Vec();
    Mat X = setup.X0;
    Vec Cr = rom != nullptr && rom->kind != RomKind::exact ? Vec(rom->Cr.row(0).transpose()) : Vec();
    const Vec c = sys.C.row(0).transpose();
    const Vec l = gen.L.row(0).transpose();

    const std::size_t steps = opts.steps();
    PathSample sample;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * dt;
        const double u = use_generator ? l.dot(w) : opts.square_wave(t);

        if (k % opts.record_every == 0) {
            sample.step = k;
            sample.t = t;
            sample.u = u;
            sample.omega = &w;
            sample.y = c.dot(x);
            sample.y_moment = 0.0;
            sample.y_rom = 0.0;
            if (track_moment) {
                const Mat cx = sys.C * X;
                if (use_generator) sample.y_moment = (cx * w)(0, 0);
                if (rom != nullptr && rom->kind == RomKind::exact) {
                    sample.y_rom = (cx * rom->output_transform * xr)(0, 0);
                }
            }
            if (rom != nullptr && rom->kind != RomKind::exact) sample.y_rom = Cr.dot(xr);
            sink(sample);
        }
        if (k == steps) break;

        const double dW = sys_noise.next();
        double dWs = 0.0;
        if (gen_noisy) dWs = independent ? gen_noise.next() : dW;

        plant.step(x, u, dW);
        if (reduced) reduced->step(xr, u, dW);
        if (moment) {
            if (independent) {
                moment->step_two_noise(X, dW, dWs);
            } else {
                moment->step(X, dW);
            }
        }
        if (use_generator) source.step(w, 0.0, dWs);

        bool bad = !(max_abs(x) <= opts.divergence_threshold) ||
                   !(max_abs(w) <= opts.divergence_threshold);
        if (reduced) bad = bad || !(max_abs(xr) <= opts.divergence_threshold);
        if (moment && (k % 16 == 0 || k + 1 == steps)) {
            const double mx = X.cwiseAbs().maxCoeff();
            bad = bad || !(mx <= opts.divergence_threshold);
        }
        if (bad) {
            throw DivergenceError("path " + std::to_string(path_index) + " diverged at step " +
                                      std::to_string(k + 1),
                                  k + 1);
        }
    }
}

CoSimulationTrace simulate_interconnection(const CoSimulationSetup& setup,
                                           const SimulationOptions& opts, std::uint64_t seed,
                                           std::uint64_t path_index) {
    CoSimulationTrace trace;
    simulate_path(setup, opts, seed, path_index, [&](const PathSample& s) {
        trace.times.push_back(s.t);
        trace.u.push_back(s.u);
        trace.y.push_back(s.y);
        trace.y_rom.push_back(s.y_rom);
        trace.y_moment.push_back(s.y_moment);
    });
    return trace;
}

Trajectory simulate_system(const LinearSde& sys, const SignalGenerator& gen,
                           const SimulationOptions& opts, std::uint64_t seed,
                           std::uint64_t path_index) {
    CoSimulationSetup setup;
    setup.sys = &sys;
    setup.gen = &gen;
    setup.omega0 = gen.omega0;
    Trajectory traj;
    simulate_path(setup, opts, seed, path_index, [&](const PathSample& s) {
        traj.times.push_back(s.t);
        traj.outputs.push_back(s.y);
    });
    return traj;
}

}  // namespace stomor
