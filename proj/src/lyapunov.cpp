#include <algorithm>
#include <cmath>
#include <functional>

#include "stomor/errors.hpp"
#include "stomor/sde.hpp"

namespace stomor {

LyapunovSpectrum lyapunov_exponents(const Mat& A, const Mat& F, const LyapunovOptions& opts) {
    if (A.rows() != A.cols() || F.rows() != F.cols() || A.rows() != F.rows()) {
        throw DimensionError("lyapunov_exponents: A and F must be square and of equal size");
    }
    if (!(opts.dt > 0.0) || !(opts.horizon >= opts.dt) || opts.reorth_interval == 0) {
        throw std::invalid_argument("lyapunov_exponents: need dt > 0, horizon >= dt, interval >= 1");
    }
    const Index n = A.rows();
    const auto steps = static_cast<std::size_t>(std::llround(opts.horizon / opts.dt));
    const std::size_t half = steps / 2;

    BrownianStream noise(opts.seed, 0, opts.dt);
    Eigen::MatrixXd frame = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd step(n, n);
    Eigen::MatrixXd next(n, n);
    const Eigen::MatrixXd Ad = Eigen::MatrixXd(A) * opts.dt;
    const Eigen::MatrixXd Fd = F;

    Eigen::VectorXd log_growth = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd half_growth;
    double half_time = 0.0;

    for (std::size_t k = 1; k <= steps; ++k) {
        step = Ad + Fd * noise.next();
        step.diagonal().array() += 1.0;
        next.noalias() = step * frame;
        frame.swap(next);

        if (k % opts.reorth_interval == 0 || k == steps) {
            QrResult f;
            try {
                f = qr(Mat(frame));
            } catch (const RankDeficient&) {
                throw RankDeficient("lyapunov_exponents: frame degenerated at step " +
                                    std::to_string(k));
            }
            for (Index i = 0; i < n; ++i) log_growth(i) += std::log(f.R(i, i));
            frame = f.Q;
            if (half_growth.size() == 0 && k >= half && half > 0) {
                half_growth = log_growth;
                half_time = static_cast<double>(k) * opts.dt;
            }
        }
    }

    const double total_time = static_cast<double>(steps) * opts.dt;
    LyapunovSpectrum out;
    out.horizon = total_time;
    out.reorthonormalization_interval = opts.reorth_interval;
    out.exponents.resize(n);
    for (Index i = 0; i < n; ++i) out.exponents[i] = log_growth(i) / total_time;
    std::sort(out.exponents.begin(), out.exponents.end(), std::greater<>());

    if (half_growth.size() == n && half_time > 0.0) {
        out.half_horizon_exponents.resize(n);
        for (Index i = 0; i < n; ++i) out.half_horizon_exponents[i] = half_growth(i) / half_time;
        std::sort(out.half_horizon_exponents.begin(), out.half_horizon_exponents.end(),
                  std::greater<>());
        out.converged = true;
        for (Index i = 0; i < n; ++i) {
            if (std::abs(out.exponents[i] - out.half_horizon_exponents[i]) >= kLyapunovTolerance) {
                out.converged = false;
            }
        }
    }
    return out;
}

AssumptionReport check_assumptions(const LinearSde& sys, const SignalGenerator& gen,
                                   const AssumptionOptions& opts) {
    sys.validate();
    gen.validate();
    AssumptionReport rep;
    rep.system_spectrum = lyapunov_exponents(sys.A, sys.F, opts.system);
    rep.generator_spectrum = lyapunov_exponents(gen.S, gen.J, opts.generator);

    rep.system_negative = std::all_of(rep.system_spectrum.exponents.begin(),
                                      rep.system_spectrum.exponents.end(),
                                      [&](double l) { return l <= -opts.tolerance; });
    rep.generator_zero = std::all_of(rep.generator_spectrum.exponents.begin(),
                                     rep.generator_spectrum.exponents.end(),
                                     [&](double l) { return std::abs(l) < opts.tolerance; });

    const Mat comm = gen.S * gen.J - gen.J * gen.S;
    const double scale = 1.0 + gen.S.norm() * gen.J.norm();
    rep.commuting = comm.norm() <= 1e-12 * scale;
    if (rep.commuting) {
        const Mat drift = gen.S - 0.5 * gen.J * gen.J;
        rep.shortcut_spectrum = spectrum(drift).eigenvalues;
        const double tol = 1e-9 * (1.0 + drift.norm());
        bool ok = true;
        for (std::size_t i = 0; i < rep.shortcut_spectrum.size(); ++i) {
            if (std::abs(rep.shortcut_spectrum[i].real()) > tol) ok = false;
            for (std::size_t j = i + 1; j < rep.shortcut_spectrum.size(); ++j) {
                if (std::abs(rep.shortcut_spectrum[i] - rep.shortcut_spectrum[j]) <= 1e-8) ok = false;
            }
        }
        rep.commuting_shortcut_zero = ok;
    }
    return rep;
}

}  // namespace stomor
