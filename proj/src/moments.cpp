#include "stomor/moments.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "stomor/errors.hpp"

namespace stomor {

namespace {

// Spectrum of the augmented operator is computed only up to this order.
constexpr Index kAugSpectrumLimit = 1024;

Mat mean_operator(const LinearSde& sys, const SignalGenerator& gen) {
    const Index n = sys.order();
    const Index nu = gen.order();
    const Mat SmJ2 = gen.S - gen.J * gen.J;
    return kron(identity(nu), sys.A) - kron(SmJ2.transpose(), identity(n)) -
           kron(gen.J.transpose(), sys.F);
}

Mat mean_forcing(const LinearSde& sys, const SignalGenerator& gen) {
    return sys.B * gen.L - sys.G * gen.L * gen.J;
}

MeanMoment mean_moment_impl(const LinearSde& sys, const SignalGenerator& gen, bool raise) {
    sys.validate();
    gen.validate();
    const Index n = sys.order();
    const Index nu = gen.order();
    const Mat op = mean_operator(sys, gen);
    const Mat forcing = mean_forcing(sys, gen);

    MeanMoment out;
    out.attractive = spectrum(op).is_hurwitz;
    SolveResult sol;
    try {
        sol = solve_dense(op, Mat(-vec(forcing)));
    } catch (const SingularSystem& e) {
        if (raise) {
            throw SingularSystem("mean moment equation has no unique solution: " +
                                     std::string(e.what()),
                                 e.condition_estimate());
        }
        out.condition_estimate = e.condition_estimate();
        return out;
    }
    out.Pi = unvec(sol.x, n, nu);
    out.condition_estimate = sol.condition_estimate;
    out.solvable = true;
    const Mat SmJ2 = gen.S - gen.J * gen.J;
    out.residual = (sys.A * out.Pi - out.Pi * SmJ2 - sys.F * out.Pi * gen.J + forcing).norm();
    return out;
}

}  // namespace

MomentStepper::MomentStepper(const LinearSde& sys, const SignalGenerator& gen, double dt)
    : dt_(dt),
      A_(sys.A),
      F_(sys.F),
      J_(gen.J),
      SmJ2_(gen.S - gen.J * gen.J),
      BL_(sys.B * gen.L),
      GL_(sys.G * gen.L),
      forcing_(sys.B * gen.L - sys.G * gen.L * gen.J) {
    if (sys.A.rows() != sys.B.rows() || gen.L.cols() != gen.S.rows()) {
        throw DimensionError("MomentStepper: system and generator shapes are inconsistent");
    }
}

void MomentStepper::step(Mat& X, double dW) const {
    if (X.rows() != A_.rows() || X.cols() != J_.rows()) {
        throw DimensionError("moment step: X has the wrong shape");
    }
    drift_.noalias() = A_ * X;
    drift_.noalias() -= X * SmJ2_;
    diff_.noalias() = F_ * X;
    drift_.noalias() -= diff_ * J_;
    drift_ += forcing_;
    diff_.noalias() -= X * J_;
    diff_ += GL_;
    X += drift_ * dt_ + diff_ * dW;
}

void MomentStepper::step_two_noise(Mat& X, double dWx, double dWs) const {
    if (X.rows() != A_.rows() || X.cols() != J_.rows()) {
        throw DimensionError("moment step: X has the wrong shape");
    }
    drift_.noalias() = A_ * X;
    drift_.noalias() -= X * SmJ2_;
    drift_ += BL_;
    diff_.noalias() = F_ * X;
    diff_ += GL_;
    xj_.noalias() = X * J_;
    X += drift_ * dt_ + diff_ * dWx - xj_ * dWs;
}

Mat moment_sde_step(const Mat& X, const LinearSde& sys, const SignalGenerator& gen, double dt,
                    double dW) {
    Mat out = X;
    MomentStepper(sys, gen, dt).step(out, dW);
    return out;
}

Mat moment_sde_step_two_noise(const Mat& X, const LinearSde& sys, const SignalGenerator& gen,
                              double dt, double dWx, double dWs) {
    Mat out = X;
    MomentStepper(sys, gen, dt).step_two_noise(out, dWx, dWs);
    return out;
}

MeanMoment solve_mean_moment(const LinearSde& sys, const SignalGenerator& gen) {
    return mean_moment_impl(sys, gen, true);
}

MeanMoment try_solve_mean_moment(const LinearSde& sys, const SignalGenerator& gen) {
    return mean_moment_impl(sys, gen, false);
}

Mat second_moment_forcing(const LinearSde& sys, const SignalGenerator& gen, const Mat& Pi) {
    const Mat BL = sys.B * gen.L;
    const Mat GL = sys.G * gen.L;
    const Mat FPi = sys.F * Pi;
    return kron(BL, Pi) + kron(Pi, BL) + kron(GL, FPi) + kron(FPi, GL) + kron(GL, GL);
}

SecondMoment solve_second_moment(const LinearSde& sys, const SignalGenerator& gen,
                                 const MeanMoment& Pi) {
    sys.validate();
    gen.validate();
    if (!Pi.solvable) {
        throw std::invalid_argument("solve_second_moment: mean moment is not available");
    }
    if (!gen.J.isZero(0.0)) {
        throw std::invalid_argument("solve_second_moment: requires a generator with J = 0");
    }
    const Index n = sys.order();
    const Index nu = gen.order();
    const Index nn = n * n;
    const Index mm = nu * nu;

    SecondMoment out;
    out.A_aug = kron(identity(n), sys.A) + kron(sys.A, identity(n)) + kron(sys.F, sys.F);
    out.S_aug = kron(identity(nu), gen.S) + kron(gen.S, identity(nu));
    out.B_aug = second_moment_forcing(sys, gen, Pi.Pi);

    if (nn <= kAugSpectrumLimit) {
        const SpectrumReport sa = spectrum(out.A_aug);
        if (!sa.is_hurwitz) {
            out.warnings.push_back("augmented system operator is not Hurwitz (max real part " +
                                   std::to_string(sa.max_real_part) + ")");
        }
    } else {
        out.warnings.push_back("augmented system spectrum not evaluated at order " +
                               std::to_string(nn));
    }
    const SpectrumReport ss = spectrum(gen.S);
    const double stol = 1e-9 * (1.0 + gen.S.norm());
    for (std::size_t i = 0; i < ss.eigenvalues.size(); ++i) {
        if (std::abs(ss.eigenvalues[i].real()) > stol) {
            out.warnings.push_back("generator eigenvalue off the imaginary axis");
            break;
        }
    }
    for (std::size_t i = 0; i + 1 < ss.eigenvalues.size(); ++i) {
        if (std::abs(ss.eigenvalues[i] - ss.eigenvalues[i + 1]) <= stol) {
            out.warnings.push_back("generator has repeated eigenvalues");
            break;
        }
    }

    // Complex Schur form of S_aug turns the Sylvester equation into a sequence
    // of shifted solves with the augmented system operator.
    Eigen::ComplexSchur<CMat> schur(CMat(out.S_aug.cast<Complex>()));
    if (schur.info() != Eigen::Success) {
        throw ConvergenceError("solve_second_moment: Schur decomposition failed");
    }
    const CMat U = schur.matrixU();
    const CMat T = schur.matrixT();
    const CMat Aaug = out.A_aug.cast<Complex>();

    struct Shifted {
        Complex shift;
        Eigen::PartialPivLU<CMat> lu;
    };
    std::vector<Shifted> cache;
    const double shift_tol = 1e-12 * (1.0 + T.diagonal().cwiseAbs().maxCoeff());
    auto factor_for = [&](Complex t) -> const Eigen::PartialPivLU<CMat>& {
        for (const auto& c : cache) {
            if (std::abs(c.shift - t) <= shift_tol) return c.lu;
        }
        CMat shifted = Aaug;
        shifted.diagonal().array() -= t;
        Eigen::PartialPivLU<CMat> lu(shifted);
        const double rcond = lu.rcond();
        const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
        if (!(cond <= kSingularConditionLimit)) {
            throw SingularSystem("second moment equation is singular to tolerance", cond);
        }
        cache.push_back({t, std::move(lu)});
        return cache.back().lu;
    };

    // Solves A_aug X - X S_aug = R.
    auto sylvester = [&](const Mat& R) {
        const CMat rhs = R.cast<Complex>() * U;
        CMat Y(nn, mm);
        for (Index k = 0; k < mm; ++k) {
            CMat r = rhs.col(k);
            for (Index i = 0; i < k; ++i) r += T(i, k) * Y.col(i);
            Y.col(k) = factor_for(T(k, k)).solve(r);
        }
        return Mat((Y * U.adjoint()).real());
    };

    auto residual_of = [&](const Mat& K) {
        return Mat(out.A_aug * K + out.B_aug - K * out.S_aug);
    };

    out.K = sylvester(Mat(-out.B_aug));
    out.K += sylvester(Mat(-residual_of(out.K)));
    out.residual = residual_of(out.K).norm();
    return out;
}

Mat second_moment_ode_step(const Mat& M, const Vec& m, double u, const LinearSde& sys,
                           double dt) {
    const Index n = sys.order();
    if (M.rows() != n || M.cols() != n || m.size() != n) {
        throw DimensionError("second_moment_ode_step: M or m has the wrong shape");
    }
    const Vec Bu = sys.B.col(0) * u;
    const Vec Gu = sys.G.col(0) * u;
    const Vec Fm = sys.F * m;
    Mat d = sys.A * M + M * sys.A.transpose() + sys.F * M * sys.F.transpose();
    d += Bu * m.transpose() + m * Bu.transpose();
    d += Fm * Gu.transpose() + Gu * Fm.transpose();
    d += Gu * Gu.transpose();
    const Mat sym = 0.5 * (d + d.transpose());
    return M + dt * sym;
}

Mat rearrange(const Mat& Q, Index r1, Index c1, Index r2, Index c2) {
    if (r1 < 1 || c1 < 1 || r2 < 1 || c2 < 1 || Q.rows() != r1 * r2 || Q.cols() != c1 * c2) {
        throw DimensionError("rearrange: Q is " + std::to_string(Q.rows()) + "x" +
                             std::to_string(Q.cols()) + ", incompatible with block sizes");
    }
    Mat out(r1 * c1, r2 * c2);
    for (Index j = 0; j < c1; ++j) {
        for (Index i = 0; i < r1; ++i) {
            out.row(j * r1 + i) = vec(Q.block(i * r2, j * c2, r2, c2)).transpose();
        }
    }
    return out;
}

KroneckerFactorization nearest_kronecker(const Mat& Q, Index r1, Index c1, Index r2, Index c2) {
    const Mat R = rearrange(Q, r1, c1, r2, c2);
    KroneckerFactorization out;
    const SvdResult s = svd(R);
    out.singular_values = s.singular_values;
    if (s.singular_values.size() == 0 || s.singular_values(0) == 0.0) {
        out.T1 = Mat::Zero(r1, c1);
        out.T2 = Mat::Zero(r2, c2);
        return out;
    }
    const double root = std::sqrt(s.singular_values(0));
    Mat u = s.U.col(0) * root;
    Mat v = s.V.col(0) * root;
    Index imax = 0;
    u.col(0).cwiseAbs().maxCoeff(&imax);
    if (u(imax, 0) < 0.0) {
        u = -u;
        v = -v;
    }
    out.T1 = unvec(u, r1, c1);
    out.T2 = unvec(v, r2, c2);
    out.separability_error = s.singular_values.tail(s.singular_values.size() - 1).norm();
    return out;
}

}  // namespace stomor
