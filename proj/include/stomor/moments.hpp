#pragma once

///
/// \file moments.hpp
///
/// The moment process X_t, its mean Pi, the second-moment matrix K and the
/// nearest Kronecker product factorization.
///

#include <string>
#include <vector>

#include "stomor/linalg.hpp"
#include "stomor/sde.hpp"

namespace stomor {

struct MeanMoment {
    Mat Pi;  // n x nu, empty when !solvable
    double residual = 0.0;
    bool solvable = false;
    /// The mean flow operator I(x)A - (S-J^2)^T(x)I - J^T(x)F is Hurwitz.
    bool attractive = false;
    double condition_estimate = 0.0;
};

struct SecondMoment {
    Mat K;      // n^2 x nu^2
    double residual = 0.0;
    Mat A_aug;  // I(x)A + A(x)I + F(x)F
    Mat S_aug;  // I(x)S + S(x)I
    Mat B_aug;
    std::vector<std::string> warnings;
};

struct KroneckerFactorization {
    Mat T1;
    Mat T2;
    double separability_error = 0.0;
    Vec singular_values;
};

/// Streams the moment SDE for one path. Holds only the constant operators.
class MomentStepper {
public:
    MomentStepper(const LinearSde& sys, const SignalGenerator& gen, double dt);

    /// dX = (AX - X(S-J^2) - FXJ + BL - GLJ) dt + (FX - XJ + GL) dW, in place.
    void step(Mat& X, double dW) const;

    /// dX = (AX - X(S-J^2) + BL) dt + (FX + GL) dWx - XJ dWs, in place.
    void step_two_noise(Mat& X, double dWx, double dWs) const;

private:
    double dt_;
    Mat A_, F_, J_, SmJ2_, BL_, GL_, forcing_;
    mutable Mat drift_, diff_, xj_;
};

Mat moment_sde_step(const Mat& X, const LinearSde& sys, const SignalGenerator& gen, double dt,
                    double dW);

Mat moment_sde_step_two_noise(const Mat& X, const LinearSde& sys, const SignalGenerator& gen,
                              double dt, double dWx, double dWs);

/// Throws SingularSystem when the mean flow operator is singular to tolerance.
MeanMoment solve_mean_moment(const LinearSde& sys, const SignalGenerator& gen);

/// Same as solve_mean_moment but reports solvable=false instead of throwing.
MeanMoment try_solve_mean_moment(const LinearSde& sys, const SignalGenerator& gen);

/// Solves A_aug K + B_aug = K S_aug. Requires J = 0 and a solvable Pi.
SecondMoment solve_second_moment(const LinearSde& sys, const SignalGenerator& gen,
                                 const MeanMoment& Pi);

/// Term B_aug of the augmented Sylvester equation.
Mat second_moment_forcing(const LinearSde& sys, const SignalGenerator& gen, const Mat& Pi);

/// One explicit Euler step of the second-moment ODE with symmetrized increment.
Mat second_moment_ode_step(const Mat& M, const Vec& m, double u, const LinearSde& sys, double dt);

/// Block (i,j) of Q, of size r2 x c2, vectorized into row j*r1 + i.
Mat rearrange(const Mat& Q, Index r1, Index c1, Index r2, Index c2);

/// Minimizes ||Q - T1 (x) T2||_F with T1 r1 x c1 and T2 r2 x c2.
KroneckerFactorization nearest_kronecker(const Mat& Q, Index r1, Index c1, Index r2, Index c2);

}  // namespace stomor
