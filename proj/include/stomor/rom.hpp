#pragma once

///
/// \file rom.hpp
///
/// Reduced-order model families: exact stochastic, moment-mean and
/// mean-square, plus the helpers that fix their free parameters.
///

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "stomor/linalg.hpp"
#include "stomor/moments.hpp"
#include "stomor/sde.hpp"

namespace stomor {

enum class RomKind { exact, moment_mean, mean_square };

std::string to_string(RomKind k);
RomKind parse_rom_kind(const std::string& s);

/// A spectrum or exponent check. `value` is the largest real part (or the
/// largest Lyapunov exponent); the check passes when it is negative.
struct Certificate {
    std::string name;
    bool pass = false;
    double value = 0.0;
};

/// dx = (Ar x + Br u) dt + (Fr x + Gr u) dW.
///
/// For the exact kind the output is C X_t T x with T = output_transform and
/// X_t the co-simulated moment process; Cr is unused. Otherwise y = Cr x.
struct ReducedModel {
    RomKind kind = RomKind::exact;
    Mat Ar, Br, Fr, Gr, Cr;
    Mat output_transform;
    std::vector<Certificate> certificates;
    std::vector<std::pair<std::string, double>> diagnostics;
    std::vector<std::string> warnings;

    Index order() const { return Ar.rows(); }
    void validate() const;
    const Certificate* certificate(const std::string& name) const;
    std::optional<double> diagnostic(const std::string& name) const;
};

enum class RMethod { rank_one_update, rotation_fallback };

std::string to_string(RMethod m);

struct RConstruction {
    Mat R;
    Mat Rinv;
    RMethod method = RMethod::rank_one_update;
};

/// Certificate names.
inline constexpr const char* kCertExponents = "lyapunov_exponents";
inline constexpr const char* kCertMeanSquareStable = "mean_square_stability";
inline constexpr const char* kCertMeanFlow = "mean_flow_attractive";
inline constexpr const char* kCertArHurwitz = "ar_hurwitz";

/// Separability errors above this produce a warning.
inline constexpr double kSeparabilityWarning = 1e-8;

struct ExactRomOptions {
    bool estimate_exponents = true;
    LyapunovOptions lyapunov{7, 1e-3, 100.0, 10};
};

/// Ar = S - Br L, Fr = J - Gr L. Certificates are recorded but never fatal.
ReducedModel build_exact_rom(const LinearSde& sys, const SignalGenerator& gen, const Mat& Br,
                             const Mat& Gr, const ExactRomOptions& opts = {});

/// Ar = S - Br L, Cr = C Pi. Throws CertificateFailed unless the mean flow
/// operator I(x)Ar - (S-J^2)^T(x)I - J^T(x)Fr is Hurwitz.
ReducedModel build_mean_rom(const LinearSde& sys, const SignalGenerator& gen,
                            const MeanMoment& Pi, const Mat& Br, const Mat& Fr, const Mat& Gr);

/// Model in the coordinates xi = R^{-1} x. Throws SingularSystem for singular R.
ReducedModel normalize_coordinates(const ReducedModel& model, const Mat& R);

/// Invertible R with Cr R = CPi. Throws NoSolution when Cr or CPi is zero.
RConstruction construct_R(const Mat& Cr, const Mat& CPi);

/// Br as an explicit column, or as pole targets for Ar.
using BrSpec = std::variant<Mat, std::vector<Complex>>;

/// Mean-square model for J = 0. `Gr` empty means Gr = 0 and Fr comes from a
/// nearest Kronecker factorization; otherwise Fr is fitted by least squares.
ReducedModel build_meansquare_rom(const LinearSde& sys, const SignalGenerator& gen,
                                  const MeanMoment& Pi, const SecondMoment& K, const BrSpec& Br,
                                  const std::optional<Mat>& Gr = std::nullopt);

/// Br with spectrum(S - Br L) equal to `targets`. Throws NotPlaceable for an
/// unobservable (L, S) pair and std::invalid_argument for targets that are not
/// closed under conjugation or have the wrong count.
Mat place_poles(const Mat& S, const Mat& L, const std::vector<Complex>& targets);

/// Largest real part of the spectrum of I(x)Ar + Ar(x)I + Fr(x)Fr.
double mean_square_abscissa(const Mat& Ar, const Mat& Fr);

}  // namespace stomor
