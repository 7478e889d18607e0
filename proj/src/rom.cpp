#include "stomor/rom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stomor/errors.hpp"

namespace stomor {

namespace {

void require_column(const Mat& m, Index rows, const char* name) {
    if (m.rows() != rows || m.cols() != 1) {
        throw DimensionError(std::string(name) + " must be " + std::to_string(rows) + "x1");
    }
}

void require_square(const Mat& m, Index n, const char* name) {
    if (m.rows() != n || m.cols() != n) {
        throw DimensionError(std::string(name) + " must be " + std::to_string(n) + "x" +
                             std::to_string(n));
    }
}

Certificate spectrum_certificate(const std::string& name, const Mat& op, Complex* worst) {
    const SpectrumReport rep = spectrum(op);
    if (worst != nullptr) *worst = rep.eigenvalues.front();
    return {name, rep.is_hurwitz, rep.max_real_part};
}

[[noreturn]] void certificate_failure(const std::string& what, const Certificate& c,
                                      Complex worst) {
    throw CertificateFailed(what + " (eigenvalue " + std::to_string(worst.real()) +
                                (worst.imag() < 0 ? "" : "+") + std::to_string(worst.imag()) +
                                "i)",
                            c.name, worst);
}

Mat inverse(const Mat& R) {
    return solve_dense(R, identity(R.rows())).x;
}

// Cr = sqrt(|T1||T2|) T1/|T1|, the symmetric reconciliation of two factors
// that should coincide.
Mat reconcile(const KroneckerFactorization& f) {
    const double n1 = f.T1.norm();
    const double n2 = f.T2.norm();
    if (n1 == 0.0 || n2 == 0.0) return Mat::Zero(f.T1.rows(), f.T1.cols());
    return std::sqrt(n1 * n2) * f.T1 / n1;
}

double asymmetry(const KroneckerFactorization& f) {
    const double n1 = f.T1.norm();
    const double n2 = f.T2.norm();
    if (n1 == 0.0 || n2 == 0.0) return 0.0;
    return (f.T1 / n1 - f.T2 / n2).norm();
}

// Residual of Fr(x)Fr + GL(x)Fr R + Fr R(x)GL + GL(x)GL - rhs.
Mat fr_equation_residual(const Mat& Fr, const Mat& GL, const Mat& R, const Mat& rhs) {
    const Mat FR = Fr * R;
    return kron(Fr, Fr) + kron(GL, FR) + kron(FR, GL) + kron(GL, GL) - rhs;
}

// Levenberg-Marquardt on the full Fr equation for given Gr.
Mat fit_fr(Mat Fr, const Mat& GL, const Mat& R, const Mat& rhs, double& residual) {
    const Index nu = Fr.rows();
    const Index p = nu * nu;
    double lambda = 1e-3;
    Mat r = fr_equation_residual(Fr, GL, R, rhs);
    double cost = r.squaredNorm();
    bool stalled = false;
    for (int it = 0; it < 200 && cost > 1e-28 && !stalled; ++it) {
        Mat Jac(rhs.size(), p);
        for (Index j = 0; j < nu; ++j) {
            for (Index i = 0; i < nu; ++i) {
                Mat E = Mat::Zero(nu, nu);
                E(i, j) = 1.0;
                const Mat ER = E * R;
                const Mat d = kron(E, Fr) + kron(Fr, E) + kron(GL, ER) + kron(ER, GL);
                Jac.col(j * nu + i) = vec(d);
            }
        }
        const Mat JtJ = Jac.transpose() * Jac;
        const Mat g = Jac.transpose() * vec(r);
        bool improved = false;
        for (int k = 0; k < 30 && !improved; ++k) {
            Mat Hd = JtJ;
            Hd.diagonal().array() += lambda * (1.0 + JtJ.diagonal().array());
            Mat delta;
            try {
                delta = solve_dense(Hd, Mat(-g)).x;
            } catch (const SingularSystem&) {
                lambda *= 10.0;
                continue;
            }
            const Mat trial = Fr + unvec(delta, nu, nu);
            const Mat rt = fr_equation_residual(trial, GL, R, rhs);
            const double ct = rt.squaredNorm();
            if (ct < cost) {
                Fr = trial;
                r = rt;
                const double gain = cost - ct;
                cost = ct;
                lambda = std::max(lambda / 10.0, 1e-12);
                improved = true;
                stalled = gain <= 1e-15 * (1.0 + cost);
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) stalled = true;
    }
    residual = std::sqrt(cost);
    return Fr;
}

}  // namespace

std::string to_string(RomKind k) {
    switch (k) {
        case RomKind::exact: return "exact";
        case RomKind::moment_mean: return "mean";
        case RomKind::mean_square: return "meansquare";
    }
    return "exact";
}

RomKind parse_rom_kind(const std::string& s) {
    if (s == "exact") return RomKind::exact;
    if (s == "mean") return RomKind::moment_mean;
    if (s == "meansquare") return RomKind::mean_square;
    throw std::invalid_argument("unknown reduction method '" + s + "'");
}

std::string to_string(RMethod m) {
    return m == RMethod::rank_one_update ? "rank_one_update" : "rotation_fallback";
}

void ReducedModel::validate() const {
    const Index nu = Ar.rows();
    if (nu < 1) throw DimensionError("reduced model order must be at least 1");
    require_square(Ar, nu, "Ar");
    require_square(Fr, nu, "Fr");
    require_column(Br, nu, "Br");
    require_column(Gr, nu, "Gr");
    if (kind == RomKind::exact) {
        require_square(output_transform, nu, "output_transform");
    } else if (Cr.rows() != 1 || Cr.cols() != nu) {
        throw DimensionError("Cr must be 1x" + std::to_string(nu));
    }
    for (const Mat* m : {&Ar, &Br, &Fr, &Gr}) {
        if (!m->allFinite()) throw Error("reduced model has non-finite entries");
    }
}

const Certificate* ReducedModel::certificate(const std::string& name) const {
    for (const auto& c : certificates) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

std::optional<double> ReducedModel::diagnostic(const std::string& name) const {
    for (const auto& [key, value] : diagnostics) {
        if (key == name) return value;
    }
    return std::nullopt;
}

double mean_square_abscissa(const Mat& Ar, const Mat& Fr) {
    const Index nu = Ar.rows();
    return spectrum(kron(identity(nu), Ar) + kron(Ar, identity(nu)) + kron(Fr, Fr)).max_real_part;
}

ReducedModel build_exact_rom(const LinearSde& sys, const SignalGenerator& gen, const Mat& Br,
                             const Mat& Gr, const ExactRomOptions& opts) {
    sys.validate();
    gen.validate();
    const Index nu = gen.order();
    require_column(Br, nu, "Br");
    require_column(Gr, nu, "Gr");

    ReducedModel m;
    m.kind = RomKind::exact;
    m.Ar = gen.S - Br * gen.L;
    m.Fr = gen.J - Gr * gen.L;
    m.Br = Br;
    m.Gr = Gr;
    m.Cr = Mat::Zero(1, nu);
    m.output_transform = identity(nu);

    if (opts.estimate_exponents) {
        const LyapunovSpectrum ls = lyapunov_exponents(m.Ar, m.Fr, opts.lyapunov);
        m.certificates.push_back({kCertExponents, ls.max() < 0.0, ls.max()});
        if (!ls.converged) m.warnings.push_back("reduced-model exponent estimate not converged");
    }
    const double ms = mean_square_abscissa(m.Ar, m.Fr);
    m.certificates.push_back({kCertMeanSquareStable, ms < 0.0, ms});
    for (const auto& c : m.certificates) {
        if (!c.pass) m.warnings.push_back("certificate " + c.name + " failed");
    }
    return m;
}

ReducedModel build_mean_rom(const LinearSde& sys, const SignalGenerator& gen,
                            const MeanMoment& Pi, const Mat& Br, const Mat& Fr, const Mat& Gr) {
    sys.validate();
    gen.validate();
    if (!Pi.solvable) throw std::invalid_argument("build_mean_rom: mean moment is not available");
    const Index nu = gen.order();
    require_column(Br, nu, "Br");
    require_column(Gr, nu, "Gr");
    require_square(Fr, nu, "Fr");

    ReducedModel m;
    m.kind = RomKind::moment_mean;
    m.Ar = gen.S - Br * gen.L;
    m.Br = Br;
    m.Fr = Fr;
    m.Gr = Gr;
    m.Cr = sys.C * Pi.Pi;
    m.output_transform = identity(nu);
    m.diagnostics.emplace_back("pi_residual", Pi.residual);

    const Mat SmJ2 = gen.S - gen.J * gen.J;
    const Mat op = kron(identity(nu), m.Ar) - kron(SmJ2.transpose(), identity(nu)) -
                   kron(gen.J.transpose(), Fr);
    Complex worst;
    const Certificate c = spectrum_certificate(kCertMeanFlow, op, &worst);
    m.certificates.push_back(c);
    if (!c.pass) certificate_failure("moment-mean model: reduced mean flow is not attractive", c, worst);

    const double ms = mean_square_abscissa(m.Ar, m.Fr);
    m.certificates.push_back({kCertMeanSquareStable, ms < 0.0, ms});
    if (ms >= 0.0) m.warnings.push_back("certificate " + std::string(kCertMeanSquareStable) + " failed");
    return m;
}

ReducedModel normalize_coordinates(const ReducedModel& model, const Mat& R) {
    model.validate();
    const Index nu = model.order();
    require_square(R, nu, "R");
    const Mat Rinv = inverse(R);
    ReducedModel out = model;
    out.Ar = Rinv * model.Ar * R;
    out.Br = Rinv * model.Br;
    out.Fr = Rinv * model.Fr * R;
    out.Gr = Rinv * model.Gr;
    if (model.kind == RomKind::exact) {
        out.output_transform = model.output_transform * R;
    } else {
        out.Cr = model.Cr * R;
    }
    return out;
}

RConstruction construct_R(const Mat& Cr, const Mat& CPi) {
    if (Cr.rows() != 1 || CPi.rows() != 1 || Cr.cols() != CPi.cols() || Cr.cols() < 1) {
        throw DimensionError("construct_R: Cr and C*Pi must be 1xnu rows of equal length");
    }
    const Index nu = Cr.cols();
    const double ncr = Cr.norm();
    const double ncp = CPi.norm();
    if (ncr == 0.0) throw NoSolution("construct_R: Cr is zero, no R satisfies Cr R = C Pi");
    if (ncp == 0.0) throw NoSolution("construct_R: C Pi is zero, every solution R is singular");

    RConstruction out;
    const double cosine = (Cr * CPi.transpose())(0, 0) / (ncr * ncp);
    if (nu == 1 || std::abs(cosine) >= 1e-3) {
        out.method = RMethod::rank_one_update;
        out.R = identity(nu) + Cr.transpose() * (CPi - Cr) / (ncr * ncr);
    } else {
        // Rotation P in span{a, b} with P a = b, then R = (|CPi|/|Cr|) P^T.
        out.method = RMethod::rotation_fallback;
        const Vec a = Cr.transpose() / ncr;
        const Vec b = CPi.transpose() / ncp;
        const double c = a.dot(b);
        const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        const Vec w = (b - c * a) / s;
        Mat P = identity(nu);
        P += s * (w * a.transpose() - a * w.transpose());
        P += (c - 1.0) * (a * a.transpose() + w * w.transpose());
        out.R = (ncp / ncr) * P.transpose();
    }
    out.Rinv = inverse(out.R);
    return out;
}

Mat place_poles(const Mat& S, const Mat& L, const std::vector<Complex>& targets) {
    const Index nu = S.rows();
    require_square(S, nu, "S");
    if (L.rows() != 1 || L.cols() != nu) throw DimensionError("L must be 1x" + std::to_string(nu));
    if (static_cast<Index>(targets.size()) != nu) {
        throw std::invalid_argument("place_poles: need " + std::to_string(nu) + " targets, got " +
                                    std::to_string(targets.size()));
    }
    std::vector<bool> used(targets.size(), false);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (used[i]) continue;
        const Complex t = targets[i];
        const double tol = 1e-9 * (1.0 + std::abs(t));
        used[i] = true;
        if (std::abs(t.imag()) <= tol) continue;
        bool found = false;
        for (std::size_t j = i + 1; j < targets.size() && !found; ++j) {
            if (!used[j] && std::abs(targets[j] - std::conj(t)) <= tol) {
                used[j] = true;
                found = true;
            }
        }
        if (!found) throw std::invalid_argument("place_poles: targets are not closed under conjugation");
    }

    const Mat St = S.transpose();
    Mat ctrb(nu, nu);
    Mat col = L.transpose();
    for (Index k = 0; k < nu; ++k) {
        ctrb.col(k) = col;
        col = St * col;
    }
    const Index rank = numerical_rank(ctrb, 1e-10);
    if (rank < nu) {
        throw NotPlaceable("place_poles: (L, S) is not observable", static_cast<std::size_t>(nu - rank));
    }

    // Characteristic polynomial of the targets, highest power first.
    std::vector<Complex> coeffs{1.0};
    for (const Complex& t : targets) {
        std::vector<Complex> next(coeffs.size() + 1, 0.0);
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            next[k] += coeffs[k];
            next[k + 1] -= t * coeffs[k];
        }
        coeffs = std::move(next);
    }
    Mat pS = Mat::Zero(nu, nu);
    for (const Complex& c : coeffs) pS = pS * St + c.real() * identity(nu);

    Mat en = Mat::Zero(nu, 1);
    en(nu - 1, 0) = 1.0;
    const Mat y = solve_dense(Mat(ctrb.transpose()), en).x;
    const Mat K = y.transpose() * pS;
    return K.transpose();
}

ReducedModel build_meansquare_rom(const LinearSde& sys, const SignalGenerator& gen,
                                  const MeanMoment& Pi, const SecondMoment& K, const BrSpec& Br,
                                  const std::optional<Mat>& Gr) {
    sys.validate();
    gen.validate();
    if (!gen.J.isZero(0.0)) {
        throw std::invalid_argument("build_meansquare_rom: requires a generator with J = 0");
    }
    if (!Pi.solvable) throw std::invalid_argument("build_meansquare_rom: mean moment is not available");
    const Index n = sys.order();
    const Index nu = gen.order();
    if (K.K.rows() != n * n || K.K.cols() != nu * nu) {
        throw DimensionError("build_meansquare_rom: second moment has the wrong shape");
    }

    ReducedModel m;
    m.kind = RomKind::mean_square;
    m.output_transform = identity(nu);
    m.diagnostics.emplace_back("pi_residual", Pi.residual);
    m.diagnostics.emplace_back("k_residual", K.residual);
    for (const auto& w : K.warnings) m.warnings.push_back(w);

    // (1) output map from (C(x)C) K
    const Mat CC = kron(sys.C, sys.C) * K.K;
    const KroneckerFactorization cf = nearest_kronecker(CC, 1, nu, 1, nu);
    m.Cr = reconcile(cf);
    m.diagnostics.emplace_back("cr_separability_error", cf.separability_error);
    m.diagnostics.emplace_back("cr_factor_asymmetry", asymmetry(cf));
    if (cf.separability_error > kSeparabilityWarning) {
        m.warnings.push_back("output map separability error " + std::to_string(cf.separability_error));
    }

    // (2) R with Cr R = C Pi
    const Mat CPi = sys.C * Pi.Pi;
    const RConstruction rc = construct_R(m.Cr, CPi);
    m.diagnostics.emplace_back("r_residual", (m.Cr * rc.R - CPi).norm());
    m.diagnostics.emplace_back("r_rotation_fallback", rc.method == RMethod::rotation_fallback ? 1.0 : 0.0);

    // (3) Ar = R S R^-1 - Br L R^-1
    const Mat RSRi = rc.R * gen.S * rc.Rinv;
    const Mat LRi = gen.L * rc.Rinv;
    if (std::holds_alternative<Mat>(Br)) {
        m.Br = std::get<Mat>(Br);
        require_column(m.Br, nu, "Br");
    } else {
        m.Br = place_poles(RSRi, LRi, std::get<std::vector<Complex>>(Br));
    }
    m.Ar = RSRi - m.Br * LRi;
    Complex worst;
    const Certificate ch = spectrum_certificate(kCertArHurwitz, m.Ar, &worst);
    m.certificates.push_back(ch);
    if (!ch.pass) certificate_failure("mean-square model: Ar is not Hurwitz", ch, worst);

    // (4) Fr, Gr
    const Mat I = identity(nu);
    const Mat BL = m.Br * gen.L;
    const Mat rhs = -kron(I, m.Ar) - kron(m.Ar, I) + kron(I, gen.S) + kron(gen.S, I) -
                    kron(BL, rc.R) - kron(rc.R, BL);
    const KroneckerFactorization ff = nearest_kronecker(rhs, nu, nu, nu, nu);
    if ((ff.T1.array() * ff.T2.array()).sum() < 0.0) {
        throw NoSolution("mean-square model: no real Fr, the Fr(x)Fr equation has a negative-definite right-hand side");
    }
    const Mat fr0 = reconcile(ff);
    if (!Gr.has_value()) {
        m.Gr = Mat::Zero(nu, 1);
        m.Fr = fr0;
        m.diagnostics.emplace_back("fr_separability_error", ff.separability_error);
        m.diagnostics.emplace_back("fr_equation_residual",
                                   fr_equation_residual(m.Fr, Mat::Zero(nu, nu), rc.R, rhs).norm());
        if (ff.separability_error > kSeparabilityWarning) {
            m.warnings.push_back("Fr separability error " + std::to_string(ff.separability_error));
        }
    } else {
        m.Gr = *Gr;
        require_column(m.Gr, nu, "Gr");
        double res = 0.0;
        m.Fr = fit_fr(fr0, m.Gr * gen.L, rc.R, rhs, res);
        m.diagnostics.emplace_back("fr_equation_residual", res);
        if (res > kSeparabilityWarning) {
            m.warnings.push_back("Fr/Gr equation residual " + std::to_string(res));
        }
    }

    // (5) mean-square stability
    const Mat msop = kron(I, m.Ar) + kron(m.Ar, I) + kron(m.Fr, m.Fr);
    const Certificate cm = spectrum_certificate(kCertMeanSquareStable, msop, &worst);
    m.certificates.push_back(cm);
    if (!cm.pass) certificate_failure("mean-square model: second moment is not stable", cm, worst);
    return m;
}

}  // namespace stomor
