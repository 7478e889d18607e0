#include "stomor/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "stomor/errors.hpp"

namespace stomor {

namespace {

std::string shape(const Mat& m) {
    std::ostringstream os;
    os << m.rows() << "x" << m.cols();
    return os.str();
}

void require_square(const Mat& a, const char* op) {
    if (a.rows() != a.cols()) {
        throw DimensionError(std::string(op) + ": matrix must be square, got " + shape(a));
    }
}

}  // namespace

Mat identity(Index n) { return Mat::Identity(n, n); }

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i) {
        for (Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Mat vec(const Mat& a) {
    Mat v(a.rows() * a.cols(), 1);
    Index k = 0;
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            v(k++, 0) = a(i, j);
        }
    }
    return v;
}

Mat unvec(const Mat& v, Index rows, Index cols) {
    if (v.size() != rows * cols) {
        throw DimensionError("unvec: " + std::to_string(v.size()) + " entries cannot fill " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }
    Mat a(rows, cols);
    // v is a column or row vector; read it in storage-independent order
    Index k = 0;
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i, ++k) {
            a(i, j) = v.cols() == 1 ? v(k, 0) : v(0, k);
        }
    }
    return a;
}

SolveResult solve_dense(const Mat& a, const Mat& b) {
    require_square(a, "solve_dense");
    if (b.rows() != a.rows()) {
        throw DimensionError("solve_dense: rhs has " + shape(b) + " for operator " + shape(a));
    }
    const Eigen::MatrixXd ac = a;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(ac);
    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(cond <= kSingularConditionLimit)) {
        throw SingularSystem("solve_dense: operator is singular to tolerance (condition estimate " +
                                 std::to_string(cond) + ")",
                             cond);
    }
    Eigen::MatrixXd x = lu.solve(Eigen::MatrixXd(b));
    Eigen::MatrixXd r = Eigen::MatrixXd(b) - ac * x;
    x += lu.solve(r);
    SolveResult out;
    out.x = x;
    out.residual = (ac * x - Eigen::MatrixXd(b)).norm();
    out.condition_estimate = cond;
    return out;
}

CMat solve_dense_complex(const CMat& a, const CMat& b) {
    Eigen::PartialPivLU<CMat> lu(a);
    const double rcond = lu.rcond();
    const double cond = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    if (!(cond <= kSingularConditionLimit)) {
        throw SingularSystem("solve_dense_complex: operator is singular to tolerance", cond);
    }
    CMat x = lu.solve(b);
    x += lu.solve(CMat(b - a * x));
    return x;
}

SpectrumReport spectrum(const Mat& a) {
    require_square(a, "spectrum");
    SpectrumReport rep;
    if (a.rows() == 0) {
        rep.max_real_part = -std::numeric_limits<double>::infinity();
        rep.is_hurwitz = true;
        return rep;
    }
    if (!all_finite(a)) {
        throw ConvergenceError("spectrum: matrix has non-finite entries");
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(a), false);
    if (es.info() != Eigen::Success) {
        throw ConvergenceError("spectrum: eigenvalue iteration did not converge for " + shape(a));
    }
    const auto& ev = es.eigenvalues();
    rep.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](Complex x, Complex y) {
        if (x.real() != y.real()) return x.real() > y.real();
        return x.imag() > y.imag();
    });
    rep.max_real_part = rep.eigenvalues.front().real();
    rep.is_hurwitz = rep.max_real_part < 0.0;
    return rep;
}

SvdResult svd(const Mat& a) {
    if (!all_finite(a)) {
        throw ConvergenceError("svd: matrix has non-finite entries");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> jsvd(Eigen::MatrixXd(a),
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult out;
    out.U = jsvd.matrixU();
    out.singular_values = jsvd.singularValues();
    out.V = jsvd.matrixV();
    if (!all_finite(out.U) || !all_finite(out.V) || !out.singular_values.allFinite()) {
        throw ConvergenceError("svd: decomposition did not converge for " + shape(a));
    }
    return out;
}

QrResult qr(const Mat& a) {
    if (a.rows() < a.cols()) {
        throw RankDeficient("qr: " + shape(a) + " cannot have full column rank");
    }
    const Index m = a.rows();
    const Index n = a.cols();
    Eigen::HouseholderQR<Eigen::MatrixXd> h{Eigen::MatrixXd(a)};
    Eigen::MatrixXd r = h.matrixQR().topRows(n).template triangularView<Eigen::Upper>();
    Eigen::MatrixXd q = h.householderQ() * Eigen::MatrixXd::Identity(m, n);

    const double scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    for (Index k = 0; k < n; ++k) {
        const double d = r(k, k);
        if (!std::isfinite(d) || std::abs(d) <= 1e-13 * scale * static_cast<double>(m)) {
            throw RankDeficient("qr: column " + std::to_string(k) +
                                " is linearly dependent to tolerance");
        }
        if (d < 0.0) {
            r.row(k) *= -1.0;
            q.col(k) *= -1.0;
        }
    }
    return {Mat(q), Mat(r)};
}

Index numerical_rank(const Mat& a, double rtol) {
    if (a.size() == 0) return 0;
    const Vec s = svd(a).singular_values;
    if (s.size() == 0 || s(0) == 0.0) return 0;
    Index rank = 0;
    for (Index i = 0; i < s.size(); ++i) {
        if (s(i) > rtol * s(0)) ++rank;
    }
    return rank;
}

bool all_finite(const Mat& a) { return a.allFinite(); }

}  // namespace stomor
