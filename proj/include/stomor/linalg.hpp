#pragma once

///
/// \file linalg.hpp
///
/// Dense real kernel shared by every other module: Kronecker products,
/// column-stacking vectorization, guarded linear solves and the spectrum,
/// SVD and QR queries. Eigen does the heavy lifting underneath.
///

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace stomor {

using Index = Eigen::Index;
using Complex = std::complex<double>;

/// Dense row-major real matrix.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;

/// Condition estimates above this make solve_dense raise SingularSystem.
inline constexpr double kSingularConditionLimit = 1e12;

struct SpectrumReport {
    std::vector<Complex> eigenvalues;  // sorted by decreasing real part
    double max_real_part = 0.0;
    bool is_hurwitz = false;
};

struct SolveResult {
    Mat x;
    double residual = 0.0;            // ||a x - b||_F
    double condition_estimate = 1.0;  // 1-norm estimate
};

struct SvdResult {
    Mat U;
    Vec singular_values;  // non-increasing
    Mat V;
};

struct QrResult {
    Mat Q;  // orthonormal columns
    Mat R;  // upper triangular, positive diagonal
};

Mat identity(Index n);

/// (i*rows(b)+k, j*cols(b)+l) entry equals a(i,j)*b(k,l).
Mat kron(const Mat& a, const Mat& b);

/// Stacks the columns of `a` into a (rows*cols) x 1 matrix.
Mat vec(const Mat& a);

/// Inverse of vec. Throws DimensionError unless v has rows*cols entries.
Mat unvec(const Mat& v, Index rows, Index cols);

/// Solves a x = b with partial-pivot LU and one step of iterative refinement.
/// Throws SingularSystem when the condition estimate exceeds
/// kSingularConditionLimit.
SolveResult solve_dense(const Mat& a, const Mat& b);

/// Complex counterpart used by the Schur-based Sylvester solver.
CMat solve_dense_complex(const CMat& a, const CMat& b);

SpectrumReport spectrum(const Mat& a);

/// Thin SVD, a = U diag(s) V^T.
SvdResult svd(const Mat& a);

/// Thin QR with positive R diagonal. Requires rows >= cols and full column
/// rank; throws RankDeficient otherwise.
QrResult qr(const Mat& a);

/// Numerical rank from singular values, relative tolerance `rtol`.
Index numerical_rank(const Mat& a, double rtol = 1e-10);

bool all_finite(const Mat& a);

}  // namespace stomor
