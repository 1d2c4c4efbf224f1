#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mmrx/image.hpp"
#include "mmrx/mismatch.hpp"
#include "mmrx/sim.hpp"
#include "mmrx/types.hpp"

namespace mmrx {

// Columns of Q are the basis images used for calibration. The orthonormality
// residual is recorded at build time and never assumed zero afterwards;
// substituting arbitrary images into the basis makes it strictly positive.
template <class T>
struct BasisSet {
  Mat<T> Q;  // N x M
  T orthonormality_residual = T(0);
};

// Pre-measurement values of all basis images, one row per basis image.
template <class T>
struct PremeasureSet {
  Mat<T> Y;  // D x M, row j = (A * Q.col(j))^T; here D = M
};

template <class T>
struct CalibrationConfig {
  // Images replacing the trailing columns of the basis (kept in the span on
  // purpose, so those exact images stay reconstructable).
  std::vector<Image<T>> substitute_images;
  // Unit-normalizing substituted columns keeps cond(Y) comparable to the
  // orthonormal case; the spanned space is unchanged.
  bool normalize_substituted = true;
};

template <class T>
struct CalibrationReport {
  T orthonormality_residual = T(0);
  T cond_Y = T(0);
  T max_offdiag_k = T(0);
  long oracle_calls = 0;
  Index substituted_columns = 0;
};

// Orthonormal basis of the row space of A via QR of A^T.
template <class T>
BasisSet<T> orthonormal_basis(const Mat<T>& A) {
  const Index m = A.rows();
  const Index n = A.cols();
  // Full-row-rank precondition, surfaced with the same guard as the
  // default special solution.
  (void)default_sigma(A);

  Eigen::HouseholderQR<Mat<T>> qr(A.transpose());
  BasisSet<T> basis;
  basis.Q = qr.householderQ() * Mat<T>::Identity(n, m);
  basis.orthonormality_residual =
      (basis.Q.transpose() * basis.Q - Mat<T>::Identity(m, m)).cwiseAbs().maxCoeff();
  return basis;
}

// Replaces basis columns with the given images and refreshes the recorded
// orthonormality residual. Each image displaces the not-yet-replaced column
// it is most aligned with, which keeps the pre-measurement table far from
// singular; always dropping the trailing columns can leave a substitute with
// almost no weight along the removed directions. No error is raised for the
// lost orthogonality; the calibration equation only needs independent rows
// of the pre-measurement table.
template <class T>
void substitute_basis_columns(BasisSet<T>& basis, const std::vector<Image<T>>& images,
                              bool normalize) {
  const Index m = basis.Q.cols();
  const auto count = static_cast<Index>(images.size());
  if (count > m) throw ValidationError("more substitute images than basis columns");
  std::vector<bool> replaced(static_cast<std::size_t>(m), false);
  for (Index i = 0; i < count; ++i) {
    const Image<T>& img = images[static_cast<std::size_t>(i)];
    if (img.size() != basis.Q.rows()) {
      throw DimensionError("substitute image has " + std::to_string(img.size()) +
                           " pixels, basis expects " + std::to_string(basis.Q.rows()));
    }
    if (img.is_zero()) throw ValidationError("substitute image must be non-zero");

    Index best = -1;
    T best_score = T(-1);
    for (Index j = 0; j < m; ++j) {
      if (replaced[static_cast<std::size_t>(j)]) continue;
      const T score = std::abs(basis.Q.col(j).dot(img.pixels));
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    replaced[static_cast<std::size_t>(best)] = true;
    Vec<T> col = img.pixels;
    if (normalize) col /= col.norm();
    basis.Q.col(best) = col;
  }
  basis.orthonormality_residual =
      (basis.Q.transpose() * basis.Q - Mat<T>::Identity(m, m)).cwiseAbs().maxCoeff();
}

template <class T>
PremeasureSet<T> premeasure_basis(const Mat<T>& A, const BasisSet<T>& basis) {
  if (basis.Q.rows() != A.cols()) {
    throw DimensionError("basis image length " + std::to_string(basis.Q.rows()) +
                         " does not match matrix columns " + std::to_string(A.cols()));
  }
  return PremeasureSet<T>{(A * basis.Q).transpose()};
}

namespace detail {

template <class T>
T cond_from_svd(const Mat<T>& Y) {
  Eigen::JacobiSVD<Mat<T>> svd(Y);
  const auto& sv = svd.singularValues();
  const T smin = sv[sv.size() - 1];
  if (!(smin > T(0))) {
    throw RankDeficiencyError("pre-measurement table is rank deficient");
  }
  return sv[0] / smin;
}

}  // namespace detail

// Special solution Sigma = (Y^T Y)^{-1}. With it, Y Sigma Y^T is the
// identity, so the basis terms of the calibration sum do not interfere.
template <class T>
Mat<T> calibration_sigma(const PremeasureSet<T>& pm) {
  const Mat<T>& Y = pm.Y;
  const T cond = detail::cond_from_svd(Y);
  if (cond * cond > NumericPolicy<T>::cond_bound) {
    throw IllConditionedError("cond(Y^T Y) ~ " + std::to_string(double(cond) * double(cond)) +
                              " exceeds the configured bound; the basis is too degenerate");
  }
  const Index m = Y.cols();
  Mat<T> gram = Y.transpose() * Y;
  Eigen::LLT<Mat<T>> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw RankDeficiencyError("Y^T Y is not positive definite");
  }
  Mat<T> sigma = llt.solve(Mat<T>::Identity(m, m));
  return ((sigma + sigma.transpose()) * T(0.5)).eval();
}

// Cross-coefficient table k(i,j) = (y_j^T Sigma y_i) / (y_j^T Sigma y_j)
// over pre-measurement rows: the amount by which basis image i excites the
// term calibrated for basis image j. Diagonal is 1 by construction; with the
// calibration Sigma the off-diagonals vanish.
template <class T>
Mat<T> cross_coefficients(const PremeasureSet<T>& pm, const Mat<T>& sigma) {
  const Mat<T>& Y = pm.Y;
  const Index d = Y.rows();
  if (sigma.rows() != Y.cols() || sigma.cols() != Y.cols()) {
    throw DimensionError("cross_coefficients: Sigma shape mismatch");
  }
  const Mat<T> G = Y * sigma * Y.transpose();  // G(j, i) = y_j^T Sigma y_i
  const T sigma_scale = sigma_norm_estimate(sigma);
  Mat<T> K(d, d);
  for (Index j = 0; j < d; ++j) {
    const T den = G(j, j);
    const T floor = NumericPolicy<T>::denom_tol * Y.row(j).squaredNorm() * sigma_scale;
    if (!(std::abs(den) > floor)) {
      throw DegenerateDenominatorError("degenerate diagonal denominator for basis image " +
                                       std::to_string(j));
    }
    for (Index i = 0; i < d; ++i) K(i, j) = G(j, i) / den;
  }
  return K;
}

// One calibration, many images: measures every basis column once and
// accumulates the per-column matched terms. The result agrees with the
// hidden matrix on the span of the basis, so any image in that span can be
// reconstructed later without touching the oracle again.
template <class T>
std::pair<FactoredRecvMatrix<T>, CalibrationReport<T>> calibrate(MeasurementOracle<T>& oracle,
                                                                 const Mat<T>& A,
                                                                 const CalibrationConfig<T>& cfg = {}) {
  BasisSet<T> basis = orthonormal_basis(A);
  if (!cfg.substitute_images.empty()) {
    substitute_basis_columns(basis, cfg.substitute_images, cfg.normalize_substituted);
  }
  const PremeasureSet<T> pm = premeasure_basis(A, basis);
  const Mat<T> sigma = calibration_sigma(pm);

  const long calls_before = oracle.call_count();
  const Mat<T> measured = oracle.measure_basis_batch(basis.Q);

  FactoredRecvMatrix<T> recv(A.rows(), A.cols());
  for (Index j = 0; j < pm.Y.rows(); ++j) {
    const Vec<T> y0 = pm.Y.row(j).transpose();
    recv.add_term(mismatch_term(Vec<T>(measured.col(j)), y0, sigma, A));
  }

  const Mat<T> k_table = cross_coefficients(pm, sigma);
  T max_offdiag = T(0);
  for (Index i = 0; i < k_table.rows(); ++i) {
    for (Index j = 0; j < k_table.cols(); ++j) {
      if (i != j) max_offdiag = std::max(max_offdiag, std::abs(k_table(i, j)));
    }
  }

  CalibrationReport<T> report;
  report.orthonormality_residual = basis.orthonormality_residual;
  report.cond_Y = detail::cond_from_svd(pm.Y);
  report.max_offdiag_k = max_offdiag;
  report.oracle_calls = oracle.call_count() - calls_before;
  report.substituted_columns = static_cast<Index>(cfg.substitute_images.size());
  return {std::move(recv), report};
}

}  // namespace mmrx
