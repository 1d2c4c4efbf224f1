#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mmrx/image.hpp"
#include "mmrx/types.hpp"

namespace mmrx {

// One rank-one building block of a recovered measurement matrix:
//
//   term = scale * left * right^T,   scale = 1 / (y0^T Sigma y0),
//   left = the measurement (or residual) factor, right = A^T Sigma^T y0.
//
// Applying the term to any image x with A x = y0 reproduces `left` exactly;
// that identity is what makes the construction a matched pair for `left`.
template <class T>
struct MismatchTerm {
  T scale = T(0);
  Vec<T> left;
  Vec<T> right;

  Mat<T> materialize() const { return scale * (left * right.transpose()); }
};

// Recovered measurement matrix stored as an ordered sum of rank-one terms.
// Never materialized by default: at full experiment scale a dense copy is
// hundreds of megabytes while the factored apply is O(terms * (M + N)).
template <class T>
class FactoredRecvMatrix {
 public:
  FactoredRecvMatrix(Index rows, Index cols) : rows_(rows), cols_(cols) {}

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index term_count() const { return static_cast<Index>(terms_.size()); }
  const std::vector<MismatchTerm<T>>& terms() const { return terms_; }

  void add_term(MismatchTerm<T> term) {
    if (term.left.size() != rows_ || term.right.size() != cols_) {
      throw DimensionError("mismatch term has shape " + std::to_string(term.left.size()) + "x" +
                           std::to_string(term.right.size()) + ", expected " +
                           std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    terms_.push_back(std::move(term));
  }

  Vec<T> apply(const Vec<T>& x) const {
    if (x.size() != cols_) {
      throw DimensionError("apply: operand length " + std::to_string(x.size()) +
                           " != " + std::to_string(cols_));
    }
    Vec<T> out = Vec<T>::Zero(rows_);
    for (const auto& t : terms_) {
      const T coeff = t.scale * t.right.dot(x);
      out += coeff * t.left;
    }
    return out;
  }

  Vec<T> apply_adjoint(const Vec<T>& u) const {
    if (u.size() != rows_) {
      throw DimensionError("apply_adjoint: operand length " + std::to_string(u.size()) +
                           " != " + std::to_string(rows_));
    }
    Vec<T> out = Vec<T>::Zero(cols_);
    for (const auto& t : terms_) {
      const T coeff = t.scale * t.left.dot(u);
      out += coeff * t.right;
    }
    return out;
  }

  Mat<T> materialize() const {
    Mat<T> out = Mat<T>::Zero(rows_, cols_);
    for (const auto& t : terms_) out += t.materialize();
    return out;
  }

 private:
  Index rows_;
  Index cols_;
  std::vector<MismatchTerm<T>> terms_;
};

// Uniform operator access so solvers and diagnostics run the same on a dense
// matrix and on a factored recovery without materializing the latter.
template <class T>
Vec<T> op_apply(const Mat<T>& A, const Vec<T>& x) { return A * x; }
template <class T>
Vec<T> op_apply(const FactoredRecvMatrix<T>& A, const Vec<T>& x) { return A.apply(x); }
template <class T>
Vec<T> op_apply_adjoint(const Mat<T>& A, const Vec<T>& u) { return A.transpose() * u; }
template <class T>
Vec<T> op_apply_adjoint(const FactoredRecvMatrix<T>& A, const Vec<T>& u) { return A.apply_adjoint(u); }
template <class T>
Index op_rows(const Mat<T>& A) { return A.rows(); }
template <class T>
Index op_rows(const FactoredRecvMatrix<T>& A) { return A.rows(); }
template <class T>
Index op_cols(const Mat<T>& A) { return A.cols(); }
template <class T>
Index op_cols(const FactoredRecvMatrix<T>& A) { return A.cols(); }

// Cheap spectral-scale estimate used by relative guards (infinity norm).
template <class T>
T sigma_norm_estimate(const Mat<T>& sigma) {
  return sigma.cwiseAbs().rowwise().sum().maxCoeff();
}

namespace detail {

template <class T>
T guarded_premeasure_denominator(const Vec<T>& y0, const Mat<T>& sigma) {
  const T den = y0.dot(sigma * y0);
  const T floor = NumericPolicy<T>::denom_tol * y0.squaredNorm() * sigma_norm_estimate(sigma);
  if (!(std::abs(den) > floor)) {
    throw DegenerateDenominatorError(
        "pre-measure quadratic form is degenerate: |y0^T Sigma y0| = " + std::to_string(den));
  }
  return den;
}

}  // namespace detail

// Default special solution Sigma = (A A^T)^{-1}, valid whenever A has full
// row rank. The explicit M x M inverse is returned (not a factorization)
// because the solvers reuse it across thousands of rank-one steps.
template <class T>
Mat<T> default_sigma(const Mat<T>& A) {
  const Index m = A.rows();
  Mat<T> gram = A * A.transpose();
  Eigen::LLT<Mat<T>> llt(gram);
  if (llt.info() != Eigen::Success || llt.rcond() < NumericPolicy<T>::rank_rcond_tol) {
    throw RankDeficiencyError("measurement matrix is rank deficient (rcond of A A^T = " +
                              std::to_string(llt.info() == Eigen::Success ? double(llt.rcond()) : 0.0) + ")");
  }
  Mat<T> sigma = llt.solve(Mat<T>::Identity(m, m));
  sigma = ((sigma + sigma.transpose()) * T(0.5)).eval();
  const T residual = (gram * sigma - Mat<T>::Identity(m, m)).cwiseAbs().maxCoeff();
  if (!(residual <= NumericPolicy<T>::inverse_residual_tol)) {
    throw IllConditionedError("A A^T inversion residual " + std::to_string(double(residual)) +
                              " exceeds tolerance");
  }
  return sigma;
}

// The rank-one solution matched to measurement `y`, built from the known
// pair (y0, A) and any non-degenerate Sigma.
template <class T>
MismatchTerm<T> mismatch_term(const Vec<T>& y, const Vec<T>& y0, const Mat<T>& sigma,
                              const Mat<T>& A) {
  if (y.size() != A.rows() || y0.size() != A.rows() || sigma.rows() != A.rows() ||
      sigma.cols() != A.rows()) {
    throw DimensionError("mismatch_term: inconsistent shapes");
  }
  const T den = detail::guarded_premeasure_denominator(y0, sigma);
  MismatchTerm<T> term;
  term.scale = T(1) / den;
  term.left = y;
  term.right = A.transpose() * (sigma.transpose() * y0);
  return term;
}

// k(x) = (y0^T Sigma A x) / (y0^T Sigma y0): applying any term built from
// (y0, Sigma, A) to x scales the term's left factor by exactly this number,
// independent of the left factor itself.
template <class T>
T multiplier_coefficient(const Vec<T>& y0, const Mat<T>& sigma, const Mat<T>& A,
                         const Image<T>& x) {
  validate_dims(A, x);
  const T den = detail::guarded_premeasure_denominator(y0, sigma);
  const Vec<T> ax = A * x.pixels;
  const T num = y0.dot(sigma * ax);
  return num / den;
}

// |1 - k(x)|: the geometric ratio of the error-iteration residual. Not
// asserted to be below 1; callers surface divergence instead.
template <class T>
T convergence_factor(const Vec<T>& y0, const Mat<T>& sigma, const Mat<T>& A, const Image<T>& x) {
  return std::abs(T(1) - multiplier_coefficient(y0, sigma, A, x));
}

}  // namespace mmrx
