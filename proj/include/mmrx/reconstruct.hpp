#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "mmrx/image.hpp"
#include "mmrx/mismatch.hpp"
#include "mmrx/types.hpp"

namespace mmrx {

enum class StepRule { Fixed, Backtracking };

template <class T>
struct ReconstructConfig {
  T lambda_reg = T(0);  // must be set > 0; see auto_lambda
  int max_iters = 2000;
  StepRule step_rule = StepRule::Backtracking;
  T conv_tol = std::numeric_limits<T>::epsilon() * T(1000);
  bool nonneg = true;
  // Least-squares polish on the recovered support, as sparse-recovery
  // packages commonly offer; does not change the support.
  bool debias = true;

  void validate() const {
    if (!(lambda_reg > T(0))) throw ValidationError("lambda_reg must be > 0");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(conv_tol > T(0))) throw ValidationError("conv_tol must be > 0");
  }
};

template <class T>
struct ReconstructReport {
  int iterations = 0;
  bool converged = false;
  T lambda_used = T(0);
  T final_objective = T(0);
  std::vector<T> objective_trace;
  bool debiased = false;
};

// Componentwise shrinkage sign(v) * max(|v| - t, 0).
template <class T>
Vec<T> soft_threshold(const Vec<T>& v, T t) {
  if (!(t >= T(0))) throw ValidationError("soft_threshold: threshold must be >= 0");
  Vec<T> out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const T mag = std::abs(v[i]) - t;
    out[i] = mag > T(0) ? (v[i] > T(0) ? mag : -mag) : T(0);
  }
  return out;
}

// Standard homotopy-style default weight.
template <class T, class Op>
T auto_lambda(const Op& A, const Vec<T>& y) {
  return T(1e-3) * op_apply_adjoint(A, y).template lpNorm<Eigen::Infinity>();
}

namespace detail {

template <class T>
Vec<T> prox_l1(const Vec<T>& v, T t, bool nonneg) {
  if (!nonneg) return soft_threshold(v, t);
  return (v.array() - t).max(T(0)).matrix();
}

template <class T, class Op>
T operator_norm_sq_estimate(const Op& A, int iters = 60) {
  Vec<T> v = Vec<T>::Ones(op_cols(A));
  v /= v.norm();
  T est = T(0);
  for (int i = 0; i < iters; ++i) {
    Vec<T> w = op_apply_adjoint(A, op_apply(A, v));
    const T norm = w.norm();
    if (!(norm > T(0))) return T(1);
    est = norm;  // Rayleigh estimate of ||A^T A||_2
    v = w / norm;
  }
  return est;
}

// Conjugate gradient on the support-restricted normal equations.
template <class T, class Op>
void debias_on_support(const Op& A, const Vec<T>& y, Vec<T>& x, bool nonneg) {
  Vec<T> mask = Vec<T>::Zero(x.size());
  Index support = 0;
  for (Index i = 0; i < x.size(); ++i) {
    if (x[i] != T(0)) {
      mask[i] = T(1);
      ++support;
    }
  }
  if (support == 0) return;

  const auto H = [&](const Vec<T>& v) -> Vec<T> {
    Vec<T> masked = v.cwiseProduct(mask);
    return op_apply_adjoint(A, op_apply(A, masked)).cwiseProduct(mask).eval();
  };
  const Vec<T> b = op_apply_adjoint(A, y).cwiseProduct(mask);

  Vec<T> r = b - H(x);
  Vec<T> p = r;
  T rs = r.squaredNorm();
  const T stop = std::numeric_limits<T>::epsilon() * std::numeric_limits<T>::epsilon() *
                 b.squaredNorm() * T(100);
  const int max_cg = static_cast<int>(std::min<Index>(2 * support + 10, 200));
  for (int i = 0; i < max_cg && rs > stop; ++i) {
    const Vec<T> hp = H(p);
    const T den = p.dot(hp);
    if (!(den > T(0))) break;
    const T alpha = rs / den;
    x += alpha * p;
    r -= alpha * hp;
    const T rs_new = r.squaredNorm();
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  x = x.cwiseProduct(mask);
  if (nonneg) x = x.cwiseMax(T(0));
}

}  // namespace detail

// Accelerated proximal-gradient solve of
//   min 0.5 ||y - A x||^2 + lambda ||x||_1   (optionally over x >= 0)
// with a monotone safeguard: the accepted objective never increases even
// while the momentum sequence overshoots. Works through apply/adjoint only,
// so factored operators are never materialized.
template <class T, class Op>
std::pair<Vec<T>, ReconstructReport<T>> reconstruct(const Vec<T>& y, const Op& A,
                                                    const ReconstructConfig<T>& cfg,
                                                    const Vec<T>* warm_start = nullptr) {
  cfg.validate();
  if (y.size() != op_rows(A)) throw DimensionError("reconstruct: measurement length mismatch");
  const Index n = op_cols(A);
  const T lambda = cfg.lambda_reg;

  const auto data_term = [&](const Vec<T>& x) -> T {
    return T(0.5) * (op_apply(A, x) - y).squaredNorm();
  };
  const auto objective = [&](const Vec<T>& x) -> T {
    return data_term(x) + lambda * x.template lpNorm<1>();
  };

  Vec<T> x = warm_start ? *warm_start : Vec<T>::Zero(n);
  if (x.size() != n) throw DimensionError("reconstruct: warm start length mismatch");
  Vec<T> x_prev = x;
  Vec<T> momentum = x;
  T t = T(1);
  T step_l = cfg.step_rule == StepRule::Fixed
                 ? std::max(detail::operator_norm_sq_estimate<T>(A), T(1e-12))
                 : T(1);

  ReconstructReport<T> report;
  report.lambda_used = lambda;
  T obj_x = objective(x);
  report.objective_trace.push_back(obj_x);
  bool converged = false;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Vec<T> residual = op_apply(A, momentum) - y;
    const Vec<T> grad = op_apply_adjoint(A, residual);
    const T f_at_momentum = T(0.5) * residual.squaredNorm();

    Vec<T> candidate;
    for (;;) {
      candidate = detail::prox_l1<T>(momentum - grad / step_l, lambda / step_l, cfg.nonneg);
      if (cfg.step_rule == StepRule::Fixed) break;
      const Vec<T> diff = candidate - momentum;
      const T quad = f_at_momentum + grad.dot(diff) + T(0.5) * step_l * diff.squaredNorm();
      if (data_term(candidate) <= quad * (T(1) + std::numeric_limits<T>::epsilon() * T(8))) break;
      step_l *= T(2);
      if (!(step_l < std::numeric_limits<T>::max() / T(4))) {
        throw NumericalError("backtracking line search failed to find a usable step");
      }
    }

    const T movement = (candidate - x).template lpNorm<Eigen::Infinity>();
    const T obj_candidate = objective(candidate);

    x_prev = x;
    const bool accepted = obj_candidate <= obj_x;
    if (accepted) {
      x = candidate;
      obj_x = obj_candidate;
    }
    report.objective_trace.push_back(obj_x);
    report.iterations = iter;

    if (accepted) {
      const T t_next = (T(1) + std::sqrt(T(1) + T(4) * t * t)) / T(2);
      momentum = x + (t / t_next) * (candidate - x) + ((t - T(1)) / t_next) * (x - x_prev);
      t = t_next;
    } else {
      // candidate overshot: restart the momentum from the accepted point
      t = T(1);
      momentum = x;
    }

    if (movement <= cfg.conv_tol) {
      converged = true;
      break;
    }
  }

  report.converged = converged;
  if (cfg.debias) {
    detail::debias_on_support(A, y, x, cfg.nonneg);
    report.debiased = true;
  }
  report.final_objective = objective(x);
  return {std::move(x), std::move(report)};
}

// Image-returning wrapper for pipeline use.
template <class T, class Op>
std::pair<Image<T>, ReconstructReport<T>> reconstruct_image(const Vec<T>& y, const Op& A,
                                                            const ReconstructConfig<T>& cfg,
                                                            Index width, Index height) {
  auto [x, report] = reconstruct(y, A, cfg);
  return {Image<T>{std::move(x), width, height}, std::move(report)};
}

}  // namespace mmrx
