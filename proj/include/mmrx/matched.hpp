#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mmrx/image.hpp"
#include "mmrx/mismatch.hpp"
#include "mmrx/sim.hpp"
#include "mmrx/types.hpp"

namespace mmrx {

template <class T>
struct MatchedSolveConfig {
  Image<T> pm_image;               // any non-zero image
  int epochs = 20;
  T stop_tol = T(0);               // early exit when ||residual||_inf <= stop_tol
  T divergence_factor = T(1000);   // abort when the residual grows this much over its minimum

  void validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (pm_image.is_zero()) throw ValidationError("pre-measure image must be non-zero");
    if (!(stop_tol >= T(0))) throw ValidationError("stop_tol must be >= 0");
    if (!(divergence_factor > T(1))) throw ValidationError("divergence_factor must be > 1");
  }
};

template <class T>
struct TraceStep {
  int iteration = 0;   // 1-based
  T err2 = T(0);
  T err_inf = T(0);
  long oracle_calls = 0;  // calls consumed by this solve so far
};

template <class T>
struct ErrorTrace {
  std::vector<TraceStep<T>> steps;
  // |1 - k| for the surrogate solver; median step ratio for the measured one.
  T convergence_factor_estimate = T(0);
  PrecisionMode precision = precision_of<T>();
};

namespace detail {

template <class T>
void record_step(ErrorTrace<T>& trace, int iteration, const Vec<T>& residual, long calls) {
  trace.steps.push_back(TraceStep<T>{iteration, residual.norm(),
                                     residual.template lpNorm<Eigen::Infinity>(), calls});
}

template <class T>
void check_divergence(const Vec<T>& residual, T err2, T min_err2, T factor, int iteration) {
  if (!residual.allFinite()) {
    throw DivergenceError("residual became non-finite at iteration " + std::to_string(iteration));
  }
  if (min_err2 > T(0) && err2 > factor * min_err2) {
    throw DivergenceError("residual grew " + std::to_string(double(err2 / min_err2)) +
                          "x over its minimum at iteration " + std::to_string(iteration) +
                          "; the chosen pre-measure image does not contract");
  }
}

template <class T>
T ratio_estimate(const std::vector<TraceStep<T>>& steps) {
  std::vector<T> ratios;
  for (std::size_t i = 1; i < steps.size(); ++i) {
    if (steps[i - 1].err2 > T(0)) ratios.push_back(steps[i].err2 / steps[i - 1].err2);
  }
  if (ratios.empty()) return T(0);
  std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
  return ratios[ratios.size() / 2];
}

}  // namespace detail

// Error iteration against live measurements: every pass adds the rank-one
// term matched to the current residual, then re-measures the pinned target
// through the accumulated operator (one oracle call per iteration).
template <class T>
std::pair<FactoredRecvMatrix<T>, ErrorTrace<T>> error_iteration(MeasurementOracle<T>& oracle,
                                                                const Vec<T>& y, const Mat<T>& A,
                                                                const MatchedSolveConfig<T>& cfg) {
  cfg.validate();
  validate_dims(A, cfg.pm_image);
  if (y.size() != A.rows()) throw DimensionError("measurement length does not match matrix rows");

  const Vec<T> y0 = A * cfg.pm_image.pixels;
  const Mat<T> sigma = default_sigma(A);
  const long calls_before = oracle.call_count();

  FactoredRecvMatrix<T> recv(A.rows(), A.cols());
  ErrorTrace<T> trace;
  Vec<T> residual = y;
  T min_err2 = T(0);

  for (int i = 1; i <= cfg.epochs; ++i) {
    recv.add_term(mismatch_term(residual, y0, sigma, A));
    residual = y - oracle.measure_constructed(recv);

    const T err2 = residual.norm();
    detail::record_step(trace, i, residual, oracle.call_count() - calls_before);
    detail::check_divergence(residual, err2, min_err2, cfg.divergence_factor, i);
    if (min_err2 == T(0) || err2 < min_err2) min_err2 = err2;
    if (residual.template lpNorm<Eigen::Infinity>() <= cfg.stop_tol) break;
  }
  trace.convergence_factor_estimate = detail::ratio_estimate(trace.steps);
  return {std::move(recv), std::move(trace)};
}

// Purely computational bootstrap: constructs the operator matched to the
// pre-measure value itself. One pass already matches in exact arithmetic;
// the remaining passes polish away accumulation round-off, which is what
// keeps single-precision runs usable. Zero oracle calls.
template <class T>
std::pair<Vec<T>, FactoredRecvMatrix<T>> initialize_recv_y0(const Mat<T>& A,
                                                            const MatchedSolveConfig<T>& cfg) {
  cfg.validate();
  validate_dims(A, cfg.pm_image);

  const Vec<T> y0 = A * cfg.pm_image.pixels;
  const Mat<T> sigma = default_sigma(A);

  FactoredRecvMatrix<T> recv(A.rows(), A.cols());
  Vec<T> residual = y0;
  for (int i = 1; i <= cfg.epochs; ++i) {
    recv.add_term(mismatch_term(residual, y0, sigma, A));
    residual = y0 - recv.apply(cfg.pm_image.pixels);
    if (!residual.allFinite()) {
      throw DivergenceError("initialization residual became non-finite at iteration " +
                            std::to_string(i));
    }
  }
  return {y0, std::move(recv)};
}

// Scalar summary of the elementwise quotient y' / y_pm. The median is exact
// in the noiseless proportional case and robust to per-component noise.
template <class T>
T estimate_k(const Vec<T>& y_prime, const Vec<T>& y_pm) {
  if (y_prime.size() != y_pm.size()) throw DimensionError("estimate_k: length mismatch");
  if (y_pm.size() == 0) throw ValidationError("estimate_k: empty vectors");
  const T floor = NumericPolicy<T>::zero_component_tol * y_pm.template lpNorm<Eigen::Infinity>();
  std::string bad;
  for (Index i = 0; i < y_pm.size(); ++i) {
    if (std::abs(y_pm[i]) <= floor) bad += (bad.empty() ? "" : ", ") + std::to_string(i);
  }
  if (!bad.empty()) {
    throw NumericalError("estimate_k: near-zero reference components at indices [" + bad + "]");
  }
  std::vector<T> ratios(static_cast<std::size_t>(y_pm.size()));
  for (Index i = 0; i < y_pm.size(); ++i) ratios[static_cast<std::size_t>(i)] = y_prime[i] / y_pm[i];
  std::sort(ratios.begin(), ratios.end());
  const std::size_t mid = ratios.size() / 2;
  if (ratios.size() % 2 == 1) return ratios[mid];
  return (ratios[mid - 1] + ratios[mid]) / T(2);
}

// One-measurement matched solve. The bootstrap operator is used for a single
// live measurement that fixes the proportionality coefficient k; afterwards
// every iteration replaces the measurement with the computable surrogate
// k * (recv * pm_image), which equals the live measurement whenever k is
// exact. The accumulator starts empty so the residual sequence coincides
// with the measured error iteration in the noiseless case.
template <class T>
std::pair<FactoredRecvMatrix<T>, ErrorTrace<T>> matched_solution(MeasurementOracle<T>& oracle,
                                                                 const Vec<T>& y, const Mat<T>& A,
                                                                 const MatchedSolveConfig<T>& cfg) {
  cfg.validate();
  validate_dims(A, cfg.pm_image);
  if (y.size() != A.rows()) throw DimensionError("measurement length does not match matrix rows");

  auto [y0, bootstrap] = initialize_recv_y0(A, cfg);
  const Mat<T> sigma = default_sigma(A);
  const long calls_before = oracle.call_count();

  const Vec<T> y_prime = oracle.measure_constructed(bootstrap);  // the only measurement
  const Vec<T> y_pm = bootstrap.apply(cfg.pm_image.pixels);
  const T k = estimate_k(y_prime, y_pm);

  FactoredRecvMatrix<T> recv(A.rows(), A.cols());
  ErrorTrace<T> trace;
  trace.convergence_factor_estimate = std::abs(T(1) - k);
  Vec<T> residual = y;
  T min_err2 = T(0);

  for (int i = 1; i <= cfg.epochs; ++i) {
    recv.add_term(mismatch_term(residual, y0, sigma, A));
    residual = y - k * recv.apply(cfg.pm_image.pixels);

    const T err2 = residual.norm();
    detail::record_step(trace, i, residual, oracle.call_count() - calls_before);
    detail::check_divergence(residual, err2, min_err2, cfg.divergence_factor, i);
    if (min_err2 == T(0) || err2 < min_err2) min_err2 = err2;
    if (residual.template lpNorm<Eigen::Infinity>() <= cfg.stop_tol) break;
  }
  return {std::move(recv), std::move(trace)};
}

}  // namespace mmrx
