#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mmrx/image.hpp"
#include "mmrx/mismatch.hpp"
#include "mmrx/rng.hpp"
#include "mmrx/types.hpp"

namespace mmrx {

// Componentwise quotient (recv x') / (recv x) with summary statistics.
// Constant-like lambda vectors are the signature of matched (rank-one)
// recoveries; calibration recoveries fluctuate.
template <class T>
struct LambdaReport {
  Vec<T> lambda;  // NaN where the denominator underflowed
  T min = T(0);
  T max = T(0);
  T mean = T(0);
  T coefficient_of_variation = T(0);
  Index excluded = 0;
  bool fluctuating = false;
  T cv_threshold = T(0);
};

// Matching-degree metric: mean over repeated noisy re-measurements of the
// 2-norm residual between the target measurement and the recovered
// operator's response. With zero noise this is a single deterministic norm.
template <class T, class Op>
T match_error(const Vec<T>& y, const Op& recv, const Image<T>& x, int trials, double oracle_noise,
              std::uint64_t seed = 0) {
  if (trials < 1) throw ValidationError("match_error: trials must be >= 1");
  if (y.size() != op_rows(recv)) throw DimensionError("match_error: measurement length mismatch");
  validate_dims(op_rows(recv), op_cols(recv), x.size());

  const Vec<T> response = op_apply(recv, x.pixels);
  if (oracle_noise == 0.0) return (y - response).norm();

  SplitMix64 rng(seed);
  double acc = 0.0;
  Vec<T> perturbed(y.size());
  for (int t = 0; t < trials; ++t) {
    for (Index i = 0; i < y.size(); ++i) {
      perturbed[i] = y[i] + static_cast<T>(oracle_noise * rng.next_gaussian());
    }
    acc += static_cast<double>((perturbed - response).norm());
  }
  return static_cast<T>(acc / trials);
}

template <class T, class Op>
LambdaReport<T> lambda_vector(const Op& recv, const Image<T>& x, const Image<T>& x_prime,
                              T cv_threshold = T(1e-3)) {
  validate_dims(op_rows(recv), op_cols(recv), x.size());
  validate_dims(op_rows(recv), op_cols(recv), x_prime.size());

  const Vec<T> denom = op_apply(recv, x.pixels);
  const Vec<T> numer = op_apply(recv, x_prime.pixels);
  const T denom_scale = denom.template lpNorm<Eigen::Infinity>();
  if (!(denom_scale > T(0))) {
    throw NumericalError("lambda_vector: recv * x is identically zero");
  }
  const T floor = NumericPolicy<T>::lambda_exclusion_tol * denom_scale;

  LambdaReport<T> report;
  report.cv_threshold = cv_threshold;
  report.lambda = Vec<T>::Constant(denom.size(), std::numeric_limits<T>::quiet_NaN());

  std::vector<T> included;
  included.reserve(static_cast<std::size_t>(denom.size()));
  for (Index i = 0; i < denom.size(); ++i) {
    if (std::abs(denom[i]) < floor) {
      ++report.excluded;
      continue;
    }
    report.lambda[i] = numer[i] / denom[i];
    included.push_back(report.lambda[i]);
  }
  if (included.empty()) {
    throw NumericalError("lambda_vector: every component excluded by the underflow guard");
  }

  T sum = T(0), lo = included.front(), hi = included.front();
  for (T v : included) {
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const T mean = sum / static_cast<T>(included.size());
  T var = T(0);
  for (T v : included) var += (v - mean) * (v - mean);
  var /= static_cast<T>(included.size());
  const T sd = std::sqrt(var);

  report.min = lo;
  report.max = hi;
  report.mean = mean;
  if (mean != T(0)) {
    report.coefficient_of_variation = sd / std::abs(mean);
  } else {
    report.coefficient_of_variation = sd > T(0) ? std::numeric_limits<T>::infinity() : T(0);
  }
  report.fluctuating = report.coefficient_of_variation > cv_threshold;
  return report;
}

struct CurvePoint {
  int i = 0;
  double x = 0.0;
  double value = 0.0;
};

// Rows (i, x, (1-x) x^i) of the convergence/noise damping curve family.
inline std::vector<CurvePoint> curve_family(const std::vector<int>& i_values,
                                            const std::vector<double>& x_grid) {
  for (int i : i_values) {
    if (i < 0) throw ValidationError("curve_family: exponents must be >= 0");
  }
  for (double x : x_grid) {
    if (!(std::abs(x) < 1.0)) {
      throw ValidationError("curve_family: grid point " + std::to_string(x) +
                            " is outside (-1, 1)");
    }
  }
  std::vector<CurvePoint> out;
  out.reserve(i_values.size() * x_grid.size());
  for (int i : i_values) {
    for (double x : x_grid) {
      out.push_back(CurvePoint{i, x, (1.0 - x) * std::pow(x, i)});
    }
  }
  return out;
}

struct NoiseLimitStats {
  double empirical_mean = 0.0;
  double empirical_variance = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
  double claimed_variance = 0.0;  // sigma^2 / (1 + k)
  double ar1_variance = 0.0;      // (1 - k) sigma^2 / (1 + k)
  bool claimed_within_3se = false;
  bool ar1_within_3se = false;
  bool discrepancy = false;  // empirical favors the AR(1) form over the claimed one
};

// Stationary statistics of the scalar error recurrence
//   lambda_{k+1} = k_eps * lambda_k + (1 - k_eps) * eps_k,  eps_k ~ N(mu, sigma^2),
// estimated from independent chains run past burn-in, reported next to both
// closed-form variance candidates.
inline NoiseLimitStats noise_limit_stats(double k_eps, double sigma, double mu, int trials,
                                         int burn_in, std::uint64_t seed = 0) {
  if (!(std::abs(k_eps) < 1.0)) {
    throw DivergenceError("noise_limit_stats: |k_eps| >= 1 does not reach a stationary state");
  }
  if (trials < 100) throw ValidationError("noise_limit_stats: need at least 100 trials");
  if (burn_in < 1) throw ValidationError("noise_limit_stats: burn_in must be >= 1");
  if (!(sigma >= 0.0)) throw ValidationError("noise_limit_stats: sigma must be >= 0");

  std::vector<double> samples(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    double lam = 0.0;
    for (int k = 0; k < burn_in; ++k) {
      const double eps = mu + sigma * rng.next_gaussian();
      lam = k_eps * lam + (1.0 - k_eps) * eps;
    }
    samples[static_cast<std::size_t>(t)] = lam;
  }

  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / trials;
  double var = 0.0;
  for (double v : samples) var += (v - mean) * (v - mean);
  var /= (trials - 1);

  NoiseLimitStats stats;
  stats.empirical_mean = mean;
  stats.empirical_variance = var;
  stats.se_mean = std::sqrt(var / trials);
  stats.se_variance = var * std::sqrt(2.0 / (trials - 1));
  stats.claimed_variance = sigma * sigma / (k_eps + 1.0);
  stats.ar1_variance = (1.0 - k_eps) * sigma * sigma / (1.0 + k_eps);
  stats.claimed_within_3se = std::abs(var - stats.claimed_variance) <= 3.0 * stats.se_variance;
  stats.ar1_within_3se = std::abs(var - stats.ar1_variance) <= 3.0 * stats.se_variance;
  stats.discrepancy = stats.ar1_within_3se && !stats.claimed_within_3se;
  return stats;
}

template <class T>
double psnr(const Vec<T>& reference, const Vec<T>& estimate, double peak = 1.0) {
  if (reference.size() != estimate.size()) throw DimensionError("psnr: length mismatch");
  const double mse = (reference - estimate).squaredNorm() / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

// F1 score of the recovered support against the true support. Components
// count as active above a relative magnitude threshold; the default is loose
// enough that single-precision solver residue does not register as support.
template <class T>
double support_f1(const Vec<T>& estimate, const Vec<T>& truth, double rel_threshold = 1e-3) {
  if (estimate.size() != truth.size()) throw DimensionError("support_f1: length mismatch");
  const double et = rel_threshold * static_cast<double>(estimate.template lpNorm<Eigen::Infinity>());
  const double tt = rel_threshold * static_cast<double>(truth.template lpNorm<Eigen::Infinity>());
  Index tp = 0, est_count = 0, truth_count = 0;
  for (Index i = 0; i < truth.size(); ++i) {
    const bool in_est = std::abs(static_cast<double>(estimate[i])) > et && et > 0.0;
    const bool in_truth = std::abs(static_cast<double>(truth[i])) > tt && tt > 0.0;
    est_count += in_est;
    truth_count += in_truth;
    tp += (in_est && in_truth);
  }
  if (est_count == 0 || truth_count == 0) return 0.0;
  const double precision = static_cast<double>(tp) / est_count;
  const double recall = static_cast<double>(tp) / truth_count;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace mmrx
