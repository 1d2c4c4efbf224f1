#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "mmrx/image.hpp"
#include "mmrx/mismatch.hpp"
#include "mmrx/rng.hpp"
#include "mmrx/types.hpp"

namespace mmrx {

enum class MatrixModel { GaussianIid };

// Simulated acquisition system: two independent Gaussian draws stand in for
// the before/after states of a physically perturbed system. Entries are
// N(0, 1/M) so measurement magnitudes stay comparable across M.
struct SystemSpec {
  Index m = 0;
  Index n = 0;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  MatrixModel model = MatrixModel::GaussianIid;

  void validate() const {
    if (m < 1 || n < 1) throw ValidationError("system dimensions must be positive");
    if (m >= n) {
      throw ValidationError("measurement count M=" + std::to_string(m) +
                            " must be smaller than pixel count N=" + std::to_string(n));
    }
    if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  }
};

// Black-box measurement channel holding the hidden true matrix. Every
// measurement returns the true response plus sigma * N(0,1) noise and is
// charged against the call counter; solvers never see the matrix itself.
//
// For matched-solve sessions the target image is pinned inside the oracle:
// a solver hands over its current recovered operator and gets back that
// operator's (noisy) response to the hidden target, exactly as a physical
// re-measurement of the scene would.
template <class T>
class MeasurementOracle {
 public:
  MeasurementOracle(Mat<T> true_matrix, double noise_sigma, std::uint64_t noise_seed)
      : hidden_(std::move(true_matrix)), sigma_(noise_sigma), rng_(noise_seed) {
    if (sigma_ < 0) throw ValidationError("noise sigma must be >= 0");
    check_finite(hidden_, "true measurement matrix");
  }

  Index rows() const { return hidden_.rows(); }
  Index cols() const { return hidden_.cols(); }
  double noise_sigma() const { return sigma_; }
  long call_count() const { return calls_; }

  void pin_target(Image<T> x) {
    validate_dims(hidden_.rows(), hidden_.cols(), x.size());
    target_ = std::move(x);
  }
  bool has_target() const { return target_.has_value(); }
  const Image<T>& target_for_tests() const {
    if (!target_) throw ValidationError("oracle has no pinned target");
    return *target_;
  }

  // y = A_u x + sigma * N(0,1); one call against the budget.
  Vec<T> speckle_measure(const Image<T>& x) {
    validate_dims(hidden_.rows(), hidden_.cols(), x.size());
    ++calls_;
    return add_noise(hidden_ * x.pixels);
  }

  // Response of a caller-supplied recovered operator to the pinned target,
  // with the same noise model; one call against the budget.
  Vec<T> measure_constructed(const FactoredRecvMatrix<T>& recv) {
    if (!target_) throw ValidationError("measure_constructed requires a pinned target image");
    if (recv.rows() != hidden_.rows() || recv.cols() != hidden_.cols()) {
      throw DimensionError("constructed operator shape does not match the measurement system");
    }
    ++calls_;
    return add_noise(recv.apply(target_->pixels));
  }

  // Measures every basis column; counts as one measurement per column with
  // independent noise draws.
  Mat<T> measure_basis_batch(const Mat<T>& basis_columns) {
    validate_dims(hidden_.rows(), hidden_.cols(), basis_columns.rows());
    const Index count = basis_columns.cols();
    Mat<T> out(hidden_.rows(), count);
    for (Index j = 0; j < count; ++j) {
      out.col(j) = add_noise(hidden_ * basis_columns.col(j));
      ++calls_;
    }
    return out;
  }

  // Escape hatch for oracle-based assertions in tests and simulation-side
  // diagnostics only; nothing in the solvers touches this.
  const Mat<T>& true_matrix_for_tests() const { return hidden_; }

 private:
  Vec<T> add_noise(Vec<T> clean) {
    if (sigma_ > 0) {
      for (Index i = 0; i < clean.size(); ++i) {
        clean[i] += static_cast<T>(sigma_ * rng_.next_gaussian());
      }
    }
    return clean;
  }

  Mat<T> hidden_;
  double sigma_;
  SplitMix64 rng_;
  long calls_ = 0;
  std::optional<Image<T>> target_;
};

namespace detail {

// Entries are drawn in double and rounded once to T, so single- and
// double-precision runs of the same seed see the same underlying system.
template <class T>
Mat<T> gaussian_matrix(Index m, Index n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  Mat<T> out(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      out(i, j) = static_cast<T>(scale * rng.next_gaussian());
    }
  }
  return out;
}

}  // namespace detail

inline constexpr std::uint64_t kStreamPreMatrix = 0;
inline constexpr std::uint64_t kStreamTrueMatrix = 1;
inline constexpr std::uint64_t kStreamNoise = 2;
inline constexpr std::uint64_t kStreamImages = 3;

// Draws the known pre-measurement matrix and an independent hidden matrix,
// wrapping the latter in an oracle. Deterministic in spec.seed.
template <class T>
std::pair<Mat<T>, MeasurementOracle<T>> generate_system(const SystemSpec& spec) {
  spec.validate();
  Mat<T> pre = detail::gaussian_matrix<T>(spec.m, spec.n, derive_seed(spec.seed, kStreamPreMatrix));
  Mat<T> hidden = detail::gaussian_matrix<T>(spec.m, spec.n, derive_seed(spec.seed, kStreamTrueMatrix));
  return {std::move(pre),
          MeasurementOracle<T>(std::move(hidden), spec.noise_sigma, derive_seed(spec.seed, kStreamNoise))};
}

}  // namespace mmrx
