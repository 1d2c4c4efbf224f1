#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mmrx {

using Index = Eigen::Index;

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Floating-point width used by all solver arithmetic. Fixed for the lifetime
// of a run and recorded in every output; single mode is genuinely 32-bit end
// to end (every kernel is instantiated on float, no double temporaries).
enum class PrecisionMode { Single, Double };

inline const char* to_string(PrecisionMode mode) {
  return mode == PrecisionMode::Single ? "single" : "double";
}

inline std::optional<PrecisionMode> parse_precision(std::string_view s) {
  if (s == "single" || s == "float32" || s == "f32") return PrecisionMode::Single;
  if (s == "double" || s == "float64" || s == "f64") return PrecisionMode::Double;
  return std::nullopt;
}

template <class T>
constexpr PrecisionMode precision_of();
template <>
constexpr PrecisionMode precision_of<float>() { return PrecisionMode::Single; }
template <>
constexpr PrecisionMode precision_of<double>() { return PrecisionMode::Double; }

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatches between operators and vectors/images.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid configuration or domain values (CLI exit code 2).
struct ValidationError : Error {
  using Error::Error;
};

// Base for numerical failures (CLI exit code 3).
struct NumericalError : Error {
  using Error::Error;
};

struct RankDeficiencyError : NumericalError {
  using NumericalError::NumericalError;
};

struct IllConditionedError : NumericalError {
  using NumericalError::NumericalError;
};

struct DegenerateDenominatorError : NumericalError {
  using NumericalError::NumericalError;
};

struct DivergenceError : NumericalError {
  using NumericalError::NumericalError;
};

// File-format and filesystem failures (CLI exit code 4).
struct IoError : Error {
  using Error::Error;
};

// Per-precision guard thresholds. The relative denominator guard is mandatory
// for arbitrary pre-measure images; nothing in the algebra forbids a chosen
// pre-measure from landing on a degenerate quadratic form.
template <class T>
struct NumericPolicy;

template <>
struct NumericPolicy<double> {
  static constexpr double denom_tol = 1e-12;
  static constexpr double rank_rcond_tol = 1e-12;
  static constexpr double inverse_residual_tol = 1e-8;
  static constexpr double cond_bound = 1e8;
  static constexpr double zero_component_tol = 1e-9;
  static constexpr double lambda_exclusion_tol = 1e-12;
};

template <>
struct NumericPolicy<float> {
  static constexpr float denom_tol = 1e-6f;
  static constexpr float rank_rcond_tol = 1e-5f;
  static constexpr float inverse_residual_tol = 1e-2f;
  static constexpr float cond_bound = 1e4f;
  static constexpr float zero_component_tol = 1e-4f;
  static constexpr float lambda_exclusion_tol = 1e-6f;
};

// Shape-level check; usable at paper scale without allocating the matrix.
inline void validate_dims(Index rows, Index cols, Index pixel_count) {
  if (cols != pixel_count) {
    throw DimensionError("measurement matrix is " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " but image has " +
                         std::to_string(pixel_count) + " pixels");
  }
}

template <class T>
void check_finite(const Mat<T>& m, const char* what) {
  if (!m.allFinite()) throw ValidationError(std::string(what) + " contains non-finite entries");
}

template <class T>
void check_finite(const Vec<T>& v, const char* what) {
  if (!v.allFinite()) throw ValidationError(std::string(what) + " contains non-finite entries");
}

// Factory guard for measurement matrices entering through generation or file
// load. Tests may build square/tall matrices directly when an identity case
// is convenient; the compressed-sensing setting itself requires M < N.
template <class T>
Mat<T> checked_measurement_matrix(Mat<T> entries) {
  if (entries.rows() < 1 || entries.cols() < 1) {
    throw ValidationError("measurement matrix must be non-empty");
  }
  if (entries.rows() >= entries.cols()) {
    throw ValidationError("measurement count M=" + std::to_string(entries.rows()) +
                          " must be smaller than pixel count N=" +
                          std::to_string(entries.cols()));
  }
  check_finite(entries, "measurement matrix");
  return entries;
}

}  // namespace mmrx
