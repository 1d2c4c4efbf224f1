#pragma once

// Shared generators for the property-style tests.

#include "mmrx/rng.hpp"
#include "mmrx/types.hpp"

namespace mmrx::testgen {

template <class T>
Mat<T> gaussian(Index rows, Index cols, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Mat<T> m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<T>(rng.next_gaussian());
  }
  return m;
}

template <class T>
Vec<T> gaussian_vec(Index n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Vec<T> v(n);
  for (Index i = 0; i < n; ++i) v[i] = static_cast<T>(rng.next_gaussian());
  return v;
}

// Well-conditioned random symmetric positive-definite matrix.
template <class T>
Mat<T> spd(Index n, std::uint64_t seed) {
  Mat<T> b = gaussian<T>(n, n, seed);
  Mat<T> s = b * b.transpose();
  s += Mat<T>::Identity(n, n) * (T(0.1) * s.trace() / static_cast<T>(n));
  return s;
}

}  // namespace mmrx::testgen
