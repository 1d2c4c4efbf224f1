#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "mmrx/rng.hpp"
#include "mmrx/types.hpp"

namespace mmrx {

// Flattened row-major grayscale image; width/height are kept only for I/O and
// display, all math treats the pixel vector as the unknown x.
template <class T>
struct Image {
  Vec<T> pixels;
  Index width = 0;
  Index height = 0;

  Index size() const { return pixels.size(); }
  bool is_zero() const { return pixels.size() == 0 || pixels.template lpNorm<Eigen::Infinity>() == T(0); }

  static Image from_pixels(Vec<T> p, Index w, Index h) {
    if (w < 1 || h < 1 || w * h != p.size()) {
      throw ValidationError("image dimensions " + std::to_string(w) + "x" + std::to_string(h) +
                            " do not match pixel count " + std::to_string(p.size()));
    }
    check_finite(p, "image");
    return Image{std::move(p), w, h};
  }
};

template <class T>
void validate_dims(const Mat<T>& A, const Image<T>& x) {
  validate_dims(A.rows(), A.cols(), x.size());
}

template <class T>
Image<T> flat_gray_image(Index w, Index h, T level = T(0.5)) {
  return Image<T>::from_pixels(Vec<T>::Constant(w * h, level), w, h);
}

template <class T>
Image<T> random_image(Index w, Index h, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Vec<T> p(w * h);
  for (Index i = 0; i < p.size(); ++i) p[i] = static_cast<T>(rng.next_double());
  return Image<T>::from_pixels(std::move(p), w, h);
}

// Non-negative pixel-sparse image: `nonzeros` distinct spikes in [0.5, 1.5].
template <class T>
Image<T> sparse_image(Index w, Index h, Index nonzeros, std::uint64_t seed) {
  const Index n = w * h;
  if (nonzeros < 1 || nonzeros > n) throw ValidationError("sparse image: bad nonzero count");
  SplitMix64 rng(seed);
  Vec<T> p = Vec<T>::Zero(n);
  Index placed = 0;
  while (placed < nonzeros) {
    const Index at = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(n));
    if (p[at] != T(0)) continue;
    p[at] = static_cast<T>(0.5 + rng.next_double());
    ++placed;
  }
  return Image<T>::from_pixels(std::move(p), w, h);
}

// Smooth synthetic stand-in for a natural image: a few additive Gaussian
// bumps over the plane, normalized to [0, 1].
template <class T>
Image<T> smooth_image(Index w, Index h, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const int bumps = 4;
  Vec<double> p = Vec<double>::Zero(w * h);
  for (int b = 0; b < bumps; ++b) {
    const double cx = rng.next_double() * static_cast<double>(w);
    const double cy = rng.next_double() * static_cast<double>(h);
    const double rad = (0.15 + 0.25 * rng.next_double()) * static_cast<double>(std::max(w, h));
    const double amp = 0.3 + 0.7 * rng.next_double();
    for (Index yy = 0; yy < h; ++yy) {
      for (Index xx = 0; xx < w; ++xx) {
        const double dx = (static_cast<double>(xx) - cx) / rad;
        const double dy = (static_cast<double>(yy) - cy) / rad;
        p[yy * w + xx] += amp * std::exp(-(dx * dx + dy * dy));
      }
    }
  }
  const double top = p.maxCoeff();
  if (top > 0) p /= top;
  Vec<T> out(p.size());
  for (Index i = 0; i < p.size(); ++i) out[i] = static_cast<T>(p[i]);
  return Image<T>::from_pixels(std::move(out), w, h);
}

inline std::pair<Index, Index> image_shape_for(Index n) {
  const auto side = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side == n) return {side, side};
  return {n, 1};
}

template <class T>
Image<T> builtin_image(std::string_view name, Index n, std::uint64_t seed, Index sparsity = 8) {
  const auto [w, h] = image_shape_for(n);
  if (name == "flat_gray") return flat_gray_image<T>(w, h);
  if (name == "random") return random_image<T>(w, h, seed);
  if (name == "sparse") return sparse_image<T>(w, h, sparsity, seed);
  if (name == "smooth") return smooth_image<T>(w, h, seed);
  throw ValidationError("unknown builtin image '" + std::string(name) + "'");
}

}  // namespace mmrx
