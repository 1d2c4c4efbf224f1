#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mmrx/image.hpp"
#include "mmrx/mismatch.hpp"

using namespace mmrx;
using testgen::gaussian;
using testgen::gaussian_vec;
using testgen::spd;

namespace {

Image<double> as_image(const Vec<double>& v) {
  return Image<double>::from_pixels(v, v.size(), 1);
}

}  // namespace

TEST_CASE("default_sigma on identity and scaled identity") {
  // Square matrices are legal here; only generation and file load insist on
  // M < N.
  const Mat<double> eye = Mat<double>::Identity(2, 2);
  CHECK((default_sigma(eye) - eye).cwiseAbs().maxCoeff() == doctest::Approx(0).epsilon(1e-14));

  const Mat<double> twice = 2.0 * Mat<double>::Identity(2, 2);
  const Mat<double> expected = 0.25 * Mat<double>::Identity(2, 2);
  CHECK((default_sigma(twice) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("default_sigma inverts the Gram matrix of a random system") {
  const Mat<double> A = gaussian<double>(8, 32, 101);
  const Mat<double> sigma = default_sigma(A);
  const Mat<double> residual = A * A.transpose() * sigma - Mat<double>::Identity(8, 8);
  CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((sigma - sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);  // symmetrized exactly
}

TEST_CASE("default_sigma rejects rank-deficient input") {
  Mat<double> A = gaussian<double>(4, 16, 33);
  A.row(3) = A.row(0);  // duplicated row
  CHECK_THROWS_AS(default_sigma(A), RankDeficiencyError);
}

TEST_CASE("mismatch_term hand-checkable identity case") {
  const Mat<double> A = Mat<double>::Identity(2, 2);
  const Mat<double> sigma = Mat<double>::Identity(2, 2);
  Vec<double> y0(2), y(2);
  y0 << 1, 0;
  y << 2, 3;
  const auto term = mismatch_term(y, y0, sigma, A);
  Mat<double> expected(2, 2);
  expected << 2, 0, 3, 0;
  CHECK((term.materialize() - expected).cwiseAbs().maxCoeff() < 1e-15);

  Vec<double> x(2);
  x << 1, 0;  // A x = y0
  CHECK((term.materialize() * x - y).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mismatch_term self-match reproduces the pre-measure value") {
  const Mat<double> A = gaussian<double>(4, 8, 7);
  const Mat<double> sigma = default_sigma(A);
  const Vec<double> x = gaussian_vec<double>(8, 8);
  const Vec<double> y0 = A * x;
  const auto term = mismatch_term(y0, y0, sigma, A);
  const Vec<double> back = term.scale * term.left * term.right.dot(x);
  CHECK((back - y0).cwiseAbs().maxCoeff() <= 1e-12 * y0.cwiseAbs().maxCoeff());
}

TEST_CASE("mismatch_term matches the brute-force materialized product") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const Mat<double> A = gaussian<double>(4, 8, 1000 + trial);
    const Mat<double> sigma = default_sigma(A);
    const Vec<double> x = gaussian_vec<double>(8, 2000 + trial);
    const Vec<double> y = gaussian_vec<double>(4, 3000 + trial);
    const Vec<double> y0 = A * x;

    const auto term = mismatch_term(y, y0, sigma, A);
    // independent oracle: materialize the rank-one matrix and multiply
    const Mat<double> dense = term.scale * (y * (y0.transpose() * sigma * A));
    const Vec<double> via_term = term.materialize() * x;
    CHECK((via_term - dense * x).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((dense * x - y).cwiseAbs().maxCoeff() <= 1e-9 * y.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("matched-pair identity holds for any non-degenerate Sigma") {
  // 100 random instances mixing the default Gram inverse with random SPD
  // choices; the identity does not depend on which Sigma is used.
  int checked = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const Mat<double> A = gaussian<double>(16, 64, 50000 + trial);
    const Mat<double> sigma =
        (trial % 3 == 0) ? default_sigma(A) : spd<double>(16, 60000 + trial);
    const Vec<double> x = gaussian_vec<double>(64, 70000 + trial);
    const Vec<double> y = gaussian_vec<double>(16, 80000 + trial);
    const Vec<double> y0 = A * x;

    const auto term = mismatch_term(y, y0, sigma, A);
    FactoredRecvMatrix<double> recv(16, 64);
    recv.add_term(term);
    const Vec<double> applied = recv.apply(x);
    CHECK((applied - y).cwiseAbs().maxCoeff() <= 1e-9 * y.cwiseAbs().maxCoeff());
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("mismatch_term flags a degenerate pre-measure quadratic form") {
  const Mat<double> A = Mat<double>::Identity(2, 2);
  Mat<double> sigma(2, 2);
  sigma << 1, 0, 0, -1;  // non-zero but indefinite
  Vec<double> y0(2), y(2);
  y0 << 1, 1;  // y0^T Sigma y0 = 0
  y << 1, 2;
  CHECK_THROWS_AS(mismatch_term(y, y0, sigma, A), DegenerateDenominatorError);

  // a zero pre-measure value is degenerate for every Sigma
  CHECK_THROWS_AS(mismatch_term(y, Vec<double>(Vec<double>::Zero(2)),
                                Mat<double>(Mat<double>::Identity(2, 2)), A),
                  DegenerateDenominatorError);
}

TEST_CASE("matched-pair identity across a range of shapes") {
  for (std::uint64_t trial = 0; trial < 24; ++trial) {
    const Index m = 2 + static_cast<Index>(trial % 6) * 3;
    const Index n = m * (2 + static_cast<Index>(trial % 4));
    const Mat<double> A = gaussian<double>(m, n, 90000 + trial);
    const Mat<double> sigma = default_sigma(A);
    const Vec<double> x = gaussian_vec<double>(n, 91000 + trial);
    const Vec<double> y = gaussian_vec<double>(m, 92000 + trial);
    const auto term = mismatch_term(y, Vec<double>(A * x), sigma, A);
    const Vec<double> applied = term.scale * term.left * term.right.dot(x);
    CHECK((applied - y).cwiseAbs().maxCoeff() <= 1e-9 * y.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("multiplier coefficient is exactly 1 on the pre-measure image") {
  const Mat<double> A = gaussian<double>(8, 24, 91);
  const Mat<double> sigma = default_sigma(A);
  const Image<double> pm = random_image<double>(24, 1, 92);
  const Vec<double> y0 = A * pm.pixels;
  const double k = multiplier_coefficient(y0, sigma, A, pm);
  CHECK(std::abs(k - 1.0) <= 1e-12);
}

TEST_CASE("multiplier coefficient is linear in the image") {
  const Mat<double> A = gaussian<double>(8, 24, 95);
  const Mat<double> sigma = default_sigma(A);
  const Image<double> pm = random_image<double>(24, 1, 96);
  const Vec<double> y0 = A * pm.pixels;
  const Vec<double> x = gaussian_vec<double>(24, 97);
  const double k1 = multiplier_coefficient(y0, sigma, A, as_image(x));
  const double k3 = multiplier_coefficient(y0, sigma, A, as_image((3.0 * x).eval()));
  CHECK(std::abs(k3 - 3.0 * k1) <= 1e-12 * std::abs(k3));
}

TEST_CASE("multiplier property: term application equals k(x) times the left factor") {
  // elementwise-ratio oracle over random error vectors
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Mat<double> A = gaussian<double>(6, 18, 300 + trial);
    const Mat<double> sigma = default_sigma(A);
    const Vec<double> pm = gaussian_vec<double>(18, 400 + trial);
    const Vec<double> y0 = A * pm;
    const Vec<double> x = gaussian_vec<double>(18, 500 + trial);
    const double k = multiplier_coefficient(y0, sigma, A, as_image(x));

    for (std::uint64_t e_trial = 0; e_trial < 10; ++e_trial) {
      const Vec<double> e = gaussian_vec<double>(6, 600 + 10 * trial + e_trial);
      const auto term = mismatch_term(e, y0, sigma, A);
      const Vec<double> applied = term.scale * e * term.right.dot(x);
      for (Index i = 0; i < 6; ++i) {
        CHECK(std::abs(applied[i] - k * e[i]) <= 1e-9 * std::max(1.0, std::abs(k * e[i])));
      }
    }
  }
}

TEST_CASE("convergence factor vanishes when the pre-measure image is the target") {
  const Mat<double> A = gaussian<double>(8, 24, 111);
  const Mat<double> sigma = default_sigma(A);
  const Image<double> x = random_image<double>(24, 1, 112);
  const Vec<double> y0 = A * x.pixels;
  CHECK(convergence_factor(y0, sigma, A, x) <= 1e-12);
}

TEST_CASE("convergence factor is 1/2 for a doubled pre-measure image") {
  const Mat<double> A = gaussian<double>(8, 24, 113);
  const Mat<double> sigma = default_sigma(A);
  const Image<double> x = random_image<double>(24, 1, 114);
  const Vec<double> y0 = A * (2.0 * x.pixels);
  CHECK(convergence_factor(y0, sigma, A, x) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("convergence factor ranking: flat < structured < sparse pre-measures") {
  // qualitative ordering against a mid-gray natural-looking target; one
  // representative seeded instance, margins are wide
  const Mat<double> A = gaussian<double>(64, 256, 104);
  const Mat<double> sigma = default_sigma(A);
  Image<double> x = smooth_image<double>(16, 16, 105);
  x.pixels = (x.pixels.array() - x.pixels.mean() + 0.5).matrix();

  const Image<double> pm_flat = flat_gray_image<double>(16, 16);
  const Image<double> pm_structured = smooth_image<double>(16, 16, 111);
  const Image<double> pm_sparse = sparse_image<double>(16, 16, 4, 117);

  const auto keps = [&](const Image<double>& pm) {
    return convergence_factor(Vec<double>(A * pm.pixels), sigma, A, x);
  };
  const double flat = keps(pm_flat);
  const double structured = keps(pm_structured);
  const double sparse = keps(pm_sparse);
  CHECK(flat < structured);
  CHECK(structured < sparse);
}

TEST_CASE("factored apply equals the materialized product") {
  FactoredRecvMatrix<double> recv(16, 64);
  const Mat<double> A = gaussian<double>(16, 64, 130);
  const Mat<double> sigma = default_sigma(A);
  const Vec<double> pm = gaussian_vec<double>(64, 131);
  const Vec<double> y0 = A * pm;
  for (std::uint64_t t = 0; t < 5; ++t) {
    recv.add_term(mismatch_term(gaussian_vec<double>(16, 140 + t), y0, sigma, A));
  }
  const Mat<double> dense = recv.materialize();
  for (std::uint64_t t = 0; t < 10; ++t) {
    const Vec<double> x = gaussian_vec<double>(64, 150 + t);
    const Vec<double> u = gaussian_vec<double>(16, 160 + t);
    const Vec<double> ax = recv.apply(x);
    CHECK((ax - dense * x).cwiseAbs().maxCoeff() <=
          1e-9 * std::max(1.0, ax.cwiseAbs().maxCoeff()));
    const Vec<double> atu = recv.apply_adjoint(u);
    CHECK((atu - dense.transpose() * u).cwiseAbs().maxCoeff() <=
          1e-9 * std::max(1.0, atu.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("factored operator rejects mismatched shapes") {
  FactoredRecvMatrix<double> recv(4, 8);
  CHECK_THROWS_AS(recv.apply(Vec<double>::Zero(7)), DimensionError);
  CHECK_THROWS_AS(recv.apply_adjoint(Vec<double>::Zero(5)), DimensionError);
  CHECK_THROWS_AS(recv.add_term(MismatchTerm<double>{1.0, Vec<double>::Zero(3), Vec<double>::Zero(8)}),
                  DimensionError);
}
