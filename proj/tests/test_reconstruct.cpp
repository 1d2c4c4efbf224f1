#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mmrx/diagnostics.hpp"
#include "mmrx/reconstruct.hpp"
#include "mmrx/sim.hpp"

using namespace mmrx;
using testgen::gaussian;
using testgen::gaussian_vec;

TEST_CASE("soft threshold componentwise definition") {
  Vec<double> v(3);
  v << 3, -1, 0.5;
  Vec<double> expected(3);
  expected << 2, 0, 0;
  CHECK((soft_threshold(v, 1.0) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("soft threshold with zero threshold is the identity") {
  const Vec<double> v = gaussian_vec<double>(32, 400);
  CHECK((soft_threshold(v, 0.0) - v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("soft threshold matches per-component brute force") {
  const Vec<double> v = gaussian_vec<double>(64, 401);
  const double t = 0.7;
  const Vec<double> out = soft_threshold(v, t);
  for (Index i = 0; i < v.size(); ++i) {
    double expect = 0.0;
    if (v[i] > t) expect = v[i] - t;
    if (v[i] < -t) expect = v[i] + t;
    CHECK(out[i] == expect);
  }
}

TEST_CASE("soft threshold rejects negative thresholds") {
  CHECK_THROWS_AS(soft_threshold(Vec<double>(Vec<double>::Ones(2)), -0.1), ValidationError);
}

TEST_CASE("zero measurement reconstructs the zero image") {
  const Mat<double> A = gaussian<double>(8, 32, 402) / std::sqrt(8.0);
  ReconstructConfig<double> cfg;
  cfg.lambda_reg = 1e-3;
  auto [x, report] = reconstruct(Vec<double>(Vec<double>::Zero(8)), A, cfg);
  CHECK(x.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("orthonormal-row operator with one-sparse signal recovers exactly") {
  const Mat<double> g = gaussian<double>(24, 8, 403);
  Eigen::HouseholderQR<Mat<double>> qr(g);
  const Mat<double> A = (qr.householderQ() * Mat<double>::Identity(24, 8)).transpose();

  Vec<double> x0 = Vec<double>::Zero(24);
  x0[7] = 1.25;
  const Vec<double> y = A * x0;

  ReconstructConfig<double> cfg;
  cfg.lambda_reg = 1e-4;
  cfg.nonneg = true;
  auto [x, report] = reconstruct(y, A, cfg);
  CHECK(support_f1(x, x0) == 1.0);
  CHECK((x - x0).norm() <= 1e-6 * x0.norm());
}

TEST_CASE("a mismatched matrix fails to recover the signal") {
  SystemSpec spec;
  spec.m = 64;
  spec.n = 256;
  spec.seed = 404;
  auto [A, oracle] = generate_system<double>(spec);
  const Image<double> x0 = sparse_image<double>(16, 16, 8, 405);
  const Vec<double> y = oracle.speckle_measure(x0);

  ReconstructConfig<double> cfg;
  cfg.lambda_reg = auto_lambda<double>(A, y);
  auto [x_bad, report] = reconstruct(y, A, cfg);  // pre-measurement matrix, not the hidden one
  CHECK(support_f1(x_bad, x0.pixels) < 0.5);

  ReconstructConfig<double> cfg2;
  cfg2.lambda_reg = auto_lambda<double>(oracle.true_matrix_for_tests(), y);
  auto [x_good, report2] = reconstruct(y, oracle.true_matrix_for_tests(), cfg2);
  CHECK(support_f1(x_good, x0.pixels) == 1.0);
  CHECK((x_good - x0.pixels).norm() <= 1e-6 * x0.pixels.norm());
}

TEST_CASE("objective trace is non-increasing") {
  const Mat<double> A = gaussian<double>(16, 64, 406) / 4.0;
  const Vec<double> x0 = gaussian_vec<double>(64, 407);
  const Vec<double> y = A * x0;
  ReconstructConfig<double> cfg;
  cfg.lambda_reg = 1e-2;
  cfg.nonneg = false;
  cfg.max_iters = 300;
  auto [x, report] = reconstruct(y, A, cfg);
  for (std::size_t i = 1; i < report.objective_trace.size(); ++i) {
    CHECK(report.objective_trace[i] <= report.objective_trace[i - 1]);
  }
}

TEST_CASE("factored operator adjoint is consistent") {
  SystemSpec spec;
  spec.m = 16;
  spec.n = 64;
  spec.seed = 408;
  auto [A, oracle] = generate_system<double>(spec);
  FactoredRecvMatrix<double> recv(16, 64);
  const Mat<double> sigma = default_sigma(A);
  const Vec<double> pm = gaussian_vec<double>(64, 409);
  const Vec<double> y0 = A * pm;
  for (std::uint64_t t = 0; t < 6; ++t) {
    recv.add_term(mismatch_term(gaussian_vec<double>(16, 410 + t), y0, sigma, A));
  }
  for (std::uint64_t t = 0; t < 10; ++t) {
    const Vec<double> x = gaussian_vec<double>(64, 420 + t);
    const Vec<double> u = gaussian_vec<double>(16, 430 + t);
    const double lhs = recv.apply(x).dot(u);
    const double rhs = x.dot(recv.apply_adjoint(u));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("a prox fixed point does not move") {
  // start the solver exactly at the solution of the orthonormal case
  const Mat<double> g = gaussian<double>(24, 8, 440);
  Eigen::HouseholderQR<Mat<double>> qr(g);
  const Mat<double> A = (qr.householderQ() * Mat<double>::Identity(24, 8)).transpose();
  Vec<double> x0 = Vec<double>::Zero(24);
  x0[3] = 2.0;
  const Vec<double> y = A * x0;

  ReconstructConfig<double> cfg;
  cfg.lambda_reg = 1e-3;
  cfg.max_iters = 800;
  cfg.debias = false;
  auto [x_star, report] = reconstruct(y, A, cfg);
  REQUIRE(report.converged);

  ReconstructConfig<double> one_more = cfg;
  one_more.max_iters = 1;
  auto [x_next, report2] = reconstruct(y, A, one_more, &x_star);
  CHECK((x_next - x_star).cwiseAbs().maxCoeff() <= cfg.conv_tol);
}

TEST_CASE("fixed step rule also solves the problem") {
  const Mat<double> A = gaussian<double>(16, 48, 441) / 4.0;
  Vec<double> x0 = Vec<double>::Zero(48);
  x0[5] = 1.0;
  x0[17] = 0.75;
  const Vec<double> y = A * x0;
  ReconstructConfig<double> cfg;
  cfg.lambda_reg = 1e-4;
  cfg.step_rule = StepRule::Fixed;
  auto [x, report] = reconstruct(y, A, cfg);
  CHECK(support_f1(x, x0) == 1.0);
}

TEST_CASE("non-convergence is reported, not thrown") {
  const Mat<double> A = gaussian<double>(16, 64, 442) / 4.0;
  const Vec<double> y = A * gaussian_vec<double>(64, 443);
  ReconstructConfig<double> cfg;
  cfg.lambda_reg = 1e-8;
  cfg.max_iters = 3;  // far too few
  cfg.debias = false;
  auto [x, report] = reconstruct(y, A, cfg);
  CHECK_FALSE(report.converged);
  CHECK(report.iterations == 3);
}

TEST_CASE("reconstruct validates its configuration") {
  const Mat<double> A = gaussian<double>(4, 8, 444);
  ReconstructConfig<double> cfg;  // lambda_reg unset
  CHECK_THROWS_AS(reconstruct(Vec<double>(Vec<double>::Zero(4)), A, cfg), ValidationError);
}
