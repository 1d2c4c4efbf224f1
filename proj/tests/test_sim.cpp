#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mmrx/calibration.hpp"
#include "mmrx/sim.hpp"

using namespace mmrx;

TEST_CASE("system generation is deterministic in the seed") {
  SystemSpec spec;
  spec.m = 16;
  spec.n = 64;
  spec.seed = 9;
  auto [a1, o1] = generate_system<double>(spec);
  auto [a2, o2] = generate_system<double>(spec);
  CHECK((a1 - a2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((o1.true_matrix_for_tests() - o2.true_matrix_for_tests()).cwiseAbs().maxCoeff() == 0.0);

  spec.seed = 10;
  auto [a3, o3] = generate_system<double>(spec);
  CHECK((a1 - a3).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("the known and hidden draws are different matrices") {
  SystemSpec spec;
  spec.m = 8;
  spec.n = 32;
  spec.seed = 11;
  auto [A, oracle] = generate_system<double>(spec);
  CHECK((A - oracle.true_matrix_for_tests()).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("entry variance matches the 1/M scaling") {
  SystemSpec spec;
  spec.m = 100;
  spec.n = 10000;
  spec.seed = 5;
  auto [A, oracle] = generate_system<double>(spec);
  // pool both independent draws: two million samples
  const Mat<double>& B = oracle.true_matrix_for_tests();
  const double n = static_cast<double>(A.size() + B.size());
  const double mean = (A.sum() + B.sum()) / n;
  const double var =
      ((A.array() - mean).square().sum() + (B.array() - mean).square().sum()) / (n - 1);
  const double expected = 1.0 / 100.0;
  const double se = expected * std::sqrt(2.0 / (n - 1));
  CHECK(std::abs(var - expected) <= 3.0 * se);
}

TEST_CASE("noiseless measurement equals the hidden product and counts one call") {
  SystemSpec spec;
  spec.m = 8;
  spec.n = 32;
  spec.seed = 13;
  auto [A, oracle] = generate_system<double>(spec);
  const Image<double> x = random_image<double>(32, 1, 14);
  const long before = oracle.call_count();
  const Vec<double> y = oracle.speckle_measure(x);
  CHECK(oracle.call_count() - before == 1);
  CHECK((y - oracle.true_matrix_for_tests() * x.pixels).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("measurement noise has the configured standard deviation") {
  SystemSpec spec;
  spec.m = 4;
  spec.n = 16;
  spec.seed = 15;
  spec.noise_sigma = 1.0;
  auto [A, oracle] = generate_system<double>(spec);
  const Image<double> x = random_image<double>(16, 1, 16);
  const Vec<double> clean = oracle.true_matrix_for_tests() * x.pixels;

  const int reps = 10000;
  Mat<double> noise(4, reps);
  for (int r = 0; r < reps; ++r) noise.col(r) = oracle.speckle_measure(x) - clean;
  for (Index i = 0; i < 4; ++i) {
    const double mean = noise.row(i).mean();
    const double sd = std::sqrt((noise.row(i).array() - mean).square().sum() / (reps - 1));
    CHECK(std::abs(sd - 1.0) <= 0.05);
  }
  CHECK(oracle.call_count() == reps);
}

TEST_CASE("noise sequences are reproducible given the seed") {
  const Mat<double> hidden = testgen::gaussian<double>(4, 16, 17);
  MeasurementOracle<double> o1(hidden, 0.5, 99);
  MeasurementOracle<double> o2(hidden, 0.5, 99);
  const Image<double> x = random_image<double>(16, 1, 18);
  for (int i = 0; i < 5; ++i) {
    CHECK((o1.speckle_measure(x) - o2.speckle_measure(x)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("basis batch measures every column and charges M calls") {
  SystemSpec spec;
  spec.m = 8;
  spec.n = 32;
  spec.seed = 19;
  auto [A, oracle] = generate_system<double>(spec);
  const auto basis = orthonormal_basis(A);
  const long before = oracle.call_count();
  const Mat<double> measured = oracle.measure_basis_batch(basis.Q);
  CHECK(oracle.call_count() - before == 8);
  CHECK((measured - oracle.true_matrix_for_tests() * basis.Q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("batch noise is independent across columns") {
  const Mat<double> hidden = testgen::gaussian<double>(4, 8, 20);
  const Mat<double> basis = testgen::gaussian<double>(8, 2, 21);
  const Mat<double> clean = hidden * basis;

  MeasurementOracle<double> oracle(hidden, 1.0, 22);
  const int reps = 4000;
  Vec<double> a(reps), b(reps);
  for (int r = 0; r < reps; ++r) {
    const Mat<double> noisy = oracle.measure_basis_batch(basis);
    a[r] = noisy(0, 0) - clean(0, 0);
    b[r] = noisy(0, 1) - clean(0, 1);
  }
  const double corr = (a.array() - a.mean()).matrix().dot((b.array() - b.mean()).matrix()) /
                      (std::sqrt((a.array() - a.mean()).square().sum()) *
                       std::sqrt((b.array() - b.mean()).square().sum()));
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("constructed-operator measurement needs a pinned target") {
  SystemSpec spec;
  spec.m = 4;
  spec.n = 16;
  spec.seed = 23;
  auto [A, oracle] = generate_system<double>(spec);
  FactoredRecvMatrix<double> recv(4, 16);
  CHECK_THROWS_AS(oracle.measure_constructed(recv), ValidationError);
}

TEST_CASE("system spec validation") {
  SystemSpec spec;
  spec.m = 64;
  spec.n = 64;
  spec.seed = 1;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.n = 128;
  spec.noise_sigma = -1;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec.noise_sigma = 0;
  CHECK_NOTHROW(spec.validate());
}
