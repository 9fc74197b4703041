// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "fedstitch/errors.hpp"
#include "fedstitch/numerics.hpp"
#include "oracles.hpp"

namespace nm = fedstitch::numerics;
using nm::Matrix;

TEST_CASE("cka agrees with the Gram-matrix definition") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(4, 32);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix x = oracle::gaussian(40, dim(rng), rng);
    const Matrix y = oracle::gaussian(40, dim(rng), rng, 3.0);
    CHECK(nm::cka(x, y) == doctest::Approx(oracle::gram_cka(x, y)).epsilon(1e-10));
    CHECK(nm::linear_hsic(x, y) == doctest::Approx(oracle::gram_hsic(x, y)).epsilon(1e-10));
  }
}

TEST_CASE("cka is symmetric, bounded and invariant to rotation and scale") {
  std::mt19937_64 rng(12);
  const Matrix x = oracle::gaussian(64, 12, rng);
  const Matrix y = oracle::gaussian(64, 7, rng);
  const double base = nm::cka(x, y);
  CHECK(base >= 0.0);
  CHECK(base <= 1.0);
  CHECK(nm::cka(y, x) == doctest::Approx(base).epsilon(1e-12));
  CHECK(nm::cka(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  const Matrix q = oracle::random_orthogonal(12, rng);
  CHECK(std::abs(nm::cka(x * q, y) - base) < 1e-10);
  CHECK(std::abs(nm::cka(x * 17.5, y * 0.01) - base) < 1e-10);
  // Adding a constant row offset is removed by centering.
  Matrix shifted = x;
  shifted.rowwise() += Eigen::RowVectorXd::Constant(12, 4.0);
  CHECK(std::abs(nm::cka(shifted, y) - base) < 1e-10);
}

TEST_CASE("cka rejects degenerate or mismatched inputs") {
  const Matrix constant = Matrix::Constant(10, 3, 2.0);
  std::mt19937_64 rng(13);
  const Matrix x = oracle::gaussian(10, 3, rng);
  CHECK_THROWS_AS(nm::cka(constant, x), fedstitch::DegenerateError);
  CHECK_THROWS_AS(nm::cka(x, oracle::gaussian(9, 3, rng)), fedstitch::ShapeError);
  CHECK_THROWS_AS(nm::center_columns(Matrix(1, 3)), fedstitch::DegenerateError);
}

TEST_CASE("svd reconstructs its input with descending singular values") {
  std::mt19937_64 rng(14);
  const Matrix x = oracle::gaussian(20, 6, rng);
  const nm::SvdResult s = nm::svd(x);
  const Matrix rebuilt = s.u * s.singular_values.asDiagonal() * s.vt;
  CHECK((rebuilt - x).norm() < 1e-12 * x.norm() * 10);
  for (Eigen::Index i = 1; i < s.singular_values.size(); ++i) {
    CHECK(s.singular_values(i) <= s.singular_values(i - 1));
  }
}

TEST_CASE("pseudoinverse satisfies the four Penrose conditions") {
  std::mt19937_64 rng(15);
  // Rank 3 matrix, 12 x 8.
  const Matrix x = oracle::gaussian(12, 3, rng) * oracle::gaussian(3, 8, rng);
  const Matrix p = nm::pseudoinverse(x);
  CHECK((x * p * x - x).norm() < 1e-10);
  CHECK((p * x * p - p).norm() < 1e-10);
  CHECK(((x * p).transpose() - x * p).norm() < 1e-10);
  CHECK(((p * x).transpose() - p * x).norm() < 1e-10);
}

TEST_CASE("fit_adapter minimises the residual like the normal equations") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix x = oracle::gaussian(50, 9, rng);
    const Matrix y = oracle::gaussian(50, 5, rng);
    const Matrix a = nm::fit_adapter(x, y);
    REQUIRE(a.rows() == 5);
    REQUIRE(a.cols() == 9);
    const Matrix ref = oracle::normal_equations_adapter(x, y);
    CHECK(oracle::residual(x, a, y) == doctest::Approx(oracle::residual(x, ref, y)).epsilon(1e-10));
    CHECK((a - ref).norm() < 1e-9);
  }
}

TEST_CASE("fit_adapter recovers an exact linear map") {
  std::mt19937_64 rng(17);
  const Matrix x = oracle::gaussian(30, 6, rng);
  const Matrix a0 = oracle::gaussian(4, 6, rng);
  const Matrix a = nm::fit_adapter(x, x * a0.transpose());
  CHECK((a - a0).norm() < 1e-10);
  CHECK((nm::apply_adapter(a, x) - x * a0.transpose()).norm() < 1e-9);
}

TEST_CASE("adapter_from_pinv matches fit_adapter") {
  std::mt19937_64 rng(18);
  const Matrix x = oracle::gaussian(25, 7, rng);
  const Matrix y = oracle::gaussian(25, 3, rng);
  const Matrix fitted = nm::fit_adapter(x, y);
  const Matrix cached = nm::adapter_from_pinv(nm::pseudoinverse(x), y);
  CHECK(fitted == cached);
  CHECK_THROWS_AS(nm::adapter_from_pinv(nm::pseudoinverse(x), oracle::gaussian(24, 3, rng)),
                  fedstitch::ShapeError);
}

TEST_CASE("fit_adapter on rank-deficient input returns the minimum-norm solution") {
  std::mt19937_64 rng(19);
  Matrix x = oracle::gaussian(20, 4, rng);
  x.col(3) = x.col(0) * 2.0;  // rank 3
  const Matrix y = oracle::gaussian(20, 2, rng);
  const Matrix a = nm::fit_adapter(x, y);
  CHECK(nm::all_finite(a));
  // Any least-squares solution differs from the minimum-norm one by a null
  // space component; that component must be absent.
  Eigen::VectorXd null(4);
  null << 2.0, 0.0, 0.0, -1.0;
  null.normalize();
  CHECK((a * null).norm() < 1e-10);
  CHECK_THROWS_AS(nm::fit_adapter(x, oracle::gaussian(19, 2, rng)), fedstitch::ShapeError);
}
