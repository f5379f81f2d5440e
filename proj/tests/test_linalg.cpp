#include <cmath>
#include <random>

#include "bmolab/error.hpp"
#include "bmolab/linalg.hpp"
#include "doctest.h"

using namespace bmolab;

namespace {

Matrix rotation(double deg) {
  const double t = deg * M_PI / 180.0;
  return Matrix{{std::cos(t), -std::sin(t)}, {std::sin(t), std::cos(t)}};
}

Matrix random_matrix(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = n01(rng);
  return m;
}

// Seeded PD matrix with condition number exactly `cond`.
Matrix random_pd(int d, double cond, std::mt19937_64& rng) {
  const Matrix m = random_matrix(d, rng);
  const auto q = eigen_symmetric(m + m.transpose()).vectors;
  std::vector<double> l(d);
  for (int i = 0; i < d; ++i) l[i] = std::pow(cond, d == 1 ? 0.0 : static_cast<double>(i) / (d - 1));
  return q * Matrix::diagonal(l) * q.transpose();
}

// Independent oracle: plain power iteration on A^T A.
double power_iteration_norm(const Matrix& a) {
  const Matrix ata = a.transpose() * a;
  std::vector<double> x(a.cols(), 1.0);
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    auto y = ata * std::span<const double>(x);
    const double n = euclidean_norm(y);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = y[i] / n;
    if (std::abs(n - lambda) <= 1e-15 * n) break;
    lambda = n;
  }
  return std::sqrt(lambda);
}

}  // namespace

TEST_CASE("hermitian_power examples") {
  const auto id = hermitian_power(HermitianPD::identity(3), 0.5);
  CHECK(max_abs_diff(id.matrix(), Matrix::identity(3)) < 1e-15);

  const auto r = hermitian_power(HermitianPD(Matrix{{4, 0}, {0, 9}}), 0.5);
  CHECK(max_abs_diff(r.matrix(), Matrix{{2, 0}, {0, 3}}) < 1e-14);

  const Matrix q = rotation(30.0);
  const Matrix a = q * Matrix{{4, 0}, {0, 9}} * q.transpose();
  const Matrix expect = q * Matrix{{2, 0}, {0, 3}} * q.transpose();
  CHECK(max_abs_diff(hermitian_power(HermitianPD(a), 0.5).matrix(), expect) < 1e-10);
}

TEST_CASE("hermitian_power round trips on a seeded corpus") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 4;
    const double cond = std::pow(10.0, trial % 7);
    const Matrix a = random_pd(d, cond, rng);
    const HermitianPD pd(a);
    CHECK(max_abs_diff(hermitian_power(pd, 1.0).matrix(), a) <= 1e-10 * frobenius(a));
    for (double s : {0.5, 2.0, -1.0, 1.0 / (3.0 - 1.0), 1.0 / (1.5 - 1.0)}) {
      const auto back = hermitian_power(hermitian_power(pd, s), 1.0 / s);
      CHECK(max_abs_diff(back.matrix(), a) <= 1e-8 * frobenius(a));
    }
  }
}

TEST_CASE("floor clamps degenerate eigenvalues and negative powers report them") {
  const HermitianPD pd(Matrix{{1, 0}, {0, 0}});
  CHECK(pd.clamped() == 1);
  CHECK(pd.min_eigenvalue() == doctest::Approx(kEigFloor));
  CHECK_THROWS_AS(hermitian_power(pd, -40.0), NonFinite);
  CHECK_THROWS_AS(HermitianPD(Matrix{{1, 2}, {0, 1}}), NotSymmetric);
}

TEST_CASE("op_norm") {
  CHECK(op_norm(Matrix::identity(3)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(op_norm(Matrix{{0, 2}, {0, 0}}) == doctest::Approx(2.0).epsilon(1e-14));
  std::mt19937_64 rng(2024);
  for (int d : {2, 3, 4, 5}) {
    const Matrix a = random_matrix(d, rng);
    CHECK(op_norm(a) == doctest::Approx(power_iteration_norm(a)).epsilon(1e-8));
  }
}

TEST_CASE("column_norm_sum sandwich") {
  CHECK(column_norm_sum(Matrix::identity(3)) == doctest::Approx(3.0));
  CHECK(column_norm_sum(Matrix{{1, 0}, {0, 2}}) == doctest::Approx(3.0));
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 6;
    const Matrix a = random_matrix(d, rng);
    const double v = column_norm_sum(a);
    const double n = op_norm(a);
    CHECK(n <= v * (1 + 1e-12));
    CHECK(v <= d * n * (1 + 1e-12));
  }
}

TEST_CASE("realification commutes with products and powers") {
  using C = std::complex<double>;
  // Hermitian PD complex matrix.
  const ComplexMatrix h = {{C(3, 0), C(1, 1)}, {C(1, -1), C(2, 0)}};
  const Matrix r = realify(h);
  CHECK(max_abs_diff(r, r.transpose()) == 0.0);
  const auto sq = hermitian_power(HermitianPD(r), 0.5).matrix();
  CHECK(max_abs_diff(sq * sq, r) < 1e-12);
  // Eigenvalues of the realified matrix are the complex ones, doubled.
  const auto e = eigen_symmetric(r);
  auto v = e.values;
  std::sort(v.begin(), v.end());
  CHECK(v[0] == doctest::Approx(v[1]));
  CHECK(v[2] == doctest::Approx(v[3]));
  CHECK(v[0] + v[2] == doctest::Approx(5.0));
}

TEST_CASE("kernel op_norm_sq agrees with Jacobi for every size") {
  std::mt19937_64 rng(5);
  for (int d = 1; d <= 6; ++d) {
    const Matrix a = random_matrix(d, rng);
    CHECK(std::sqrt(kernel::op_norm_sq(a.data().data(), d)) == doctest::Approx(power_iteration_norm(a)).epsilon(1e-10));
  }
}
