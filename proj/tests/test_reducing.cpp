#include <cmath>
#include <random>

#include "bmolab/error.hpp"
#include "bmolab/reducing.hpp"
#include "doctest.h"

using namespace bmolab;

namespace {

std::vector<std::uint32_t> all_cells(const GridSpec& g) { return cells(full_rectangle(g), g); }

WeightField rotating(const GridSpec& g, std::uint64_t seed) {
  RotatingSpec s;
  s.lambda1 = 1.0;
  s.lambda2 = 10.0;
  s.wave1 = 0.8;
  s.wave2 = 0.5;
  s.k = {2, 1, 1};
  s.seed = seed;
  return gen_rotating_weight(g, s);
}

double norm_of(const Matrix& m, std::span<const double> e) { return euclidean_norm(m * e); }

}  // namespace

TEST_CASE("rho examples") {
  const GridSpec g{1, 0, 1};
  const auto two = WeightField::weight(g, 1, {1.0, 4.0});
  const std::vector<std::uint32_t> both{0, 1};
  const std::vector<double> one{1.0};
  CHECK(rho(two, both, 2.0, one) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-14));

  const GridSpec g2{1, 1, 2};
  const auto id = generate(g2, {{"type", "identity"}, {"d", 3}});
  const std::vector<double> e{0.3, -1.2, 2.0};
  CHECK(rho(id, all_cells(g2), 3.0, e) == doctest::Approx(euclidean_norm(e)).epsilon(1e-14));
  CHECK_THROWS_AS(rho(id, std::vector<std::uint32_t>{}, 3.0, e), EmptyRegion);

  const auto w = gen_expsym_weight(g2, 3, 1.5, 3, 8);
  const std::vector<double> te{-0.9, 3.6, -6.0};
  CHECK(rho(w, all_cells(g2), 1.5, te) == doctest::Approx(3.0 * rho(w, all_cells(g2), 1.5, e)).epsilon(1e-13));
}

TEST_CASE("exact p = 2 reducing operator") {
  const GridSpec g{1, 0, 1};
  const auto two = WeightField::weight(g, 1, {1.0, 4.0});
  const std::vector<std::uint32_t> both{0, 1};
  CHECK(reducing_exact_p2(two, both).matrix(0, 0) == doctest::Approx(std::sqrt(2.5)).epsilon(1e-14));
  CHECK_THROWS_AS(Reducer(two, 3.0, ReducingMode::exact_p2), WrongExponent);

  const GridSpec g2{1, 1, 3};
  const auto w = rotating(g2, 4);
  const auto region = cells(Rectangle{{{2, 4}, {0, 2}}, 1}, g2);
  const auto op = reducing_exact_p2(w, region);
  const auto dirs = direction_net(2, 500);
  for (std::size_t k = 0; k < 500; ++k) {
    const std::span<const double> e(&dirs[2 * k], 2);
    CHECK(std::abs(norm_of(op.matrix, e) - rho(w, region, 2.0, e)) <= 1e-12 * norm_of(op.matrix, e));
  }
  const auto id = generate(g2, {{"type", "identity"}, {"d", 2}});
  CHECK(max_abs_diff(reducing_exact_p2(id, region).matrix, Matrix::identity(2)) < 1e-14);
}

TEST_CASE("john mode special cases") {
  const GridSpec g{1, 1, 3};
  const auto region = all_cells(g);
  // d = 1: <W>^{1/p}
  const auto s = gen_power_weight(g, {0.5, -0.4}, 3.0);
  for (double p : {1.5, 2.0, 3.0}) {
    double avg = 0.0;
    for (auto c : region) avg += s.cell(c)[0];
    avg /= region.size();
    CHECK(reducing_john(s, region, p).matrix(0, 0) == doctest::Approx(std::pow(avg, 1.0 / p)).epsilon(1e-13));
  }
  // Identity weight.
  for (int d : {2, 3}) {
    const auto id = generate(g, {{"type", "identity"}, {"d", d}});
    for (double p : {1.5, 3.0}) CHECK(max_abs_diff(reducing_john(id, region, p).matrix, Matrix::identity(d)) < 1e-7);
  }
  // p = 2 agrees with the exact operator.
  const auto w = rotating(g, 11);
  for (const auto& r : {full_rectangle(g), Rectangle{{{0, 4}, {4, 2}}, 1}, Rectangle{{{5, 1}, {6, 2}}, 1}}) {
    const auto rc = cells(r, g);
    const auto j = reducing_john(w, rc, 2.0);
    const auto e = reducing_exact_p2(w, rc);
    CHECK(op_norm(j.matrix - e.matrix) <= 1e-6 * op_norm(e.matrix));
  }
}

TEST_CASE("john sandwich is certified on a matrix corpus") {
  std::mt19937_64 rng(123);
  const GridSpec g{1, 1, 3};
  JohnOptions opt;
  opt.certify = true;
  int tested = 0;
  for (int d : {2, 3}) {
    const auto w = gen_expsym_weight(g, d, 3.0, 4, 1000 + d);
    for (double p : {1.5, 3.0}) {
      for (const auto& r : {full_rectangle(g), Rectangle{{{1, 2}, {5, 4}}, 1}, Rectangle{{{3, 4}, {0, 1}}, 1}}) {
        const auto op = reducing_john(w, cells(r, g), p, opt);
        CHECK(op.certified);
        CHECK(op.converged);
        CHECK(op.residual_lower <= 1.0 + 1e-6);
        CHECK(op.residual_upper <= 1.0 + 1e-6);
        ++tested;
      }
    }
  }
  CHECK(tested == 12);
}

TEST_CASE("proxy is dominated by john") {
  const GridSpec g{1, 1, 3};
  const auto w = rotating(g, 21);
  const auto dirs = direction_net(2, 400);
  for (const auto& r : {full_rectangle(g), Rectangle{{{2, 4}, {1, 4}}, 1}}) {
    const auto rc = cells(r, g);
    const auto px = reducing_proxy(w, rc, 3.0);
    const auto jn = reducing_john(w, rc, 3.0);
    CHECK(max_ratio(px.matrix, jn.matrix, dirs) <= 1.0 + 1e-6);
  }
  // d = 1: <W^{1/p}> differs from <W>^{1/p} unless constant.
  const auto s = gen_power_weight(g, {0.5, 0.0}, 3.0);
  const auto rc = all_cells(g);
  CHECK(reducing_proxy(s, rc, 3.0).matrix(0, 0) < reducing_john(s, rc, 3.0).matrix(0, 0));
}

TEST_CASE("iterated reducing operators") {
  const GridSpec g{1, 1, 3};
  const Rectangle r{{{0, 4}, {2, 4}}, 1};
  // Constant weight.
  const auto c = generate(g, {{"type", "rotating"}, {"lambda", {2.0, 5.0}}, {"theta0", 0.4}});
  for (auto mode : {ReducingMode::john, ReducingMode::proxy}) {
    const auto it = iterated_reducing(c, r, 3.0, mode);
    const auto di = reducing(c, cells(r, g), 3.0, mode);
    CHECK(max_abs_diff(it.matrix, di.matrix) < 1e-7);
  }
  // Product scalar weight: averages factor exactly.
  const auto s = gen_power_weight(g, {0.5, -0.3}, 3.0);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto it = iterated_reducing(s, r, p, ReducingMode::john);
    const auto di = reducing_john(s, cells(r, g), p);
    CHECK(it.matrix(0, 0) == doctest::Approx(di.matrix(0, 0)).epsilon(1e-12));
  }
  // Rotating weight, p = 2: comparable within sqrt(d) both ways.
  const auto w = rotating(g, 2);
  const auto it = iterated_reducing(w, r, 2.0, ReducingMode::exact_p2);
  const auto di = reducing_exact_p2(w, cells(r, g));
  const auto dirs = direction_net(2, 200);
  CHECK(max_ratio(it.matrix, di.matrix, dirs) <= std::sqrt(2.0) + 1e-9);
  CHECK(max_ratio(di.matrix, it.matrix, dirs) <= std::sqrt(2.0) + 1e-9);
}

TEST_CASE("inverse versus prime") {
  const GridSpec g{1, 1, 3};
  const auto id = generate(g, {{"type", "identity"}, {"d", 2}});
  const auto rid = compare_inverse_prime(id, all_cells(g), 3.0);
  CHECK(rid.slack_left == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(rid.c_e == doctest::Approx(1.0).epsilon(1e-12));

  const auto s = gen_power_weight(g, {0.6, -0.5}, 3.0);
  const auto rs = compare_inverse_prime(s, all_cells(g), 3.0);
  CHECK(rs.slack_left <= 1.0 + 1e-9);

  const auto w = rotating(g, 77);
  for (const auto& r : {full_rectangle(g), Rectangle{{{1, 2}, {3, 4}}, 1}}) {
    const auto rw = compare_inverse_prime(w, cells(r, g), 1.5);
    CHECK(rw.slack_left <= 1.0 + 1e-6);
    CHECK(rw.c_e >= 1.0 - 1e-9);
  }
}

TEST_CASE("trivial inclusion") {
  const GridSpec g{1, 1, 3};
  const auto w = gen_expsym_weight(g, 2, 2.0, 3, 5);
  const auto dirs = direction_net(2, 300);
  const auto F = cells(full_rectangle(g), g);
  for (double p : {1.5, 3.0}) {
    const auto wf = reducing_john(w, F, p);
    for (const auto& r : {Rectangle{{{0, 2}, {0, 2}}, 1}, Rectangle{{{4, 4}, {3, 1}}, 1}}) {
      const auto E = cells(r, g);
      const auto we = reducing_john(w, E, p);
      const double ratio = std::pow(double(F.size()) / E.size(), 1.0 / p);
      CHECK(max_ratio(we.matrix, wf.matrix, dirs) <= std::sqrt(2.0) * ratio * (1 + 1e-6));
    }
  }
}
