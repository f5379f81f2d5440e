#include <cmath>

#include "bmolab/ap.hpp"
#include "bmolab/error.hpp"
#include "doctest.h"

using namespace bmolab;

namespace {

WeightField rotating(const GridSpec& g, std::uint64_t seed, double l2 = 10.0) {
  RotatingSpec s;
  s.lambda2 = l2;
  s.wave1 = 0.8;
  s.wave2 = 0.5;
  s.k = {2, 1};
  s.seed = seed;
  return gen_rotating_weight(g, s);
}

// Scalar characteristic by the textbook formula <w> <w^{-p'/p}>^{p/p'}.
double scalar_ap(const std::vector<double>& w, double p) {
  const double pp = dual_exponent(p);
  double a = 0.0, b = 0.0;
  for (double v : w) {
    a += v;
    b += std::pow(v, -pp / p);
  }
  a /= w.size();
  b /= w.size();
  return a * std::pow(b, p / pp);
}

std::vector<double> values(const WeightField& w, std::span<const std::uint32_t> region, int entry = 0) {
  std::vector<double> out;
  for (auto c : region) out.push_back(w.cell(c)[entry]);
  return out;
}

}  // namespace

TEST_CASE("ap_local examples") {
  const GridSpec g{1, 0, 1};
  const auto two = WeightField::weight(g, 1, {1.0, 4.0});
  const std::vector<std::uint32_t> both{0, 1};
  CHECK(ap_local(two, both, 2.0) == doctest::Approx(1.5625).epsilon(1e-14));
  CHECK(ap_local(two, std::vector<std::uint32_t>{1}, 2.0) == doctest::Approx(1.0).epsilon(1e-15));

  const GridSpec g2{1, 1, 3};
  const auto id = generate(g2, {{"type", "identity"}, {"d", 2}});
  CHECK(ap_local(id, full_rectangle(g2), 3.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ap_dyadic(id, 1.5).value == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ap_continuous(id, parse_family("shifted"), 3.0).value == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(ap_local(id, full_rectangle(g2), 1.0), WrongExponent);
  const auto sym = gen_symbol(g2, 2, SymbolShape::trig, 1.0, 3);
  CHECK_THROWS_AS(ap_local(sym, full_rectangle(g2), 2.0), ShapeMismatch);
}

TEST_CASE("scalar ap_local matches the closed form on a corpus") {
  const GridSpec g{1, 1, 3};
  for (double p : {1.5, 2.0, 3.0}) {
    const auto w = gen_power_weight(g, {0.4, -0.3}, p);
    for (const auto& r : rectangle_family(g, parse_family("sampled(10)"))) {
      const auto rc = cells(r, g);
      const double v = ap_local(w, rc, p);
      CHECK(v == doctest::Approx(scalar_ap(values(w, rc), p)).epsilon(1e-12));
      CHECK(v >= 1.0 - 1e-9);
    }
  }
}

TEST_CASE("Jensen lower bound on matrix weights") {
  const GridSpec g{1, 1, 3};
  const auto w = rotating(g, 7);
  const auto e = gen_expsym_weight(g, 3, 2.0, 4, 9);
  for (double p : {1.5, 2.0, 3.0})
    for (const auto& r : rectangle_family(g, parse_family("sampled(20)"))) {
      CHECK(ap_local(w, r, p) >= 1.0 - 1e-9);
      CHECK(ap_local(e, r, p) >= 1.0 - 1e-9);
    }
}

TEST_CASE("ap_dyadic: argmax, resolution sweep, block-diagonal oracle") {
  double prev = 0.0;
  for (int level : {4, 5, 6}) {
    const GridSpec g{1, 1, level};
    const auto w = gen_power_weight(g, {0.5, 0.5}, 2.0);
    const auto rep = ap_dyadic(w, 2.0, true);
    CHECK(std::isfinite(rep.value));
    CHECK(rep.value >= prev - 1e-12);
    prev = rep.value;
    CHECK(rep.table.size() == rep.rectangles);
    CHECK(ap_local(w, rep.argmax, 2.0) == doctest::Approx(rep.value).epsilon(1e-15));
  }

  const GridSpec g{1, 1, 3};
  const auto w1 = gen_power_weight(g, {0.6, -0.2}, 3.0);
  const auto w2 = gen_power_weight(g, {-0.4, 0.7}, 3.0);
  std::vector<double> data;
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    data.insert(data.end(), {w1.cell(c)[0], 0.0, 0.0, w2.cell(c)[0]});
  }
  const auto block = WeightField::weight(g, 2, data);
  for (double p : {1.5, 2.0, 3.0}) {
    const double a = ap_dyadic(w1, p).value, b = ap_dyadic(w2, p).value;
    const double v = ap_dyadic(block, p).value;
    CHECK(v >= std::max(a, b) * (1.0 - 1e-12));
    CHECK(v <= std::pow(2.0, p / dual_exponent(p) + 1.0) * std::max(a, b));
  }
  // The d = 1 embedding is exact.
  CHECK(ap_dyadic(w1, 3.0).value == doctest::Approx(ap_dyadic(WeightField::weight(g, 1, {w1.data().begin(), w1.data().end()}), 3.0).value).epsilon(1e-15));
}

TEST_CASE("ap_continuous dominates ap_dyadic within the covering bound") {
  for (double p : {1.5, 2.0, 3.0}) {
    const GridSpec g{1, 1, 4};
    const auto w = gen_power_weight(g, {0.5, -0.4}, p);
    const auto dy = ap_dyadic(w, p);
    const auto co = ap_continuous(w, parse_family("shifted"), p);
    CHECK(co.value >= dy.value);
    CHECK(co.value / dy.value <= std::pow(6.0, 2 * p));
    const auto sa = ap_continuous(w, parse_family("sampled(30)"), p);
    CHECK(sa.value >= co.value);
  }
}

TEST_CASE("dual characteristic") {
  const GridSpec g{1, 1, 3};
  const auto id = generate(g, {{"type", "identity"}, {"d", 2}});
  CHECK(ap_dual_check(id, 3.0).r == doctest::Approx(1.0).epsilon(1e-15));
  for (double p : {1.5, 3.0}) {
    const auto w = gen_power_weight(g, {0.5, -0.3}, p);
    const auto c = ap_dual_check(w, p);
    CHECK(c.r == doctest::Approx(1.0).epsilon(1e-9));
    // [W']_{A_p'} = [W]_{A_p}^{p'/p} exactly for d = 1.
    CHECK(c.dual.value == doctest::Approx(std::pow(c.primal.value, dual_exponent(p) / p)).epsilon(1e-9));
  }
  // At p = 2 the double average is symmetric in x and y, so r = 1 in any d.
  const auto w = rotating(g, 11);
  CHECK(ap_dual_check(w, 2.0).r == doctest::Approx(1.0).epsilon(1e-12));
  const auto c3 = ap_dual_check(w, 3.0);
  CHECK(std::isfinite(c3.r));
  CHECK(c3.r > 0.0);
}

TEST_CASE("slice characteristics") {
  const GridSpec g{1, 1, 4};
  const auto id = generate(g, {{"type", "identity"}, {"d", 2}});
  const auto s0 = ap_slices(id, 2.0);
  CHECK(s0.over_first == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s0.over_second == doctest::Approx(1.0).epsilon(1e-15));

  // Product weight: every slice is a multiple of the factor weight.
  const double p = 3.0;
  const auto prod = gen_power_weight(g, {0.5, -0.4}, p);
  const auto f1 = gen_power_weight(GridSpec{1, 0, 4}, {0.5}, p);
  const auto f2 = gen_power_weight(GridSpec{1, 0, 4}, {-0.4}, p);
  const auto s = ap_slices(prod, p);
  CHECK(s.over_first == doctest::Approx(ap_dyadic(f1, p).value).epsilon(1e-12));
  CHECK(s.over_second == doctest::Approx(ap_dyadic(f2, p).value).epsilon(1e-12));

  // Agrees with explicit slice fields, and never exceeds the biparameter
  // characteristic (slices are finest-level rectangles on the grid).
  const auto w = rotating(g, 5);
  const auto sw = ap_slices(w, p);
  double m1 = 0.0, m2 = 0.0;
  for (int c = 0; c < g.cells_per_axis(); ++c) {
    m1 = std::max(m1, ap_dyadic(slice(w, 2, c), p).value);
    m2 = std::max(m2, ap_dyadic(slice(w, 1, c), p).value);
  }
  CHECK(sw.over_first == doctest::Approx(m1).epsilon(1e-13));
  CHECK(sw.over_second == doctest::Approx(m2).epsilon(1e-13));
  CHECK(sw.kappa <= 1.0 + 1e-12);
  CHECK(ap_dyadic(slice(w, 2, sw.argmax_first), p).value == doctest::Approx(sw.over_first).epsilon(1e-13));

  CHECK_THROWS_AS(ap_slices(f1, p), ShapeMismatch);
}

TEST_CASE("reducing form of the characteristic") {
  const GridSpec g{1, 1, 3};
  const auto id = generate(g, {{"type", "identity"}, {"d", 2}});
  CHECK(ap_reducing_form(id, {}, 3.0, ReducingMode::john).value == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(ap_reducing_form(id, {}, 2.0, ReducingMode::exact_p2).value == doctest::Approx(1.0).epsilon(1e-14));

  // d = 1: |W'_R W_R|^p = <w> <w'>^{p/p'} is the local characteristic itself.
  for (double p : {1.5, 3.0}) {
    const auto w = gen_power_weight(g, {0.5, -0.3}, p);
    const auto r = ap_reducing_form(w, {}, p, ReducingMode::john);
    CHECK(r.ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.max_local_ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.min_local_ratio == doctest::Approx(1.0).epsilon(1e-12));
  }

  const auto w = rotating(g, 3);
  for (double p : {1.5, 2.0, 3.0}) {
    const auto r = ap_reducing_form(w, parse_family("shifted"), p, ReducingMode::john);
    CHECK(std::isfinite(r.ratio));
    CHECK(r.min_local_ratio > 0.0);
    CHECK(r.min_local_ratio <= r.max_local_ratio);
  }
}
