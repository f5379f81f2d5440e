#include <cmath>

#include "bmolab/ap.hpp"
#include "bmolab/bmo.hpp"
#include "bmolab/error.hpp"
#include "doctest.h"

using namespace bmolab;

namespace {

WeightField identity(const GridSpec& g, int d) { return generate(g, {{"type", "identity"}, {"d", d}}); }

WeightField rotating(const GridSpec& g, std::uint64_t seed) {
  RotatingSpec s;
  s.lambda2 = 6.0;
  s.wave1 = 0.6;
  s.wave2 = 0.4;
  s.k = {1, 1};
  s.seed = seed;
  return gen_rotating_weight(g, s);
}

// Unweighted scalar oscillations over a family, computed directly.
struct Oscillation {
  double lp = 0.0;      // sup (avg |b - <b>|^p)^{1/p}
  double l1 = 0.0;      // sup avg |b - <b>|
  double pair = 0.0;    // sup (avg_x (avg_y |b(x) - b(y)|^{p'})^{p/p'})^{1/p}
};

Oscillation oscillation(const WeightField& b, const std::vector<Rectangle>& fam, double p) {
  const double pp = dual_exponent(p);
  Oscillation o;
  for (const auto& r : fam) {
    const auto rc = cells(r, b.grid());
    double mean = 0.0;
    for (auto c : rc) mean += b.cell(c)[0];
    mean /= rc.size();
    double lp = 0.0, l1 = 0.0, outer = 0.0;
    for (auto x : rc) {
      const double dev = std::abs(b.cell(x)[0] - mean);
      lp += std::pow(dev, p);
      l1 += dev;
      double inner = 0.0;
      for (auto y : rc) inner += std::pow(std::abs(b.cell(x)[0] - b.cell(y)[0]), pp);
      outer += std::pow(inner / rc.size(), p / pp);
    }
    o.lp = std::max(o.lp, std::pow(lp / rc.size(), 1.0 / p));
    o.l1 = std::max(o.l1, l1 / rc.size());
    o.pair = std::max(o.pair, std::pow(outer / rc.size(), 1.0 / p));
  }
  return o;
}

}  // namespace

TEST_CASE("constant symbols have zero norms") {
  const GridSpec g{1, 1, 3};
  const auto u = rotating(g, 1), v = rotating(g, 2);
  const auto b = gen_symbol(g, 2, SymbolShape::constant, 1.3, 4);
  const FamilySpec fam;
  CHECK(bmo_norm(b, u, v, 3.0, fam, ReducingMode::john).value == 0.0);
  CHECK(bmo_tilde_norm(b, u, v, 3.0, fam, ReducingMode::john).value == 0.0);
  CHECK(bmo1_norm(b, u, v, 1.5, fam).value < 1e-12);
  CHECK(bmo2_norm(b, u, v, 1.5, fam).value < 1e-12);
  const auto s = slice_sup_norms(b, u, v, 2.0, ReducingMode::exact_p2);
  CHECK(s.first == 0.0);
  CHECK(s.second == 0.0);
  const auto rep = equivalence_report(b, u, v, 2.0, fam, ReducingMode::exact_p2);
  CHECK(rep.bmo.value == 0.0);
  CHECK(rep.dual_tilde.value == 0.0);
  CHECK(rep.ratios.size() == 21);
  for (const auto& r : rep.ratios) CHECK(r.degenerate);
  CHECK(rep.max_ratio == 0.0);
}

TEST_CASE("checkerboard arithmetic") {
  const GridSpec g{1, 1, 1};
  const auto b = gen_symbol(g, 1, SymbolShape::checkerboard, 1.0, 0);
  const auto one = identity(g, 1);
  const FamilySpec fam;
  const auto n = bmo_norm(b, one, one, 2.0, fam, ReducingMode::john);
  CHECK(n.value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(bmo_tilde_norm(b, one, one, 2.0, fam, ReducingMode::john).value == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(bmo1_norm(b, one, one, 2.0, fam).value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK(bmo2_norm(b, one, one, 2.0, fam).value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

  // Full square alone.
  const BmoLocal loc(b, one, one, 2.0, ReducingMode::exact_p2);
  const auto all = cells(full_rectangle(g), g);
  CHECK(loc.bmo(all) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(loc.tilde(all) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(loc.pointwise(all).first == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("unweighted scalar norms equal direct oscillations") {
  const GridSpec g{1, 1, 3};
  const auto b = gen_symbol(g, 1, SymbolShape::trig, 2.0, 17);
  const auto one = identity(g, 1);
  for (double p : {1.5, 2.0, 3.0})
    for (const char* f : {"dyadic", "shifted"}) {
      const auto fam = parse_family(f);
      const auto o = oscillation(b, rectangle_family(g, fam), p);
      CHECK(bmo_norm(b, one, one, p, fam, ReducingMode::john).value == doctest::Approx(o.lp).epsilon(1e-12));
      CHECK(bmo_tilde_norm(b, one, one, p, fam, ReducingMode::john).value == doctest::Approx(o.l1).epsilon(1e-12));
      CHECK(bmo1_norm(b, one, one, p, fam).value == doctest::Approx(o.pair).epsilon(1e-12));
    }
}

TEST_CASE("duality identity for the pointwise variants") {
  const GridSpec g{1, 1, 3};
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto u = rotating(g, 10 + seed);
    const auto v = gen_expsym_weight(g, 2, 1.0, 3, 20 + seed);
    const auto b = gen_symbol(g, 2, seed % 2 ? SymbolShape::trig : SymbolShape::separable, 1.0, 30 + seed);
    for (double p : {1.5, 3.0}) {
      const double pp = dual_exponent(p);
      for (const char* f : {"dyadic", "sampled(8)"}) {
        const auto fam = parse_family(f);
        const double lhs = bmo2_norm(b, u, v, p, fam).value;
        const double rhs = bmo1_norm(transpose(b), dual_weight(v, p), dual_weight(u, p), pp, fam).value;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("homogeneity and family monotonicity") {
  const GridSpec g{1, 1, 3};
  const auto u = rotating(g, 3);
  const auto v = gen_expsym_weight(g, 2, 1.0, 3, 5);
  const auto b = gen_symbol(g, 2, SymbolShape::trig, 1.0, 8);
  const auto tb = scale(b, -2.5);
  const FamilySpec dy;
  const auto sh = parse_family("shifted");
  for (double p : {1.5, 3.0}) {
    CHECK(bmo_norm(tb, u, v, p, dy, ReducingMode::john).value ==
          doctest::Approx(2.5 * bmo_norm(b, u, v, p, dy, ReducingMode::john).value).epsilon(1e-12));
    CHECK(bmo_tilde_norm(tb, u, v, p, dy, ReducingMode::john).value ==
          doctest::Approx(2.5 * bmo_tilde_norm(b, u, v, p, dy, ReducingMode::john).value).epsilon(1e-12));
    CHECK(bmo1_norm(tb, u, v, p, dy).value == doctest::Approx(2.5 * bmo1_norm(b, u, v, p, dy).value).epsilon(1e-12));
    CHECK(bmo2_norm(tb, u, v, p, dy).value == doctest::Approx(2.5 * bmo2_norm(b, u, v, p, dy).value).epsilon(1e-12));
    CHECK(bmo_norm(b, u, v, p, sh, ReducingMode::john).value >= bmo_norm(b, u, v, p, dy, ReducingMode::john).value);
    CHECK(bmo1_norm(b, u, v, p, sh).value >= bmo1_norm(b, u, v, p, dy).value);
  }
  CHECK_THROWS_AS(bmo_norm(b, u, v, 3.0, dy, ReducingMode::exact_p2), ModeError);
  CHECK_THROWS_AS(bmo_norm(u, u, v, 3.0, dy, ReducingMode::john), ShapeMismatch);
}

TEST_CASE("one-parameter norms") {
  const GridSpec g1{1, 0, 3};
  const auto one = identity(g1, 1);
  const auto c = gen_symbol(g1, 1, SymbolShape::constant, 2.0, 1);
  CHECK(one_param_bmo_norm(c, one, one, 2.0, {}, ReducingMode::john).value == 0.0);
  const auto b = gen_symbol(g1, 1, SymbolShape::trig, 1.0, 2);
  const auto o = oscillation(b, rectangle_family(g1, {}), 3.0);
  CHECK(one_param_bmo_norm(b, one, one, 3.0, {}, ReducingMode::john).value == doctest::Approx(o.lp).epsilon(1e-12));

  // A row of the checkerboard over the full interval.
  const GridSpec g{1, 1, 2};
  const auto cb = gen_symbol(g, 1, SymbolShape::checkerboard, 1.0, 0);
  const auto row = slice(cb, 2, 1);
  const auto ones = identity(row.grid(), 1);
  const BmoLocal loc(row, ones, ones, 2.0, ReducingMode::john);
  CHECK(loc.bmo(cells(full_rectangle(row.grid()), row.grid())) == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(one_param_bmo_norm(cb, identity(g, 1), identity(g, 1), 2.0, {}, ReducingMode::john), ShapeMismatch);
}

TEST_CASE("slice sup norms") {
  const GridSpec g{1, 1, 3};
  const auto one = identity(g, 2);
  const auto b = gen_symbol(g, 2, SymbolShape::one_variable, 1.0, 6);
  const auto s = slice_sup_norms(b, one, one, 3.0, ReducingMode::john);
  CHECK(s.second == 0.0);
  const auto b1 = slice(b, 2, 0);
  const auto ones = identity(b1.grid(), 2);
  CHECK(s.first == doctest::Approx(one_param_bmo_norm(b1, ones, ones, 3.0, {}, ReducingMode::john).value).epsilon(1e-12));

  // Against explicit slice fields with matrix weights.
  const auto u = rotating(g, 4);
  const auto v = gen_expsym_weight(g, 2, 1.0, 3, 7);
  const auto bt = gen_symbol(g, 2, SymbolShape::trig, 1.0, 9);
  const double p = 1.5;
  const auto sw = slice_sup_norms(bt, u, v, p, ReducingMode::john);
  double m1 = 0.0, m2 = 0.0;
  for (int c = 0; c < g.cells_per_axis(); ++c) {
    m1 = std::max(m1, one_param_bmo_norm(slice(bt, 2, c), slice(u, 2, c), slice(v, 2, c), p, {}, ReducingMode::john).value);
    m2 = std::max(m2, one_param_bmo_norm(slice(bt, 1, c), slice(u, 1, c), slice(v, 1, c), p, {}, ReducingMode::john).value);
  }
  CHECK(sw.first == doctest::Approx(m1).epsilon(1e-10));
  CHECK(sw.second == doctest::Approx(m2).epsilon(1e-10));
}

TEST_CASE("equivalence report on a matrix corpus") {
  const GridSpec g{1, 1, 3};
  for (double p : {1.5, 2.0, 3.0}) {
    const auto u = rotating(g, 40);
    const auto v = gen_expsym_weight(g, 2, 1.0, 3, 41);
    const auto b = gen_symbol(g, 2, SymbolShape::trig, 1.0, 42);
    const auto rep = equivalence_report(b, u, v, p, {}, ReducingMode::john);
    CHECK(rep.ratios.size() == 21);
    CHECK(rep.max_ratio >= 1.0);
    CHECK(std::isfinite(rep.max_ratio));
    CHECK(rep.holder_violations == 0);
    CHECK(rep.dominance_constant > 0.0);
    CHECK(rep.nonconverged == 0);
    for (const auto& r : rep.ratios) {
      CHECK_FALSE(r.degenerate);
      CHECK(r.ratio >= 1.0);
      CHECK_FALSE(r.witness_a.empty());
    }
    // The report's variants agree with the standalone norms.
    CHECK(rep.bmo.value == doctest::Approx(bmo_norm(b, u, v, p, {}, ReducingMode::john).value).epsilon(1e-12));
    CHECK(rep.second.value == doctest::Approx(bmo2_norm(b, u, v, p, {}).value).epsilon(1e-12));
    CHECK(rep.dual_bmo.value == doctest::Approx(bmo_norm(transpose(b), dual_weight(v, p), dual_weight(u, p),
                                                         dual_exponent(p), {}, ReducingMode::john)
                                                    .value)
                                    .epsilon(1e-12));
  }
}

TEST_CASE("weight tables are reusable across symbols") {
  const GridSpec g{1, 1, 3};
  const auto u = rotating(g, 50);
  const auto v = gen_expsym_weight(g, 2, 1.0, 3, 51);
  const BmoWeights w(u, v, 3.0, parse_family("shifted"), ReducingMode::john);
  for (std::uint64_t seed : {52, 53}) {
    const auto b = gen_symbol(g, 2, SymbolShape::trig, 1.0, seed);
    const auto a = equivalence_report(b, w);
    const auto c = equivalence_report(b, u, v, 3.0, parse_family("shifted"), ReducingMode::john);
    CHECK(a.max_ratio == c.max_ratio);
    CHECK(a.dual_tilde.value == c.dual_tilde.value);
    CHECK(a.rectangles == c.rectangles);
  }
  CHECK_THROWS_AS(equivalence_report(gen_symbol(GridSpec{1, 1, 2}, 2, SymbolShape::trig, 1.0, 1), w), ShapeMismatch);
}
