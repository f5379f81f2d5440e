#include <random>
#include <set>

#include "bmolab/error.hpp"
#include "bmolab/grid.hpp"
#include "doctest.h"

using namespace bmolab;

namespace {

Rectangle unit(const GridSpec& g) { return full_rectangle(g); }

std::set<std::uint32_t> cell_set(const Rectangle& r, const GridSpec& g) {
  const auto c = cells(r, g);
  return {c.begin(), c.end()};
}

}  // namespace

TEST_CASE("children partition the parent") {
  const GridSpec g{1, 1, 3};
  CHECK(children(unit(g), g, 1, 1).size() == 4);
  const auto same = children(unit(g), g, 0, 0);
  REQUIRE(same.size() == 1);
  CHECK(same[0] == unit(g));

  const GridSpec g3{2, 1, 3};
  const auto kids = children(unit(g3), g3, 1, 2);
  CHECK(kids.size() == 16);
  double total = 0.0;
  std::set<std::uint32_t> seen;
  for (const auto& k : kids) {
    total += k.measure(g3);
    for (auto c : cells(k, g3)) CHECK(seen.insert(c).second);
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(seen == cell_set(unit(g3), g3));
  CHECK_THROWS_AS(children(unit(g), g, 4, 0), ResolutionExceeded);
}

TEST_CASE("children of every dyadic rectangle partition it") {
  const GridSpec g{1, 1, 3};
  for (const auto& r : rectangle_family(g, FamilySpec{})) {
    for (int i1 = 0; i1 <= 1; ++i1)
      for (int i2 = 0; i2 <= 1; ++i2) {
        if (r.side(1) < (1 << i1) || r.side(2) < (1 << i2)) continue;
        std::multiset<std::uint32_t> all;
        for (const auto& k : children(r, g, i1, i2))
          for (auto c : cells(k, g)) all.insert(c);
        const auto parent = cells(r, g);
        CHECK(all == std::multiset<std::uint32_t>(parent.begin(), parent.end()));
      }
  }
}

TEST_CASE("shifted family sizes") {
  CHECK(shifted_family(GridSpec{1, 1, 4}).grids.size() == 9);
  CHECK(shifted_family(GridSpec{2, 1, 4}).grids.size() == 27);
  const auto fam = shifted_family(GridSpec{1, 1, 4});
  for (int s : fam.grids[0].shift_thirds) CHECK(s == 0);
  for (int s : fam.grids[0].shift_cells) CHECK(s == 0);
  // N = 16: thirds snap to 5 and 11 cells, 1/3 cell away.
  CHECK(fam.max_snap_cells == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("rectangle families") {
  const GridSpec g{1, 1, 2};
  const auto dy = rectangle_family(g, parse_family("dyadic"));
  CHECK(dy.size() == 49);
  const auto sh = rectangle_family(g, parse_family("shifted"));
  // Per axis: 7 base intervals plus the shifted ones; N = 4 snaps the thirds
  // to 1 and 3 cells. Distinct intervals per axis: full(1) + halves(2 shifts
  // x ... ) computed by direct enumeration below.
  std::set<std::pair<int, int>> axis;
  const auto fam = shifted_family(g);
  for (const auto& sg : fam.grids)
    for (const auto& r : grid_rectangles(g, sg)) axis.insert({r.axes[0].lo, r.axes[0].len});
  CHECK(sh.size() == axis.size() * axis.size());
  CHECK(sh.size() > dy.size());
  const auto sa = rectangle_family(g, parse_family("sampled(0)"));
  CHECK(sa == sh);
  const auto s5 = rectangle_family(g, parse_family("sampled(5)"));
  CHECK(s5.size() == sh.size() + 5);
  for (const auto& r : s5) CHECK_NOTHROW(check_rectangle(r, g));
  CHECK_THROWS_AS(parse_family("bogus"), ConfigError);
}

TEST_CASE("cover examples") {
  const GridSpec g{1, 1, 6};
  const auto fam = shifted_family(g);
  {
    const Box r{{0.0, 0.0}, {0.5, 0.5}, 1};
    const auto c = cover(r, fam);
    CHECK(c.grid_index == 0);
    CHECK(c.cover.len[0] == 0.5);
    CHECK(c.cover.len[1] == 0.5);
    CHECK(c.cover.lo[0] == 0.0);
  }
  {
    const Box r{{0.30, 0.10}, {0.25, 0.25}, 1};
    const auto c = cover(r, fam);
    CHECK(box_contains(c.cover, r));
    CHECK(c.cover.len[0] <= 1.5);
    CHECK(c.cover.len[1] <= 1.5);
  }
  CHECK_THROWS_AS(cover(Box{{0.0, 0.0}, {1.5, 0.1}, 1}, fam), TooLarge);
}

TEST_CASE("cover fuzz: containment and side ratio") {
  for (const GridSpec g : {GridSpec{1, 1, 6}, GridSpec{2, 1, 4}}) {
    const auto fam = shifted_family(g);
    std::mt19937_64 rng(31337);
    std::uniform_real_distribution<double> pos(0.0, 1.0);
    std::uniform_real_distribution<double> side(-4.0, 0.0);  // log10 side
    for (int t = 0; t < 10000; ++t) {
      Box r;
      r.split = g.n;
      for (int f = 1; f <= 2; ++f) {
        const double l = std::pow(10.0, side(rng)) * 0.9;
        for (int a = 0; a < g.factor_axes(f); ++a) {
          r.lo.push_back(pos(rng));
          r.len.push_back(l);
        }
      }
      const auto c = cover(r, fam);
      CHECK(box_contains(c.cover, r));
      for (int a = 0; a < g.axes(); ++a) CHECK(c.cover.len[a] <= 6.0 * r.len[a] * (1 + 1e-12));
      CHECK(c.grid_index < fam.grids.size());
    }
  }
}

TEST_CASE("rectangle JSON round trip") {
  const Rectangle r{{{1, 2}, {3, 4}}, 1};
  nlohmann::json j = r;
  CHECK(j.dump() == R"({"axes":[[1,3],[3,7]],"split":1})");
  CHECK(j.get<Rectangle>() == r);
}
