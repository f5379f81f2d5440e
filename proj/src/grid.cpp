#include "bmolab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "bmolab/error.hpp"

namespace bmolab {

std::size_t GridSpec::cell_count() const {
  std::size_t c = 1;
  for (int a = 0; a < axes(); ++a) c *= static_cast<std::size_t>(cells_per_axis());
  return c;
}

void GridSpec::validate() const {
  if (n < 1 || m < 0) throw ConfigError("grid.dims", "need n >= 1 and m >= 0");
  if (n + m > 3) throw ConfigError("grid.dims", "at most three axes are supported");
  if (level < 0 || level > 12) throw ConfigError("grid.L", "level must lie in [0, 12]");
  if (cell_count() > (std::size_t{1} << 24)) throw ConfigError("grid.L", "grid too large");
}

GridSpec GridSpec::desk(int n, int m) {
  GridSpec g{n, m, (n + m == 3) ? 4 : 6};
  g.validate();
  return g;
}

void to_json(nlohmann::json& j, const GridSpec& g) {
  j = nlohmann::json{{"dims", {g.n, g.m}}, {"L", g.level}};
}

void from_json(const nlohmann::json& j, GridSpec& g) {
  const auto& dims = j.at("dims");
  g.n = dims.at(0).get<int>();
  g.m = dims.at(1).get<int>();
  g.level = j.at("L").get<int>();
  g.validate();
}

std::size_t Rectangle::cell_volume() const {
  std::size_t v = 1;
  for (const auto& a : axes) v *= static_cast<std::size_t>(a.len);
  return v;
}

double Rectangle::measure(const GridSpec& g) const {
  return static_cast<double>(cell_volume()) / static_cast<double>(g.cell_count());
}

int Rectangle::side(int factor) const {
  const int begin = factor == 1 ? 0 : split;
  const int end = factor == 1 ? split : static_cast<int>(axes.size());
  return begin < end ? axes[begin].len : 0;
}

void to_json(nlohmann::json& j, const Rectangle& r) {
  auto axes = nlohmann::json::array();
  for (const auto& a : r.axes) axes.push_back({a.lo, a.lo + a.len});
  j = nlohmann::json{{"axes", axes}, {"split", r.split}};
}

void from_json(const nlohmann::json& j, Rectangle& r) {
  r.axes.clear();
  for (const auto& a : j.at("axes")) {
    const int lo = a.at(0).get<int>();
    const int hi = a.at(1).get<int>();
    if (hi <= lo) throw IndexOutOfRange("rectangle side must have b > a");
    r.axes.push_back({lo, hi - lo});
  }
  r.split = j.at("split").get<int>();
}

std::string describe(const Rectangle& r) {
  std::ostringstream os;
  for (std::size_t a = 0; a < r.axes.size(); ++a) {
    if (a) os << (static_cast<int>(a) == r.split ? " | " : " x ");
    os << "[" << r.axes[a].lo << "," << r.axes[a].lo + r.axes[a].len << ")";
  }
  return os.str();
}

Rectangle canonical(Rectangle r, const GridSpec& g) {
  const int N = g.cells_per_axis();
  for (auto& a : r.axes) {
    a.lo = ((a.lo % N) + N) % N;
    if (a.len == N) a.lo = 0;
  }
  return r;
}

void check_rectangle(const Rectangle& r, const GridSpec& g) {
  if (static_cast<int>(r.axes.size()) != g.axes() || r.split != g.n)
    throw IndexOutOfRange("rectangle " + describe(r) + " does not match grid axes");
  const int N = g.cells_per_axis();
  for (const auto& a : r.axes)
    if (a.len < 1 || a.len > N) throw IndexOutOfRange("rectangle side out of range: " + describe(r));
  for (int f = 1; f <= 2; ++f) {
    const int begin = g.factor_offset(f);
    for (int a = begin; a < begin + g.factor_axes(f); ++a)
      if (r.axes[a].len != r.axes[begin].len)
        throw IndexOutOfRange("factor " + std::to_string(f) + " is not a cube: " + describe(r));
  }
}

std::size_t cell_index(const GridSpec& g, const std::vector<int>& multi) {
  const int N = g.cells_per_axis();
  std::size_t idx = 0;
  for (int a = 0; a < g.axes(); ++a) {
    const int c = ((multi[a] % N) + N) % N;
    idx = idx * static_cast<std::size_t>(N) + static_cast<std::size_t>(c);
  }
  return idx;
}

std::vector<int> cell_multi_index(const GridSpec& g, std::size_t index) {
  const int N = g.cells_per_axis();
  std::vector<int> multi(g.axes());
  for (int a = g.axes() - 1; a >= 0; --a) {
    multi[a] = static_cast<int>(index % static_cast<std::size_t>(N));
    index /= static_cast<std::size_t>(N);
  }
  return multi;
}

std::vector<std::uint32_t> cells(const Rectangle& r, const GridSpec& g) {
  const int N = g.cells_per_axis();
  const int A = static_cast<int>(r.axes.size());
  std::vector<std::uint32_t> out;
  out.reserve(r.cell_volume());
  std::vector<int> off(A, 0);
  while (true) {
    std::size_t idx = 0;
    for (int a = 0; a < A; ++a)
      idx = idx * static_cast<std::size_t>(N) + static_cast<std::size_t>((r.axes[a].lo + off[a]) % N);
    out.push_back(static_cast<std::uint32_t>(idx));
    int a = A - 1;
    while (a >= 0 && ++off[a] == r.axes[a].len) off[a--] = 0;
    if (a < 0) break;
  }
  return out;
}

Rectangle full_rectangle(const GridSpec& g) {
  Rectangle r;
  r.split = g.n;
  r.axes.assign(g.axes(), CellInterval{0, g.cells_per_axis()});
  return r;
}

std::vector<Rectangle> children(const Rectangle& r, const GridSpec& g, int i1, int i2) {
  if (i1 < 0 || i2 < 0) throw ResolutionExceeded("negative descent depth");
  const int A = static_cast<int>(r.axes.size());
  std::vector<int> parts(A);
  for (int a = 0; a < A; ++a) {
    const int depth = a < r.split ? i1 : i2;
    if (depth >= 31 || r.axes[a].len % (1 << depth) != 0)
      throw ResolutionExceeded("cannot split side " + std::to_string(r.axes[a].len) + " into 2^" +
                               std::to_string(depth) + " cells");
    parts[a] = 1 << depth;
  }
  std::vector<Rectangle> out;
  std::vector<int> k(A, 0);
  while (true) {
    Rectangle c = r;
    for (int a = 0; a < A; ++a) {
      const int len = r.axes[a].len / parts[a];
      c.axes[a] = {r.axes[a].lo + k[a] * len, len};
    }
    out.push_back(canonical(std::move(c), g));
    int a = A - 1;
    while (a >= 0 && ++k[a] == parts[a]) k[a--] = 0;
    if (a < 0) break;
  }
  return out;
}

ShiftedGridFamily shifted_family(const GridSpec& g) {
  ShiftedGridFamily fam;
  fam.grid = g;
  const int A = g.axes();
  const int N = g.cells_per_axis();
  std::size_t total = 1;
  for (int a = 0; a < A; ++a) total *= 3;
  for (std::size_t code = 0; code < total; ++code) {
    ShiftedGrid sg;
    std::size_t c = code;
    std::vector<int> thirds(A);
    for (int a = A - 1; a >= 0; --a) {
      thirds[a] = static_cast<int>(c % 3);
      c /= 3;
    }
    sg.shift_thirds = thirds;
    for (int a = 0; a < A; ++a) {
      const double exact = N * thirds[a] / 3.0;
      const int snapped = static_cast<int>(std::lround(exact)) % N;
      sg.shift_cells.push_back(snapped);
      fam.max_snap_cells = std::max(fam.max_snap_cells, std::abs(std::lround(exact) - exact));
    }
    fam.grids.push_back(std::move(sg));
  }
  return fam;
}

namespace {

// Enumerates the cube placements of one factor at one level:
// calls emit(positions) for every row-major position multi-index.
template <typename F>
void for_each_position(int axes, int count, F&& emit) {
  std::vector<int> pos(axes, 0);
  if (axes == 0) {
    emit(pos);
    return;
  }
  while (true) {
    emit(pos);
    int a = axes - 1;
    while (a >= 0 && ++pos[a] == count) pos[a--] = 0;
    if (a < 0) break;
  }
}

}  // namespace

std::vector<Rectangle> grid_rectangles(const GridSpec& g, const ShiftedGrid& sg) {
  const int N = g.cells_per_axis();
  const int L = g.level;
  std::vector<Rectangle> out;
  const int max1 = L;
  const int max2 = g.m > 0 ? L : 0;
  for (int k1 = 0; k1 <= max1; ++k1)
    for (int k2 = 0; k2 <= max2; ++k2) {
      const int side1 = N >> k1;
      const int side2 = N >> k2;
      for_each_position(g.n, 1 << k1, [&](const std::vector<int>& p1) {
        for_each_position(g.m, 1 << k2, [&](const std::vector<int>& p2) {
          Rectangle r;
          r.split = g.n;
          for (int a = 0; a < g.n; ++a) r.axes.push_back({p1[a] * side1 + sg.shift_cells[a], side1});
          for (int a = 0; a < g.m; ++a) r.axes.push_back({p2[a] * side2 + sg.shift_cells[g.n + a], side2});
          out.push_back(canonical(std::move(r), g));
        });
      });
    }
  return out;
}

Box to_box(const Rectangle& r, const GridSpec& g) {
  const double h = 1.0 / g.cells_per_axis();
  Box b;
  b.split = r.split;
  for (const auto& a : r.axes) {
    b.lo.push_back(a.lo * h);
    b.len.push_back(a.len * h);
  }
  return b;
}

bool box_contains(const Box& outer, const Box& inner, double tol) {
  for (std::size_t a = 0; a < inner.lo.size(); ++a) {
    if (outer.len[a] >= 1.0 - tol) continue;
    double start = inner.lo[a] - outer.lo[a];
    start -= std::floor(start);
    if (start > 1.0 - tol) start -= 1.0;  // inner starts just below outer
    if (start < -tol || start + inner.len[a] > outer.len[a] + tol) return false;
  }
  return true;
}

namespace {

// Finds a cell of the level-k grid shifted by t/3 containing [lo, lo+len).
bool contain_axis(double lo, double len, int k, int t, double& cell_lo) {
  const double h = std::ldexp(1.0, -k);
  if (k == 0) {  // the level-0 cell is the whole torus
    cell_lo = 0.0;
    return true;
  }
  double rel = lo - t / 3.0;
  rel -= std::floor(rel);
  double j = std::floor(rel / h);
  // rel may sit a rounding error below a boundary
  if (rel - j * h > h - 1e-13) j += 1.0;
  const double start = rel - j * h;
  if (start + len > h + 1e-12) return false;
  cell_lo = t / 3.0 + j * h;
  cell_lo -= std::floor(cell_lo);
  return true;
}

}  // namespace

CoverResult cover(const Box& r, const ShiftedGridFamily& fam) {
  const GridSpec& g = fam.grid;
  const int A = g.axes();
  if (static_cast<int>(r.lo.size()) != A || static_cast<int>(r.len.size()) != A)
    throw IndexOutOfRange("box does not match the grid axes");
  for (int a = 0; a < A; ++a) {
    if (!(r.len[a] > 0.0)) throw IndexOutOfRange("box sides must be positive");
    if (r.len[a] > 1.0 + 1e-15) throw TooLarge("box side exceeds the torus period");
  }

  CoverResult res;
  res.cover.split = r.split;
  res.cover.lo.resize(A);
  res.cover.len.resize(A);
  std::vector<int> thirds(A, 0);
  for (int f = 1; f <= 2; ++f) {
    const int begin = g.factor_offset(f);
    const int count = g.factor_axes(f);
    if (count == 0) continue;
    double ell = 0.0;
    for (int a = begin; a < begin + count; ++a) ell = std::max(ell, r.len[a]);
    // Smallest level first. Level k with 3 ell <= 2^-k < 6 ell always
    // succeeds (the three shifted boundary sets are 2^-k / 3 apart), and
    // level 0 is the whole torus.
    const int finest = std::max(0, static_cast<int>(std::floor(std::log2(1.0 / ell) + 1e-12)));
    bool done = false;
    for (int k = finest; k >= 0 && !done; --k) {
      std::vector<int> t_axis(count);
      std::vector<double> lo_axis(count);
      bool all = true;
      for (int i = 0; i < count && all; ++i) {
        bool found = false;
        for (int t = 0; t < 3 && !found; ++t)
          if (contain_axis(r.lo[begin + i], r.len[begin + i], k, t, lo_axis[i])) {
            t_axis[i] = t;
            found = true;
          }
        all = found;
      }
      if (!all) continue;
      for (int i = 0; i < count; ++i) {
        thirds[begin + i] = t_axis[i];
        res.cover.lo[begin + i] = lo_axis[i];
        res.cover.len[begin + i] = std::ldexp(1.0, -k);
      }
      res.level.push_back(k);
      done = true;
    }
    if (!done) throw TooLarge("no shifted dyadic cube covers factor " + std::to_string(f));
  }
  std::size_t index = 0;
  for (int a = 0; a < A; ++a) index = index * 3 + static_cast<std::size_t>(thirds[a]);
  res.grid_index = index;
  return res;
}

std::string FamilySpec::describe() const {
  switch (mode) {
    case FamilyMode::dyadic:
      return grid_index < 0 ? "dyadic" : "dyadic@" + std::to_string(grid_index);
    case FamilyMode::shifted:
      return "shifted";
    case FamilyMode::sampled:
      return "sampled(" + std::to_string(samples) + ")";
  }
  return "?";
}

FamilySpec parse_family(const std::string& text) {
  FamilySpec s;
  if (text == "dyadic") return s;
  if (text.rfind("dyadic@", 0) == 0) {
    s.grid_index = std::stoi(text.substr(7));
    return s;
  }
  if (text == "shifted") {
    s.mode = FamilyMode::shifted;
    return s;
  }
  if (text.rfind("sampled", 0) == 0) {
    s.mode = FamilyMode::sampled;
    const auto open = text.find('(');
    const auto close = text.find(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
      throw ConfigError("family", "expected sampled(k)");
    s.samples = std::stoi(text.substr(open + 1, close - open - 1));
    if (s.samples < 0) throw ConfigError("family", "sample count must be >= 0");
    return s;
  }
  throw ConfigError("family", "unknown rectangle family '" + text + "'");
}

namespace {

std::string rect_key(const Rectangle& r) {
  std::string k;
  for (const auto& a : r.axes) {
    k += std::to_string(a.lo);
    k += ':';
    k += std::to_string(a.len);
    k += ';';
  }
  return k;
}

}  // namespace

std::vector<Rectangle> rectangle_family(const GridSpec& g, const FamilySpec& spec) {
  g.validate();
  const auto fam = shifted_family(g);
  if (spec.mode == FamilyMode::dyadic) {
    const int idx = spec.grid_index < 0 ? 0 : spec.grid_index;
    if (idx >= static_cast<int>(fam.grids.size())) throw ConfigError("family", "grid index out of range");
    return grid_rectangles(g, fam.grids[idx]);
  }
  std::vector<Rectangle> out;
  std::unordered_set<std::string> seen;
  for (const auto& sg : fam.grids)
    for (auto& r : grid_rectangles(g, sg))
      if (seen.insert(rect_key(r)).second) out.push_back(std::move(r));
  if (spec.mode == FamilyMode::sampled && spec.samples > 0) {
    std::mt19937_64 rng(spec.seed);
    const int N = g.cells_per_axis();
    std::uniform_int_distribution<int> pos(0, N - 1);
    std::uniform_int_distribution<int> side(1, N);
    int added = 0;
    int attempts = 0;
    while (added < spec.samples && attempts < 100 * spec.samples + 100) {
      ++attempts;
      Rectangle r;
      r.split = g.n;
      const int s1 = side(rng);
      const int s2 = side(rng);
      for (int a = 0; a < g.n; ++a) r.axes.push_back({pos(rng), s1});
      for (int a = 0; a < g.m; ++a) r.axes.push_back({pos(rng), s2});
      r = canonical(std::move(r), g);
      if (seen.insert(rect_key(r)).second) {
        out.push_back(std::move(r));
        ++added;
      }
    }
  }
  return out;
}

bool single_cell_factor(const Rectangle& r, const GridSpec& g, int factor) {
  const int off = g.factor_offset(factor);
  for (int a = 0; a < g.factor_axes(factor); ++a)
    if (r.axes[off + a].len != 1) return false;
  return true;
}

int factor_index(const Rectangle& r, const GridSpec& g, int factor) {
  const int off = g.factor_offset(factor);
  int idx = 0;
  for (int a = 0; a < g.factor_axes(factor); ++a) idx = idx * g.cells_per_axis() + r.axes[off + a].lo;
  return idx;
}

}  // namespace bmolab
