#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace bmolab {

/// Periodic unit torus [0,1)^(n+m) cut into N = 2^level cells per axis.
/// The first n axes form the first factor, the remaining m the second.
/// m = 0 describes a one-parameter grid (used for slices).
struct GridSpec {
  int n = 1;
  int m = 1;
  int level = 6;

  int axes() const { return n + m; }
  int cells_per_axis() const { return 1 << level; }
  std::size_t cell_count() const;
  int factor_axes(int factor) const { return factor == 1 ? n : m; }
  int factor_offset(int factor) const { return factor == 1 ? 0 : n; }

  /// Throws ConfigError on unusable dimensions or depth.
  void validate() const;

  /// L = 6 for two axes, L = 4 for three, otherwise L = 6.
  static GridSpec desk(int n, int m);

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

/// Cells lo, lo+1, ..., lo+len-1 taken mod N. Canonical form has 0 <= lo < N
/// and lo = 0 whenever len = N.
struct CellInterval {
  int lo = 0;
  int len = 1;
  friend bool operator==(const CellInterval&, const CellInterval&) = default;
};

/// Grid-aligned rectangle R = R1 x R2; `split` axes belong to R1.
struct Rectangle {
  std::vector<CellInterval> axes;
  int split = 1;

  std::size_t cell_volume() const;
  /// Lebesgue measure on the unit torus.
  double measure(const GridSpec& g) const;
  /// Side length (in cells) of the cube in a factor; 0 for an empty factor.
  int side(int factor) const;

  friend bool operator==(const Rectangle&, const Rectangle&) = default;
};

void to_json(nlohmann::json& j, const Rectangle& r);
void from_json(const nlohmann::json& j, Rectangle& r);
std::string describe(const Rectangle& r);

/// Reduces lo mod N and pins full-period intervals to lo = 0.
Rectangle canonical(Rectangle r, const GridSpec& g);

/// Throws IndexOutOfRange unless r fits g with cube factors.
void check_rectangle(const Rectangle& r, const GridSpec& g);

/// Row-major linear cell index (axis 0 slowest) of a multi-index.
std::size_t cell_index(const GridSpec& g, const std::vector<int>& multi);
std::vector<int> cell_multi_index(const GridSpec& g, std::size_t index);

/// Linear indices of the cells covered by r, in row-major order of r's
/// own coordinates.
std::vector<std::uint32_t> cells(const Rectangle& r, const GridSpec& g);

/// Whole torus as a rectangle.
Rectangle full_rectangle(const GridSpec& g);

/// ch_i(R): the 2^(n i1) 2^(m i2) sub-rectangles at relative depth (i1, i2).
/// Throws ResolutionExceeded when the descent goes below a cell.
std::vector<Rectangle> children(const Rectangle& r, const GridSpec& g, int i1, int i2);

/// One product dyadic grid of the torus, shifted per axis by shift_thirds/3.
struct ShiftedGrid {
  std::vector<int> shift_thirds;  // each in {0, 1, 2}
  std::vector<int> shift_cells;   // snapped to the cell lattice
};

struct ShiftedGridFamily {
  GridSpec grid;
  std::vector<ShiftedGrid> grids;  // grids[0] is the unshifted base grid
  double max_snap_cells = 0.0;     // largest |shift_cells - N * thirds / 3|
};

ShiftedGridFamily shifted_family(const GridSpec& g);

/// All rectangles of one (snapped) product dyadic grid, canonical order:
/// factor levels coarse to fine, then positions row-major.
std::vector<Rectangle> grid_rectangles(const GridSpec& g, const ShiftedGrid& sg);

/// Axis-parallel box on the unit torus, continuous coordinates.
struct Box {
  std::vector<double> lo;
  std::vector<double> len;
  int split = 1;
};

struct CoverResult {
  std::size_t grid_index = 0;
  Box cover;
  std::vector<int> level;  // per factor, side 2^-level
};

/// 1/3-trick covering with exact thirds: returns the smallest S in
/// fam.grids[index] with R inside S; every side of S is at most 6 times the
/// matching side of R (factor sides use the largest side of the factor).
/// Throws TooLarge if a side exceeds the period.
CoverResult cover(const Box& r, const ShiftedGridFamily& fam);

/// Continuous box occupied by a grid rectangle.
Box to_box(const Rectangle& r, const GridSpec& g);

/// true when `inner` lies inside `outer` on the torus, up to tol.
bool box_contains(const Box& outer, const Box& inner, double tol = 1e-12);

enum class FamilyMode { dyadic, shifted, sampled };

struct FamilySpec {
  FamilyMode mode = FamilyMode::dyadic;
  int samples = 0;            // extra seeded rectangles for sampled mode
  std::uint64_t seed = 0x5eedULL;
  int grid_index = -1;        // dyadic mode: pick one shifted grid instead of the base

  std::string describe() const;
};

FamilySpec parse_family(const std::string& text);

/// True when r is a single cell in every axis of the given factor (1 or 2).
bool single_cell_factor(const Rectangle& r, const GridSpec& g, int factor);
/// Row-major index of that factor's lower corner cell, as used by slice().
int factor_index(const Rectangle& r, const GridSpec& g, int factor);

/// Finite surrogate for "all rectangles": dyadic, union of the shifted
/// grids (deduplicated), or that union plus seeded arbitrary rectangles.
std::vector<Rectangle> rectangle_family(const GridSpec& g, const FamilySpec& spec);

}  // namespace bmolab
