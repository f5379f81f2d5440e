#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bmolab/grid.hpp"
#include "bmolab/linalg.hpp"
#include "json.hpp"

namespace bmolab {

enum class FieldKind { weight, symbol };

std::string to_string(FieldKind k);
FieldKind parse_field_kind(const std::string& s);

/// Header line of a WFLD file.
struct WeightManifest {
  GridSpec grid;
  int d = 1;
  FieldKind kind = FieldKind::weight;
  nlohmann::json generator = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string endianness = "little";

  friend bool operator==(const WeightManifest&, const WeightManifest&) = default;
};

void to_json(nlohmann::json& j, const WeightManifest& m);
void from_json(const nlohmann::json& j, WeightManifest& m);

/// Piecewise-constant matrix field: one d x d matrix per grid cell, stored
/// contiguously (cell-major, then row-major entries).
class WeightField {
 public:
  WeightField() = default;

  /// Checks every cell is symmetric and clamps eigenvalues below eig_floor.
  static WeightField weight(const GridSpec& g, int d, std::vector<double> data,
                            nlohmann::json generator = nlohmann::json::object(), std::uint64_t seed = 0,
                            double eig_floor = kEigFloor);
  static WeightField symbol(const GridSpec& g, int d, std::vector<double> data,
                            nlohmann::json generator = nlohmann::json::object(), std::uint64_t seed = 0);

  const GridSpec& grid() const { return manifest_.grid; }
  int dim() const { return manifest_.d; }
  FieldKind kind() const { return manifest_.kind; }
  const WeightManifest& manifest() const { return manifest_; }
  std::size_t cell_count() const { return manifest_.grid.cell_count(); }
  std::size_t stride() const { return static_cast<std::size_t>(dim()) * dim(); }

  const double* cell(std::size_t i) const { return data_.data() + i * stride(); }
  Matrix at(std::size_t i) const;
  std::span<const double> data() const { return data_; }

  /// Cells whose eigenvalues were clamped at construction.
  int clamped() const { return clamped_; }
  /// Set by generators whose parameters leave the A_p range.
  bool flagged_non_ap() const { return non_ap_; }
  void flag_non_ap(bool v) { non_ap_ = v; }

 private:
  WeightManifest manifest_;
  std::vector<double> data_;
  int clamped_ = 0;
  bool non_ap_ = false;
};

/// Cellwise W(x)^s (weights only).
WeightField field_power(const WeightField& w, double s);

/// Cellwise transpose of a symbol.
WeightField transpose(const WeightField& b);

/// Cellwise t * B.
WeightField scale(const WeightField& b, double t);

/// Largest cellwise |W(x)W(y) - W(y)W(x)| over all cell pairs (d small).
double max_commutator(const WeightField& w);

/// Scalar power weight prod_a dist(x_a, 0)^alpha_a at cell centres, periodic
/// distance, clamped below by eig_floor. Flags non-A_p when an exponent
/// leaves (-1, p-1).
WeightField gen_power_weight(const GridSpec& g, const std::vector<double>& alpha, double p);

/// Q(theta(x)) diag(l1(x), l2(x)) Q(theta(x))^T with
/// theta(x) = theta0 + pi * sum_a k_a x_a and
/// l_i(x) = lambda_i * exp(wave_i * cos(2 pi (x_0 + phase_i))).
struct RotatingSpec {
  double lambda1 = 1.0;
  double lambda2 = 10.0;
  double wave1 = 0.0;
  double wave2 = 0.0;
  double theta0 = 0.0;
  std::vector<int> k;  // per axis; empty means all zero
  std::uint64_t seed = 0;  // random phases for the eigenvalue waves
};
WeightField gen_rotating_weight(const GridSpec& g, const RotatingSpec& spec);

/// exp(H(x)) with H a seeded smooth symmetric trigonometric field of
/// `modes` terms and sup-norm at most `amplitude`.
WeightField gen_expsym_weight(const GridSpec& g, int d, double amplitude, int modes, std::uint64_t seed);

enum class SymbolShape { constant, trig, checkerboard, one_variable, separable };

SymbolShape parse_symbol_shape(const std::string& s);
std::string to_string(SymbolShape s);

/// Seeded symbol families. trig: smooth random matrix field; checkerboard:
/// +-C on 2 x 2 blocks of the torus; one_variable: depends on the first
/// factor only; separable: b1(x1) + b2(x2); constant: a single matrix.
WeightField gen_symbol(const GridSpec& g, int d, SymbolShape shape, double amplitude, std::uint64_t seed);

/// Builds a generator from its JSON descriptor (the "generator" object of a
/// manifest or config). Throws ConfigError on unknown fields.
WeightField generate(const GridSpec& g, const nlohmann::json& descriptor);

/// W' = W^(-1/(p-1)).
WeightField dual_weight(const WeightField& w, double p);

/// Field on the complementary factor obtained by fixing the `factor`
/// coordinates to the cell with linear (row-major) index `coord`.
WeightField slice(const WeightField& f, int factor, int coord);

void save(const std::filesystem::path& path, const WeightField& f);
WeightField load(const std::filesystem::path& path);

/// In-memory WFLD encoding; save/load are thin wrappers.
std::string encode(const WeightField& f);
WeightField decode(const std::string& bytes);

}  // namespace bmolab
