#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bmolab/grid.hpp"
#include "bmolab/reducing.hpp"
#include "bmolab/weights.hpp"
#include "json.hpp"

namespace bmolab {

/// A sup over a rectangle family with its maximizer.
struct NormValue {
  double value = 0.0;
  Rectangle argmax;
  std::size_t rectangles = 0;
};

void to_json(nlohmann::json& j, const NormValue& v);

/// Local (single rectangle) quantities for a symbol B and weights U, V.
/// Reducing operators come from the given mode; regions are cell lists.
///   bmo:    (avg_R |V(x)^{1/p} (B(x) - <B>_R) U_R^{-1}|^p dx)^{1/p}
///   tilde:  avg_R |V_R (B(x) - <B>_R) U_R^{-1}| dx
///   first:  (avg_x (avg_y |V(x)^{1/p} (B(x) - B(y)) U(y)^{-1/p}|^{p'})^{p/p'})^{1/p}
///   second: (avg_y (avg_x |V(x)^{1/p} (B(x) - B(y)) U(y)^{-1/p}|^{p})^{p'/p})^{1/p'}
class BmoLocal {
 public:
  BmoLocal(const WeightField& b, const WeightField& u, const WeightField& v, double p, ReducingMode mode,
           JohnOptions opt = JohnOptions::bulk());

  double p() const { return p_; }
  int dim() const { return d_; }
  const GridSpec& grid() const { return grid_; }
  ReducingMode mode() const { return mode_; }

  Matrix mean(std::span<const std::uint32_t> region) const;
  ReducingOp reduce_u(std::span<const std::uint32_t> region) const { return ru_(region); }
  ReducingOp reduce_v(std::span<const std::uint32_t> region) const { return rv_(region); }

  /// Local values given precomputed reducing operators.
  double bmo(std::span<const std::uint32_t> region, const Matrix& mean_b, const Matrix& u_inv) const;
  double tilde(std::span<const std::uint32_t> region, const Matrix& mean_b, const Matrix& v_r,
               const Matrix& u_inv) const;
  /// Both pointwise variants from one double sum: {first, second}.
  std::pair<double, double> pointwise(std::span<const std::uint32_t> region) const;

  /// Convenience: computes the reducing operators itself.
  double bmo(std::span<const std::uint32_t> region) const;
  double tilde(std::span<const std::uint32_t> region) const;

 private:
  GridSpec grid_;
  int d_;
  double p_;
  ReducingMode mode_;
  std::vector<double> b_;        // B
  std::vector<double> v_pos_;    // V^{1/p}
  std::vector<double> u_neg_;    // U^{-1/p}
  std::vector<double> vb_;       // V^{1/p} B
  std::vector<double> bu_;       // B U^{-1/p}
  Reducer ru_;
  Reducer rv_;
};

NormValue bmo_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                   const FamilySpec& fam, ReducingMode mode, const JohnOptions& opt = JohnOptions::bulk());
NormValue bmo_tilde_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                         const FamilySpec& fam, ReducingMode mode, const JohnOptions& opt = JohnOptions::bulk());
NormValue bmo1_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                    const FamilySpec& fam);
NormValue bmo2_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                    const FamilySpec& fam);

/// One-parameter two-weight BMO norm of fields on a factor grid (m = 0),
/// as a sup over the cubes of the family.
NormValue one_param_bmo_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                             const FamilySpec& fam, ReducingMode mode, const JohnOptions& opt = JohnOptions::bulk());

/// Sup over x2 of the one-parameter norm of B(., x2) in x1 (first) and over
/// x1 of that of B(x1, .) (second), over the cubes of the given family.
/// argmax_* are linear indices of the fixed cell, as in slice().
struct SliceNorms {
  double first = 0.0;
  double second = 0.0;
  int argmax_first = 0;
  int argmax_second = 0;
};

void to_json(nlohmann::json& j, const SliceNorms& s);

SliceNorms slice_sup_norms(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                           ReducingMode mode, const JohnOptions& opt = JohnOptions::bulk(),
                           const FamilySpec& fam = {});

/// One pairwise comparison; degenerate when either value is <= 1e-10.
struct RatioEntry {
  std::string a;
  std::string b;
  double value_a = 0.0;
  double value_b = 0.0;
  double ratio = 0.0;  // max(a/b, b/a); 0 when degenerate
  bool degenerate = true;
  std::string witness_a;
  std::string witness_b;
};

void to_json(nlohmann::json& j, const RatioEntry& r);

inline constexpr double kDegenerateNorm = 1e-10;

struct BmoReport {
  double p = 2.0;
  std::string family;
  ReducingMode mode = ReducingMode::john;
  NormValue bmo, tilde, first, second;  // B with (U, V, p)
  NormValue dual_bmo, dual_tilde;       // B* with (V', U', p')
  SliceNorms slices;
  std::vector<RatioEntry> ratios;
  double max_ratio = 0.0;  // over non-degenerate entries
  /// Largest per-rectangle tilde / bmo divided by [V]_{A_p,R}^{1/p}, and the
  /// number of rectangles that break the Hoelder bound
  /// tilde <= sqrt(d) [V']_{A_p',R}^{1/p'} bmo.
  double dominance_constant = 0.0;
  int holder_violations = 0;
  int nonconverged = 0;  // reducing operators flagged by the optimizer
  std::size_t rectangles = 0;
};

void to_json(nlohmann::json& j, const BmoReport& r);

/// Reducing operators of one weight over a rectangle family, in family
/// order. Shared read-only by the per-rectangle workers.
struct ReducingTable {
  std::vector<Matrix> matrix;
  std::vector<Matrix> inverse;
  std::vector<char> converged;
  int nonconverged = 0;
};

ReducingTable reducing_table(const WeightField& w, double p, ReducingMode mode, const JohnOptions& opt,
                             const std::vector<Rectangle>& rects);

/// Everything in the equivalence report that depends only on (U, V, p) and
/// the family: reducing operators of U, V (exponent p) and of V', U'
/// (exponent p'), and the local characteristics of V and V'. Build once and
/// reuse for many symbols.
struct BmoWeights {
  BmoWeights(const WeightField& u, const WeightField& v, double p, const FamilySpec& fam, ReducingMode mode,
             const JohnOptions& opt = JohnOptions::bulk());

  WeightField u, v, u_dual, v_dual;
  double p;
  FamilySpec family;
  ReducingMode mode;
  JohnOptions opt;
  std::vector<Rectangle> rects;
  ReducingTable ru, rv, ru_dual, rv_dual;
  std::vector<double> ap_v;       // [V]_{A_p,R}
  std::vector<double> ap_v_dual;  // [V']_{A_p',R}
};

/// All variants, the duality partners, slice maxima and every pairwise ratio.
BmoReport equivalence_report(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                             const FamilySpec& fam, ReducingMode mode, const JohnOptions& opt = JohnOptions::bulk());
BmoReport equivalence_report(const WeightField& b, const BmoWeights& w);

}  // namespace bmolab
