#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bmolab/grid.hpp"
#include "bmolab/reducing.hpp"
#include "bmolab/weights.hpp"
#include "json.hpp"

namespace bmolab {

/// R^d-valued piecewise-constant function: d coefficients per cell,
/// cell-major. Inner products and norms are cell averages (unit torus).
struct VectorField {
  GridSpec grid;
  int d = 1;
  std::vector<double> data;

  VectorField() = default;
  VectorField(const GridSpec& g, int dim);
  static VectorField random(const GridSpec& g, int dim, std::uint64_t seed);

  std::size_t cells() const { return data.size() / d; }
  double* cell(std::size_t i) { return data.data() + i * d; }
  const double* cell(std::size_t i) const { return data.data() + i * d; }
};

void to_json(nlohmann::json& j, const VectorField& f);

/// avg <f(x), g(x)>
double inner(const VectorField& f, const VectorField& g);
/// (avg |f(x)|^p)^{1/p}
double lp_norm(const VectorField& f, double p);

/// Periodic Riesz transform in one factor: the multiplier -i xi_j / |xi|
/// with xi the frequency restricted to that factor's axes (j is 0-based
/// within the factor). Modes with zero factor frequency and the Nyquist
/// mode of axis j are annihilated, so real inputs stay real.
VectorField riesz_apply(const VectorField& f, int factor, int j);

/// R^1_j R^2_k.
VectorField tensor_riesz_apply(const VectorField& f, int j, int k);

/// [T, B] f = T(B f) - B T f with T = R^1_j R^2_k.
VectorField commutator_apply(const WeightField& b, int j, int k, const VectorField& f);

/// Bounded linear operator on vector fields with its L^2 adjoint.
class Operator {
 public:
  virtual ~Operator() = default;
  virtual VectorField apply(const VectorField& f) const = 0;
  virtual VectorField adjoint(const VectorField& g) const = 0;
  virtual std::string name() const = 0;
};

using OperatorPtr = std::shared_ptr<const Operator>;

OperatorPtr identity_operator();
OperatorPtr riesz_operator(int factor, int j);
OperatorPtr tensor_riesz_operator(int j, int k);
/// [T, B] for any T; the adjoint is B^T T* - T* B^T.
OperatorPtr commutator_operator(const WeightField& b, OperatorPtr t);
/// A_R f = 1_R <f>_R (self-adjoint).
OperatorPtr averaging_operator(const Rectangle& r);

enum class OpNormMethod { exact_p2_power_iter, lower_search };
std::string to_string(OpNormMethod m);

struct OpNormOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  int starts = 3;             // seeded random starts for the p != 2 search
  int search_iter = 3000;     // ascent steps per start for p != 2
  std::uint64_t seed = 0xB0B0ULL;
  std::optional<VectorField> warm_start;  // previous witness, used as an extra start
};

/// ||T||_{L^p(U) -> L^p(V)}, with ||f||_{L^p(U)} = (avg |U^{1/p} f|^p)^{1/p}.
struct OpNormEstimate {
  double value = 0.0;
  OpNormMethod method = OpNormMethod::exact_p2_power_iter;
  int iterations = 0;
  double residual = 0.0;  // relative change at termination
  double p = 2.0;
  bool converged = true;
  VectorField witness;    // f attaining value: ratio = ||T f||_{L^p(V)} / ||f||_{L^p(U)}
};

void to_json(nlohmann::json& j, const OpNormEstimate& e);

/// p = 2: power iteration on M*M with M = V^{1/2} T U^{-1/2}.
/// p != 2: certified lower estimate by a nonlinear power (normalized
/// gradient ascent) search; value is the ratio attained by the witness.
OpNormEstimate weighted_opnorm(const Operator& t, const WeightField& u, const WeightField& v, double p,
                               const OpNormOptions& opt = {});

/// lhs = |W'_R W_R| from reducing operators, rhs = ||A_R||_{L^p(W)}.
struct AveragingReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;  // lhs / rhs
  OpNormEstimate estimate;
};

void to_json(nlohmann::json& j, const AveragingReport& r);

AveragingReport averaging_opnorm(const Rectangle& r, const WeightField& w, double p,
                                 ReducingMode mode = ReducingMode::john, const JohnOptions& ropt = {},
                                 const OpNormOptions& opt = {});

/// W with W^{1/p} = (Phi^T Phi)^{1/2}, Phi = [[V^{1/p}, V^{1/p} B], [0, U^{1/p}]].
WeightField tensorize_phi(const WeightField& b, const WeightField& u, const WeightField& v, double p);

/// ap_local(W_Phi, R, p) against [U]_{A_p,R} + [V]_{A_p,R} + bmo1_R(B)^p.
struct TensorRow {
  Rectangle rect;
  double ap_w = 0.0;
  double ap_u = 0.0;
  double ap_v = 0.0;
  double bmo1_p = 0.0;
  double ratio = 0.0;
};

struct TensorTable {
  std::vector<TensorRow> rows;  // empty unless kept
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::size_t rectangles = 0;
};

void to_json(nlohmann::json& j, const TensorTable& t);

TensorTable tensorization_table(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                                const std::vector<Rectangle>& rects, bool keep_rows = false);

/// Commutator norms of [R^1_j R^2_k, B] for every (j, k).
struct CommutatorNorms {
  double max = 0.0;
  int argmax_j = 0;
  int argmax_k = 0;
  std::vector<OpNormEstimate> entries;  // (j, k) row-major
};

CommutatorNorms commutator_norms(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                                 const OpNormOptions& opt = {});

enum class TensorTableMode { none, summary, rows };

/// bmo(B; U, V, p) against the largest commutator norm, with the
/// tensorized-characteristic decomposition over the same family.
struct LowerBoundReport {
  double bmo = 0.0;
  double commutator = 0.0;
  double ratio = 0.0;  // bmo / commutator; 0 when degenerate
  bool degenerate = false;
  bool lower_estimate = false;  // commutator norm is a lower estimate (p != 2)
  Rectangle bmo_argmax;
  CommutatorNorms norms;
  TensorTable tensor;
  double p = 2.0;
  std::string family;
  ReducingMode mode = ReducingMode::john;
};

void to_json(nlohmann::json& j, const LowerBoundReport& r);

LowerBoundReport lower_bound_experiment(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                                        const FamilySpec& fam, ReducingMode mode = ReducingMode::john,
                                        const JohnOptions& ropt = JohnOptions::bulk(), const OpNormOptions& opt = {},
                                        TensorTableMode tensor = TensorTableMode::summary);

/// Largest commutator norm against bmo1(B; U, V, p).
struct UpperBoundReport {
  double commutator = 0.0;
  double bmo1 = 0.0;
  double ratio = 0.0;  // commutator / bmo1; 0 when degenerate
  bool degenerate = false;
  bool lower_estimate = false;
  Rectangle bmo1_argmax;
  CommutatorNorms norms;
  double p = 2.0;
  std::string family;
};

void to_json(nlohmann::json& j, const UpperBoundReport& r);

UpperBoundReport upper_bound_experiment(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                                        const FamilySpec& fam = {}, const OpNormOptions& opt = {});

}  // namespace bmolab
