#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bmolab/grid.hpp"
#include "bmolab/linalg.hpp"
#include "bmolab/weights.hpp"
#include "json.hpp"

namespace bmolab {

enum class ReducingMode { exact_p2, proxy, john };

std::string to_string(ReducingMode m);
ReducingMode parse_reducing_mode(const std::string& s);

/// The L^p average norm rho(e) = (avg_E |W^{1/p} e|^p)^{1/p} on a set of cells,
/// evaluated from S = W^{2/p} as (avg_E (e^T S e)^{p/2})^{1/p}.
class LpBody {
 public:
  /// s_field holds W^{2/p} cellwise (d x d row-major per cell).
  LpBody(const double* s_field, int d, std::span<const std::uint32_t> cells, double p);

  int dim() const { return d_; }
  double p() const { return p_; }
  std::size_t size() const { return cells_.size(); }

  double rho(const double* e) const;
  /// rho(e)^p, without the final root.
  double rho_p(const double* e) const;
  /// Returns rho(e) and writes the gradient g(e) (with <g, e> = rho(e)).
  double rho_grad(const double* e, double* g) const;
  /// S^{1/2} of the first cell (the exact reducing matrix of a one-cell body).
  Matrix single_root() const;

 private:
  const double* s_;
  int d_;
  std::span<const std::uint32_t> cells_;
  double p_;
  double half_p_;
  double half_p_minus_one_;
};

struct ReducingOp {
  Matrix matrix;  // positive definite, d x d
  ReducingMode mode = ReducingMode::john;
  double p = 2.0;
  /// max over tested e of rho(e) / |M e|   (left sandwich slack)
  double residual_lower = 0.0;
  /// max over tested e of |M e| / (sqrt(d) rho(e))   (right sandwich slack)
  double residual_upper = 0.0;
  /// Largest of the two slacks; <= 1 + tol means the sandwich holds.
  double residual() const { return std::max(residual_lower, residual_upper); }
  /// True when the residual comes from the separate certification net plus
  /// random directions rather than the optimizer's own directions.
  bool certified = false;
  bool converged = true;
  int rounds = 0;
  std::string region;
};

void to_json(nlohmann::json& j, const ReducingOp& r);

struct JohnOptions {
  int max_rounds = 500;
  double mvee_tol = 1e-10;     // log-volume duality gap of the ellipsoid solve
  double cut_tol = 1e-8;       // target overshoot of rho on the ellipsoid
  double accept_tol = 1e-7;    // overshoot still reported as converged
  bool measure = true;         // measure slacks on a small net when not certifying
  bool certify = false;        // run the separate certification net
  int random_directions = 1000;
  std::uint64_t seed = 0xC0FFEEULL;

  /// Looser preset for sweeps over whole rectangle families.
  static JohnOptions bulk() {
    JohnOptions o;
    o.cut_tol = 1e-6;
    o.accept_tol = 1e-6;
    o.mvee_tol = 1e-9;
    return o;
  }
};

/// Quasi-uniform unit directions for symmetric bodies (one per antipodal
/// pair): half-circle angles for d = 2, Fibonacci / random-rotated points
/// for d >= 3. Deterministic.
std::vector<double> direction_net(int d, int count);

/// Default certification net size: 2000 for d <= 3, 10^4 for d = 4 and up.
int certification_net_size(int d);

/// Measures both sandwich slacks of M against the body on `dirs`
/// (count x d, row-major).
void measure_residual(const LpBody& body, const Matrix& m, std::span<const double> dirs, double& lower,
                      double& upper);

/// Certification: separate net plus seeded random directions.
void certify(const LpBody& body, ReducingOp& op, int random_directions, std::uint64_t seed);

/// Core solvers on a precomputed S = W^{2/p} field.
Matrix john_matrix(const LpBody& body, const JohnOptions& opt, int& rounds, bool& converged);

// --- Field-level API. Regions are cell lists (see cells()). -------------

double rho(const WeightField& w, std::span<const std::uint32_t> region, double p, std::span<const double> e);

ReducingOp reducing_exact_p2(const WeightField& w, std::span<const std::uint32_t> region);
ReducingOp reducing_proxy(const WeightField& w, std::span<const std::uint32_t> region, double p);
ReducingOp reducing_john(const WeightField& w, std::span<const std::uint32_t> region, double p,
                         const JohnOptions& opt = {});
ReducingOp reducing(const WeightField& w, std::span<const std::uint32_t> region, double p, ReducingMode mode,
                    const JohnOptions& opt = {});

/// Precomputed cellwise powers for repeated reductions over many regions
/// of one field: holds W^{2/p} (john), W^{1/p} (proxy) and W (exact_p2).
class Reducer {
 public:
  Reducer(const WeightField& w, double p, ReducingMode mode, JohnOptions opt = {});

  int dim() const { return d_; }
  double p() const { return p_; }
  ReducingMode mode() const { return mode_; }
  ReducingOp operator()(std::span<const std::uint32_t> region) const;
  /// rho for the stored field and exponent.
  double rho(std::span<const std::uint32_t> region, const double* e) const;

 private:
  int d_;
  double p_;
  ReducingMode mode_;
  JohnOptions opt_;
  std::vector<double> s_;     // W^{2/p}
  std::vector<double> base_;  // W (exact_p2) or W^{1/p} (proxy)
};

/// Iterated reducing operator W_{F,E}: reduce each x1-slice over the second
/// factor of R, raise to the p-th power, then reduce over the first factor.
ReducingOp iterated_reducing(const WeightField& w, const Rectangle& r, double p, ReducingMode mode,
                             const JohnOptions& opt = {});

struct InversePrimeReport {
  double slack_left = 0.0;   // max |W_E^{-1} e| / |W'_E e|, should be <= 1 + tol
  double slack_right = 0.0;  // max |W'_E e| / (C_E^{1/p} |W_E^{-1} e|)
  double c_e = 1.0;          // avg_E (avg_E |W(x)^{1/p} W(y)^{-1/p}|^{p'} dy)^{p/p'} dx
};

/// Compares W_E^{-1} with the reducing operator of the dual weight
/// (exponent p') over a direction net.
InversePrimeReport compare_inverse_prime(const WeightField& w, std::span<const std::uint32_t> region, double p,
                                         ReducingMode mode = ReducingMode::john, const JohnOptions& opt = {});

/// max over net directions of |A e| / |B e| (A, B square).
double max_ratio(const Matrix& a, const Matrix& b, std::span<const double> dirs);

}  // namespace bmolab
