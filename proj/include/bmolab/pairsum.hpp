#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace bmolab {

/// x^a with sqrt-based fast paths for the exponents that occur when
/// p, p' lie in {3/2, 2, 3}; falls back to std::pow.
inline double fast_pow(double x, double a) {
  if (a == 1.0) return x;
  if (a == 0.0) return 1.0;
  if (a == 0.5) return std::sqrt(x);
  if (a == 1.5) return x * std::sqrt(x);
  if (a == 2.0) return x * x;
  if (a == 0.75) {
    const double s = std::sqrt(x);
    return s * std::sqrt(s);
  }
  if (a == 0.25) return std::sqrt(std::sqrt(x));
  if (a == -0.25) return 1.0 / std::sqrt(std::sqrt(x));
  if (a == -0.5) return 1.0 / std::sqrt(x);
  return std::pow(x, a);
}

/// Double sums over a region R of |M(x, y)|, the operator norm of
///   M(x, y) = P(x) G(y) - Q(x) H(y)       (Q, H optional)
/// where each argument is a cellwise d x d field (row-major per cell).
///
///   row[x] = avg_y |M(x, y)|^a      (when a > 0)
///   col[y] = avg_x |M(x, y)|^b      (when b > 0)
///
/// This is the common kernel of the A_p characteristic and the pointwise
/// bmo variants; everything else is a cheap outer average.
struct PairSums {
  std::vector<double> row;
  std::vector<double> col;
};

struct PairFields {
  const double* p = nullptr;
  const double* g = nullptr;
  const double* q = nullptr;  // may be null
  const double* h = nullptr;  // may be null
  int d = 1;
};

void pair_sums(const PairFields& f, std::span<const std::uint32_t> region, double a, double b, PairSums& out);

/// (avg_x v[x]^(s))^(t)
double outer_average(std::span<const double> v, double s, double t);

}  // namespace bmolab
