#include "bmolab/pairsum.hpp"

#include <algorithm>

#include "bmolab/linalg.hpp"

namespace bmolab {

namespace {

// Copies the region's cells of a field into a contiguous buffer.
std::vector<double> gather(const double* field, std::span<const std::uint32_t> region, int d) {
  const std::size_t st = static_cast<std::size_t>(d) * d;
  std::vector<double> out(region.size() * st);
  for (std::size_t i = 0; i < region.size(); ++i)
    std::copy(field + region[i] * st, field + (region[i] + 1) * st, out.begin() + i * st);
  return out;
}

template <int D>
double norm_sq_fixed(const double* p, const double* g, const double* q, const double* h) {
  double m[D * D];
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) {
      double s = 0.0;
      for (int k = 0; k < D; ++k) s += p[i * D + k] * g[k * D + j];
      if (q)
        for (int k = 0; k < D; ++k) s -= q[i * D + k] * h[k * D + j];
      m[i * D + j] = s;
    }
  return kernel::op_norm_sq(m, D);
}

double norm_sq_dyn(const double* p, const double* g, const double* q, const double* h, int d) {
  double m[kMaxDim * kMaxDim];
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += p[i * d + k] * g[k * d + j];
      if (q)
        for (int k = 0; k < d; ++k) s -= q[i * d + k] * h[k * d + j];
      m[i * d + j] = s;
    }
  return kernel::op_norm_sq(m, d);
}

template <typename Norm>
void run(const double* P, const double* G, const double* Q, const double* H, std::size_t n, std::size_t st,
         double a, double b, PairSums& out, Norm&& norm_sq) {
  const double ha = 0.5 * a, hb = 0.5 * b;
  out.row.assign(a > 0 ? n : 0, 0.0);
  out.col.assign(b > 0 ? n : 0, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    double acc = 0.0;
    const double* px = P + x * st;
    const double* qx = Q ? Q + x * st : nullptr;
    for (std::size_t y = 0; y < n; ++y) {
      const double n2 = norm_sq(px, G + y * st, qx, H ? H + y * st : nullptr);
      if (a > 0) acc += fast_pow(n2, ha);
      if (b > 0) out.col[y] += fast_pow(n2, hb);
    }
    if (a > 0) out.row[x] = acc / static_cast<double>(n);
  }
  if (b > 0)
    for (double& c : out.col) c /= static_cast<double>(n);
}

}  // namespace

void pair_sums(const PairFields& f, std::span<const std::uint32_t> region, double a, double b, PairSums& out) {
  const int d = f.d;
  const std::size_t st = static_cast<std::size_t>(d) * d;
  const std::size_t n = region.size();
  const auto P = gather(f.p, region, d);
  const auto G = gather(f.g, region, d);
  std::vector<double> Q, H;
  if (f.q) {
    Q = gather(f.q, region, d);
    H = gather(f.h, region, d);
  }
  const double* q = f.q ? Q.data() : nullptr;
  const double* h = f.q ? H.data() : nullptr;
  switch (d) {
    case 1:
      run(P.data(), G.data(), q, h, n, st, a, b, out, [](const double* p, const double* g, const double* q, const double* h) {
        const double v = p[0] * g[0] - (q ? q[0] * h[0] : 0.0);
        return v * v;
      });
      break;
    case 2:
      run(P.data(), G.data(), q, h, n, st, a, b, out, norm_sq_fixed<2>);
      break;
    case 3:
      run(P.data(), G.data(), q, h, n, st, a, b, out, norm_sq_fixed<3>);
      break;
    case 4:
      run(P.data(), G.data(), q, h, n, st, a, b, out, norm_sq_fixed<4>);
      break;
    default:
      run(P.data(), G.data(), q, h, n, st, a, b, out,
          [d](const double* p, const double* g, const double* q, const double* h) { return norm_sq_dyn(p, g, q, h, d); });
  }
}

double outer_average(std::span<const double> v, double s, double t) {
  double acc = 0.0;
  for (double x : v) acc += fast_pow(x, s);
  return fast_pow(acc / static_cast<double>(v.size()), t);
}

}  // namespace bmolab
