#include "bmolab/reducing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <limits>
#include <map>
#include <mutex>
#include <random>

#include "bmolab/error.hpp"
#include "bmolab/pairsum.hpp"

namespace bmolab {

std::string to_string(ReducingMode m) {
  switch (m) {
    case ReducingMode::exact_p2: return "exact_p2";
    case ReducingMode::proxy: return "proxy";
    case ReducingMode::john: return "john";
  }
  return "?";
}

ReducingMode parse_reducing_mode(const std::string& s) {
  if (s == "exact_p2") return ReducingMode::exact_p2;
  if (s == "proxy") return ReducingMode::proxy;
  if (s == "john") return ReducingMode::john;
  throw ConfigError("mode", "unknown reducing mode '" + s + "'");
}

LpBody::LpBody(const double* s_field, int d, std::span<const std::uint32_t> cells, double p)
    : s_(s_field), d_(d), cells_(cells), p_(p), half_p_(0.5 * p), half_p_minus_one_(0.5 * p - 1.0) {
  if (cells.empty()) throw EmptyRegion("reducing operator over an empty region");
  if (!(p > 1.0) || !std::isfinite(p)) throw WrongExponent("need 1 < p < inf");
}

double LpBody::rho(const double* e) const { return fast_pow(rho_p(e), 1.0 / p_); }

double LpBody::rho_p(const double* e) const {
  const std::size_t st = static_cast<std::size_t>(d_) * d_;
  double acc = 0.0;
  if (d_ == 2) {
    const double e0 = e[0], e1 = e[1];
    for (auto c : cells_) {
      const double* s = s_ + c * st;
      const double q = e0 * (s[0] * e0 + s[1] * e1) + e1 * (s[2] * e0 + s[3] * e1);
      acc += fast_pow(q, half_p_);
    }
  } else {
    for (auto c : cells_) {
      const double* s = s_ + c * st;
      double q = 0.0;
      for (int i = 0; i < d_; ++i) {
        double t = 0.0;
        for (int j = 0; j < d_; ++j) t += s[i * d_ + j] * e[j];
        q += e[i] * t;
      }
      acc += fast_pow(q, half_p_);
    }
  }
  return acc / static_cast<double>(cells_.size());
}

Matrix LpBody::single_root() const {
  const std::size_t st = static_cast<std::size_t>(d_) * d_;
  Matrix m(d_, d_);
  const double* s = s_ + cells_[0] * st;
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) m(i, j) = 0.5 * (s[i * d_ + j] + s[j * d_ + i]);
  return hermitian_power(HermitianPD(m, 0.0), 0.5).matrix();
}

double LpBody::rho_grad(const double* e, double* g) const {
  const std::size_t st = static_cast<std::size_t>(d_) * d_;
  double acc = 0.0;
  std::array<double, kMaxDim> gs{};
  std::array<double, kMaxDim> se{};
  for (auto c : cells_) {
    const double* s = s_ + c * st;
    double q = 0.0;
    for (int i = 0; i < d_; ++i) {
      double t = 0.0;
      for (int j = 0; j < d_; ++j) t += s[i * d_ + j] * e[j];
      se[i] = t;
      q += e[i] * t;
    }
    const double w = fast_pow(q, half_p_minus_one_);
    acc += w * q;
    for (int i = 0; i < d_; ++i) gs[i] += w * se[i];
  }
  const double n = static_cast<double>(cells_.size());
  const double r = std::pow(acc / n, 1.0 / p_);
  const double scale = 1.0 / (n * std::pow(r, p_ - 1.0));
  for (int i = 0; i < d_; ++i) g[i] = gs[i] * scale;
  return r;
}

void to_json(nlohmann::json& j, const ReducingOp& r) {
  auto rows = nlohmann::json::array();
  for (int i = 0; i < r.matrix.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (int k = 0; k < r.matrix.cols(); ++k) row.push_back(r.matrix(i, k));
    rows.push_back(row);
  }
  j = nlohmann::json{{"matrix", rows},
                     {"mode", to_string(r.mode)},
                     {"p", r.p},
                     {"residual", r.residual()},
                     {"residual_lower", r.residual_lower},
                     {"residual_upper", r.residual_upper},
                     {"certified", r.certified},
                     {"converged", r.converged},
                     {"rounds", r.rounds}};
  if (!r.region.empty()) j["region"] = r.region;
}

std::vector<double> direction_net(int d, int count) {
  std::vector<double> out;
  if (d == 1) return {1.0};
  out.reserve(static_cast<std::size_t>(count) * d);
  if (d == 2) {
    for (int k = 0; k < count; ++k) {
      const double t = std::numbers::pi * k / count;
      out.push_back(std::cos(t));
      out.push_back(std::sin(t));
    }
    return out;
  }
  if (d == 3) {
    // Fibonacci lattice on the upper hemisphere.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      const double z = 1.0 - (k + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * k;
      out.push_back(r * std::cos(phi));
      out.push_back(r * std::sin(phi));
      out.push_back(z);
    }
    return out;
  }
  std::mt19937_64 rng(0x5151ULL + static_cast<std::uint64_t>(d));
  std::normal_distribution<double> n01;
  for (int k = 0; k < count; ++k) {
    std::vector<double> v(d);
    for (double& x : v) x = n01(rng);
    const double n = euclidean_norm(v);
    for (double x : v) out.push_back(x / n);
  }
  return out;
}

int certification_net_size(int d) { return d <= 3 ? 2000 : 10000; }

namespace {

int optimizer_net_size(int d) { return d == 2 ? 16 : d == 3 ? 60 : 40 * d * d; }
int scan_net_size(int d) { return d == 2 ? 48 : d == 3 ? 200 : 60 * d * d; }
int fine_scan_size(int d) { return d == 2 ? 720 : d == 3 ? 2500 : 200 * d * d; }

// Shared immutable nets, built once per (d, count).
const std::vector<double>& cached_net(int d, int count) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::vector<double>> nets;
  std::lock_guard<std::mutex> lock(mu);
  auto it = nets.find({d, count});
  if (it == nets.end()) it = nets.emplace(std::make_pair(d, count), direction_net(d, count)).first;
  return it->second;
}

// Certification directions: shifted so they never coincide with the
// optimizer net.
std::vector<double> certification_net(int d) {
  const int count = certification_net_size(d);
  if (d == 2) {
    std::vector<double> out;
    for (int k = 0; k < count; ++k) {
      const double t = std::numbers::pi * (k + 0.5 + 0.1 * std::numbers::sqrt2) / count;
      out.push_back(std::cos(t));
      out.push_back(std::sin(t));
    }
    return out;
  }
  if (d == 3) {
    // Rotate a Fibonacci lattice by a fixed generic rotation.
    const auto base = direction_net(3, count);
    const double a = 0.3, b = 0.7;
    const Matrix rz{{std::cos(a), -std::sin(a), 0}, {std::sin(a), std::cos(a), 0}, {0, 0, 1}};
    const Matrix rx{{1, 0, 0}, {0, std::cos(b), -std::sin(b)}, {0, std::sin(b), std::cos(b)}};
    const Matrix r = rz * rx;
    std::vector<double> out;
    for (int k = 0; k < count; ++k) {
      const auto v = r * std::span<const double>(base.data() + 3 * k, 3);
      out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  }
  std::mt19937_64 rng(0xCE27ULL + static_cast<std::uint64_t>(d));
  std::normal_distribution<double> n01;
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    std::vector<double> v(d);
    for (double& x : v) x = n01(rng);
    const double n = euclidean_norm(v);
    for (double x : v) out.push_back(x / n);
  }
  return out;
}

// Inverse of a small SPD matrix by Gauss-Jordan (d <= kMaxDim).
void invert(const double* a, double* out, int d) {
  double m[kMaxDim * 2 * kMaxDim];
  const int w = 2 * d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < w; ++j) m[i * w + j] = j < d ? a[i * d + j] : (j - d == i ? 1.0 : 0.0);
  for (int c = 0; c < d; ++c) {
    int piv = c;
    for (int r = c + 1; r < d; ++r)
      if (std::abs(m[r * w + c]) > std::abs(m[piv * w + c])) piv = r;
    if (piv != c)
      for (int j = 0; j < w; ++j) std::swap(m[c * w + j], m[piv * w + j]);
    const double inv = 1.0 / m[c * w + c];
    for (int j = 0; j < w; ++j) m[c * w + j] *= inv;
    for (int r = 0; r < d; ++r) {
      if (r == c) continue;
      const double f = m[r * w + c];
      if (f == 0.0) continue;
      for (int j = 0; j < w; ++j) m[r * w + j] -= f * m[c * w + j];
    }
  }
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out[i * d + j] = m[i * w + d + j];
}

// Cholesky factorization in place; returns false unless a is positive
// definite. Writes log det a.
bool cholesky_logdet(const double* a, int d, double& logdet) {
  double l[kMaxDim * kMaxDim] = {};
  logdet = 0.0;
  for (int j = 0; j < d; ++j) {
    double s = a[j * d + j];
    for (int k = 0; k < j; ++k) s -= l[j * d + k] * l[j * d + k];
    if (!(s > 0.0)) return false;
    l[j * d + j] = std::sqrt(s);
    logdet += std::log(s);
    for (int i = j + 1; i < d; ++i) {
      double t = a[i * d + j];
      for (int k = 0; k < j; ++k) t -= l[i * d + k] * l[j * d + k];
      l[i * d + j] = t / l[j * d + j];
    }
  }
  return true;
}

// Solves the small dense system h x = r (n <= 10) by Gaussian elimination
// with partial pivoting; h and r are overwritten.
void solve_dense(std::vector<double>& h, std::vector<double>& r, int n) {
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int i = c + 1; i < n; ++i)
      if (std::abs(h[i * n + c]) > std::abs(h[piv * n + c])) piv = i;
    if (piv != c) {
      for (int j = 0; j < n; ++j) std::swap(h[c * n + j], h[piv * n + j]);
      std::swap(r[c], r[piv]);
    }
    for (int i = c + 1; i < n; ++i) {
      const double f = h[i * n + c] / h[c * n + c];
      for (int j = c; j < n; ++j) h[i * n + j] -= f * h[c * n + j];
      r[i] -= f * r[c];
    }
  }
  for (int c = n - 1; c >= 0; --c) {
    double s = r[c];
    for (int j = c + 1; j < n; ++j) s -= h[c * n + j] * r[j];
    r[c] = s / h[c * n + c];
  }
}

// Minimum-volume origin-centred ellipsoid {g : g^T A g <= 1} containing the
// points, by a primal-dual interior-point method (Mehrotra centering) on the
// d(d+1)/2 entries of A:
//   minimize -log det A  subject to  sigma_i = 1 - g_i^T A g_i >= 0,
// with multipliers lambda_i; at the optimum A^{-1} = sum lambda_i g_i g_i^T.
// Iterates stay strictly feasible, so the ellipsoid always contains every
// point; the log-volume is optimal up to the duality gap sum lambda_i sigma_i.
std::vector<double> mvee(const std::vector<double>& pts, int d, double gap_tol) {
  const std::size_t k = pts.size() / d;
  const int n = d * (d + 1) / 2;
  std::vector<std::pair<int, int>> idx;
  for (int p = 0; p < d; ++p)
    for (int q = p; q < d; ++q) idx.emplace_back(p, q);
  // Features phi_a(g) = g^T E_a g with g^T A g = sum_a x_a phi_a(g).
  std::vector<double> phi(k * n);
  double gmax = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double* g = &pts[i * d];
    double gg = 0.0;
    for (int r = 0; r < d; ++r) gg += g[r] * g[r];
    gmax = std::max(gmax, gg);
    for (int a = 0; a < n; ++a) {
      const auto [p, q] = idx[a];
      phi[i * n + a] = (p == q ? 1.0 : 2.0) * g[p] * g[q];
    }
  }
  auto to_matrix = [&](const std::vector<double>& v, double* out) {
    for (int a = 0; a < n; ++a) {
      const auto [p, q] = idx[a];
      out[p * d + q] = out[q * d + p] = v[a];
    }
  };
  auto slacks = [&](const std::vector<double>& v, std::vector<double>& sv) {
    for (std::size_t i = 0; i < k; ++i) {
      double si = 0.0;
      for (int a = 0; a < n; ++a) si += v[a] * phi[i * n + a];
      sv[i] = 1.0 - si;
    }
  };
  std::vector<double> x(n, 0.0), lam(k, static_cast<double>(d) / static_cast<double>(k) / (0.5 / gmax) / gmax);
  for (int a = 0; a < n; ++a)
    if (idx[a].first == idx[a].second) x[a] = 0.5 / gmax;
  std::vector<double> sig(k), xt(n), rd(n), hess(static_cast<std::size_t>(n) * n), h2(hess.size());
  std::vector<double> dx(n), dsig(k), dlam(k), rhs(n), A(static_cast<std::size_t>(d) * d);
  slacks(x, sig);
  double B[kMaxDim * kMaxDim], E[kMaxDim * kMaxDim];
  std::vector<double> BE(static_cast<std::size_t>(n) * d * d);

  // Direction for the centering target mu (shared matrix, two right-hand sides).
  auto direction = [&](double mu) {
    for (int a = 0; a < n; ++a) {
      double v = -rd[a];
      for (std::size_t i = 0; i < k; ++i) v -= (mu / sig[i] - lam[i]) * phi[i * n + a];
      rhs[a] = v;
    }
    h2 = hess;
    dx = rhs;
    solve_dense(h2, dx, n);
    for (std::size_t i = 0; i < k; ++i) {
      double t = 0.0;
      for (int a = 0; a < n; ++a) t += phi[i * n + a] * dx[a];
      dsig[i] = -t;
      dlam[i] = mu / sig[i] - lam[i] + lam[i] / sig[i] * t;
    }
  };
  auto max_step = [&]() {
    double alpha = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (dsig[i] < 0.0) alpha = std::min(alpha, -sig[i] / dsig[i]);
      if (dlam[i] < 0.0) alpha = std::min(alpha, -lam[i] / dlam[i]);
    }
    return alpha;
  };

  for (int iter = 0; iter < 200; ++iter) {
    to_matrix(x, A.data());
    invert(A.data(), B, d);
    for (int a = 0; a < n; ++a) {
      std::fill(E, E + d * d, 0.0);
      const auto [p, q] = idx[a];
      E[p * d + q] = 1.0;
      E[q * d + p] = 1.0;
      double* be = &BE[a * d * d];
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
          double v = 0.0;
          for (int l = 0; l < d; ++l) v += B[r * d + l] * E[l * d + c];
          be[r * d + c] = v;
        }
    }
    // Dual residual and the reduced Newton matrix
    //   H = tr(B E_a B E_b) + sum_i (lambda_i / sigma_i) phi_i phi_i^T.
    double rd_norm = 0.0, scale = 0.0;
    for (int a = 0; a < n; ++a) {
      double tr = 0.0;
      for (int r = 0; r < d; ++r) tr += BE[a * d * d + r * d + r];
      double v = -tr;
      for (std::size_t i = 0; i < k; ++i) v += lam[i] * phi[i * n + a];
      rd[a] = v;
      rd_norm = std::max(rd_norm, std::abs(v));
      scale = std::max(scale, std::abs(tr));
      for (int b = 0; b <= a; ++b) {
        double t = 0.0;
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c) t += BE[a * d * d + r * d + c] * BE[b * d * d + c * d + r];
        hess[a * n + b] = t;
      }
    }
    for (std::size_t i = 0; i < k; ++i) {
      const double w = lam[i] / sig[i];
      const double* ph = &phi[i * n];
      for (int a = 0; a < n; ++a)
        for (int b = 0; b <= a; ++b) hess[a * n + b] += w * ph[a] * ph[b];
    }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < a; ++b) hess[b * n + a] = hess[a * n + b];
    double gap = 0.0;
    for (std::size_t i = 0; i < k; ++i) gap += lam[i] * sig[i];
    if (gap <= gap_tol && rd_norm <= 1e-10 * std::max(1.0, scale)) break;

    // Predictor (mu = 0), then the corrector with Mehrotra's centering.
    direction(0.0);
    const double a_aff = max_step();
    double gap_aff = 0.0;
    for (std::size_t i = 0; i < k; ++i) gap_aff += (lam[i] + a_aff * dlam[i]) * (sig[i] + a_aff * dsig[i]);
    const double ratio = gap_aff / gap;
    direction(ratio * ratio * ratio * gap / static_cast<double>(k));
    double alpha = std::min(1.0, 0.99 * max_step());
    // A must stay positive definite as well.
    bool ok = false;
    for (int ls = 0; ls < 40 && !ok; ++ls) {
      for (int a = 0; a < n; ++a) xt[a] = x[a] + alpha * dx[a];
      double m[kMaxDim * kMaxDim], logdet = 0.0;
      to_matrix(xt, m);
      ok = cholesky_logdet(m, d, logdet);
      if (!ok) alpha *= 0.5;
    }
    if (!ok) break;
    x = xt;
    for (std::size_t i = 0; i < k; ++i) lam[i] += alpha * dlam[i];
    // Recompute the slacks from x so primal feasibility is exact.
    slacks(x, sig);
    bool inside = true;
    for (std::size_t i = 0; i < k; ++i) inside = inside && sig[i] > 0.0;
    if (!inside) break;
  }
  to_matrix(x, A.data());
  return A;
}

// M = A^{-1/2}: the polar of {g^T A g <= 1} is {e^T A^{-1} e <= 1}.
Matrix polar_root(const std::vector<double>& a, int d) {
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = 0.5 * (a[i * d + j] + a[j * d + i]);
  return hermitian_power(HermitianPD(m, 0.0), -0.5).matrix();
}

}  // namespace

void measure_residual(const LpBody& body, const Matrix& m, std::span<const double> dirs, double& lower,
                      double& upper) {
  const int d = body.dim();
  const double sd = std::sqrt(static_cast<double>(d));
  lower = 0.0;
  upper = 0.0;
  const std::size_t count = dirs.size() / d;
  for (std::size_t k = 0; k < count; ++k) {
    const double* e = &dirs[k * d];
    const double r = body.rho(e);
    const auto me = m * std::span<const double>(e, d);
    const double n = euclidean_norm(me);
    lower = std::max(lower, r / n);
    upper = std::max(upper, n / (sd * r));
  }
}

void certify(const LpBody& body, ReducingOp& op, int random_directions, std::uint64_t seed) {
  const int d = body.dim();
  auto dirs = certification_net(d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  for (int k = 0; k < random_directions; ++k) {
    std::vector<double> v(d);
    for (double& x : v) x = n01(rng);
    const double n = euclidean_norm(v);
    for (double x : v) dirs.push_back(x / n);
  }
  measure_residual(body, op.matrix, dirs, op.residual_lower, op.residual_upper);
  op.certified = true;
}

Matrix john_matrix(const LpBody& body, const JohnOptions& opt, int& rounds, bool& converged) {
  const int d = body.dim();
  rounds = 0;
  converged = true;
  if (d == 1) {
    const double one = 1.0;
    return Matrix{{body.rho(&one)}};
  }
  // One cell: rho(e) = |S^{1/2} e| exactly.
  if (body.size() == 1) return body.single_root();
  const int k0 = optimizer_net_size(d);
  const auto& net = cached_net(d, k0);
  const auto& coarse_scan = cached_net(d, scan_net_size(d));
  const auto& fine_scan = cached_net(d, fine_scan_size(d));
  const std::vector<double>* scan = &coarse_scan;
  // Gradient points g(e) on the boundary of the polar body, with the
  // directions e and the values rho(e) that produced them.
  std::vector<double> pts, dirs, rhos;
  pts.reserve(static_cast<std::size_t>(k0 + 64) * d);
  std::vector<double> g(d);
  for (int k = 0; k < k0; ++k) {
    const double* e = &net[static_cast<std::size_t>(k) * d];
    const double r = body.rho_grad(e, g.data());
    pts.insert(pts.end(), g.begin(), g.end());
    dirs.insert(dirs.end(), e, e + d);
    rhos.push_back(r);
  }
  Matrix m, best_m;
  double h_max = 1.0, best_h = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<double> e(d), v(d);
  for (rounds = 1; rounds <= opt.max_rounds; ++rounds) {
    m = polar_root(mvee(pts, d, opt.mvee_tol), d);
    Matrix minv(d, d);
    invert(m.data().data(), minv.data().data(), d);

    // Coarse scans drive the rounds; convergence is confirmed on a fine
    // scan, which stays on from then on.
    std::vector<double> cut_e, cut_g, cut_h, buf(d);
    const double* mp = m.data().data();
    const double* mi = minv.data().data();
    for (;;) {
      // Overshoot h = rho(M^{-1} u) over unit u: free on the stored
      // directions, plus a scan net that is uniform for the current ellipsoid.
      // The largest values (ranked by h^p) seed the ascent of h over the
      // ellipsoid boundary.
      std::vector<std::pair<double, std::size_t>> hs;
      std::vector<double> us;
      for (std::size_t k = 0; k < rhos.size(); ++k) {
        kernel::matvec(mp, &dirs[k * d], buf.data(), d);
        const double n = euclidean_norm(buf);
        hs.emplace_back(std::pow(rhos[k] / n, body.p()), hs.size());
        for (double x : buf) us.push_back(x / n);
      }
      for (std::size_t k = 0; k < scan->size() / d; ++k) {
        kernel::matvec(mi, &(*scan)[k * d], buf.data(), d);
        hs.emplace_back(body.rho_p(buf.data()), hs.size());
        us.insert(us.end(), &(*scan)[k * d], &(*scan)[k * d] + d);
      }
      const std::size_t seeds = std::min<std::size_t>(hs.size(), 2 * static_cast<std::size_t>(d));
      std::partial_sort(hs.begin(), hs.begin() + seeds, hs.end(), std::greater<>());
      h_max = 0.0;
      // Each seed's ascent maximum becomes a cut when it overshoots.
      cut_e.clear();
      cut_g.clear();
      cut_h.clear();
      std::vector<double> top_e(d), top_g(d);
      for (std::size_t s = 0; s < seeds; ++s) {
        // Start from u = M e / |M e|; iterate u <- M^{-1} g(M^{-1} u), normalized.
        std::copy(&us[hs[s].second * d], &us[hs[s].second * d] + d, v.begin());
        double n = 0.0;
        double h_prev = 0.0, h = 0.0, top = 0.0;
        for (int it = 0; it < 60; ++it) {
          kernel::matvec(mi, v.data(), e.data(), d);
          h = body.rho_grad(e.data(), g.data());
          if (h > top) {
            top = h;
            top_e = e;
            top_g = g;
          }
          if (it > 0 && h - h_prev <= 1e-3 * opt.cut_tol * h) break;
          h_prev = h;
          kernel::matvec(mi, g.data(), buf.data(), d);
          n = euclidean_norm(buf);
          for (int i = 0; i < d; ++i) v[i] = buf[i] / n;
        }
        h_max = std::max(h_max, top);
        if (top <= 1.0 + opt.cut_tol) continue;
        const double en = euclidean_norm(top_e);
        for (double& x : top_e) x /= en;
        bool dup = false;
        for (std::size_t c = 0; c < cut_h.size() && !dup; ++c) {
          double dot = 0.0;
          for (int i = 0; i < d; ++i) dot += cut_e[c * d + i] * top_e[i];
          dup = std::abs(dot) > 1.0 - 1e-10;
        }
        if (dup) continue;
        cut_e.insert(cut_e.end(), top_e.begin(), top_e.end());
        cut_g.insert(cut_g.end(), top_g.begin(), top_g.end());
        cut_h.push_back(top / en);
      }
      if (h_max <= 1.0 + opt.cut_tol && scan != &fine_scan) {
        scan = &fine_scan;
        // Earlier estimates came from the coarse scan only.
        best_h = std::numeric_limits<double>::infinity();
        stale = 0;
        continue;
      }
      break;
    }
    if (h_max < best_h) {
      stale = h_max < best_h * (1.0 - 0.1 * opt.cut_tol) ? 0 : stale + 1;
      best_h = h_max;
      best_m = m;
    } else {
      ++stale;
    }
    if (h_max <= 1.0 + opt.cut_tol) break;
    // Cuts no longer help once the design solver itself has stalled.
    if (stale >= 4) break;
    // Add the cuts: the polar points g(e*) lie outside the current ellipsoid.
    pts.insert(pts.end(), cut_g.begin(), cut_g.end());
    dirs.insert(dirs.end(), cut_e.begin(), cut_e.end());
    rhos.insert(rhos.end(), cut_h.begin(), cut_h.end());
  }
  rounds = std::min(rounds, opt.max_rounds);
  converged = best_h <= 1.0 + opt.accept_tol;
  if (best_h > 1.0) best_m *= best_h;
  return best_m;
}

namespace {

std::vector<double> powers(const WeightField& w, double s) {
  const auto f = field_power(w, s);
  return {f.data().begin(), f.data().end()};
}

Matrix average(const std::vector<double>& field, std::span<const std::uint32_t> region, int d) {
  if (region.empty()) throw EmptyRegion("average over an empty region");
  const std::size_t st = static_cast<std::size_t>(d) * d;
  Matrix m(d, d);
  auto data = m.data();
  for (auto c : region)
    for (std::size_t k = 0; k < st; ++k) data[k] += field[c * st + k];
  m *= 1.0 / static_cast<double>(region.size());
  return m;
}

void finish(ReducingOp& op, const LpBody& body, const JohnOptions& opt) {
  if (opt.certify) {
    certify(body, op, opt.random_directions, opt.seed);
  } else if (opt.measure) {
    const auto& dirs = cached_net(body.dim(), body.dim() == 1 ? 1 : 64);
    measure_residual(body, op.matrix, dirs, op.residual_lower, op.residual_upper);
  }
}

}  // namespace

Reducer::Reducer(const WeightField& w, double p, ReducingMode mode, JohnOptions opt)
    : d_(w.dim()), p_(p), mode_(mode), opt_(opt) {
  if (w.kind() != FieldKind::weight) throw ShapeMismatch("reducing operators need a weight field");
  if (!(p > 1.0) || !std::isfinite(p)) throw WrongExponent("need 1 < p < inf");
  if (mode == ReducingMode::exact_p2 && p != 2.0) throw WrongExponent("exact_p2 mode requires p = 2");
  s_ = p == 2.0 ? std::vector<double>(w.data().begin(), w.data().end()) : powers(w, 2.0 / p);
  if (mode == ReducingMode::exact_p2) base_ = s_;
  if (mode == ReducingMode::proxy) base_ = powers(w, 1.0 / p);
}

double Reducer::rho(std::span<const std::uint32_t> region, const double* e) const {
  return LpBody(s_.data(), d_, region, p_).rho(e);
}

ReducingOp Reducer::operator()(std::span<const std::uint32_t> region) const {
  const LpBody body(s_.data(), d_, region, p_);
  ReducingOp op;
  op.mode = mode_;
  op.p = p_;
  switch (mode_) {
    case ReducingMode::exact_p2:
      op.matrix = hermitian_power(HermitianPD(average(base_, region, d_), 0.0), 0.5).matrix();
      break;
    case ReducingMode::proxy:
      op.matrix = average(base_, region, d_);
      break;
    case ReducingMode::john: {
      bool conv = true;
      op.matrix = john_matrix(body, opt_, op.rounds, conv);
      op.converged = conv;
      break;
    }
  }
  finish(op, body, opt_);
  return op;
}

double rho(const WeightField& w, std::span<const std::uint32_t> region, double p, std::span<const double> e) {
  if (static_cast<int>(e.size()) != w.dim()) throw ShapeMismatch("direction has the wrong dimension");
  if (euclidean_norm(e) == 0.0) throw ShapeMismatch("direction must be nonzero");
  const auto s = p == 2.0 ? std::vector<double>(w.data().begin(), w.data().end()) : powers(w, 2.0 / p);
  return LpBody(s.data(), w.dim(), region, p).rho(e.data());
}

ReducingOp reducing_exact_p2(const WeightField& w, std::span<const std::uint32_t> region) {
  return Reducer(w, 2.0, ReducingMode::exact_p2)(region);
}

ReducingOp reducing_proxy(const WeightField& w, std::span<const std::uint32_t> region, double p) {
  return Reducer(w, p, ReducingMode::proxy)(region);
}

ReducingOp reducing_john(const WeightField& w, std::span<const std::uint32_t> region, double p,
                         const JohnOptions& opt) {
  return Reducer(w, p, ReducingMode::john, opt)(region);
}

ReducingOp reducing(const WeightField& w, std::span<const std::uint32_t> region, double p, ReducingMode mode,
                    const JohnOptions& opt) {
  return Reducer(w, p, mode, opt)(region);
}

ReducingOp iterated_reducing(const WeightField& w, const Rectangle& r, double p, ReducingMode mode,
                             const JohnOptions& opt) {
  const GridSpec& g = w.grid();
  check_rectangle(r, g);
  if (g.m == 0) throw IndexOutOfRange("iterated reducing operators need a biparameter grid");
  const int d = w.dim();
  const std::size_t st = static_cast<std::size_t>(d) * d;
  const auto all = cells(r, g);
  // cells() is row-major in R's own coordinates, so each run of |R2| cells
  // shares its first-factor coordinate.
  std::size_t n2 = 1;
  for (int a = g.n; a < g.axes(); ++a) n2 *= static_cast<std::size_t>(r.axes[a].len);
  const std::size_t n1 = all.size() / n2;

  JohnOptions inner = opt;
  inner.certify = false;
  inner.measure = false;
  const Reducer red(w, p, mode, inner);
  // Field over the first factor, x1 -> W_F(x1) = (W_{x1,F})^p, stored as a
  // "weight" on n1 pseudo-cells.
  std::vector<double> wf(n1 * st);
  for (std::size_t i = 0; i < n1; ++i) {
    const auto op = red(std::span<const std::uint32_t>(all.data() + i * n2, n2));
    const auto pw = hermitian_power(HermitianPD(op.matrix, 0.0), p).matrix();
    std::copy(pw.data().begin(), pw.data().end(), wf.begin() + i * st);
  }
  GridSpec pseudo{1, 0, 0};
  // Reduce over the n1 pseudo-cells directly on raw arrays.
  std::vector<std::uint32_t> idx(n1);
  for (std::size_t i = 0; i < n1; ++i) idx[i] = static_cast<std::uint32_t>(i);
  std::vector<double> s(n1 * st);
  for (std::size_t i = 0; i < n1; ++i) {
    const Matrix mi = Matrix::from_data(d, d, std::span<const double>(wf.data() + i * st, st));
    const auto si = p == 2.0 ? mi : hermitian_power(HermitianPD(mi, 0.0), 2.0 / p).matrix();
    std::copy(si.data().begin(), si.data().end(), s.begin() + i * st);
  }
  const LpBody body(s.data(), d, idx, p);
  ReducingOp op;
  op.mode = mode;
  op.p = p;
  op.region = describe(r) + " (iterated)";
  switch (mode) {
    case ReducingMode::exact_p2: {
      if (p != 2.0) throw WrongExponent("exact_p2 mode requires p = 2");
      op.matrix = hermitian_power(HermitianPD(average(wf, idx, d), 0.0), 0.5).matrix();
      break;
    }
    case ReducingMode::proxy: {
      std::vector<double> root(n1 * st);
      for (std::size_t i = 0; i < n1; ++i) {
        const Matrix mi = Matrix::from_data(d, d, std::span<const double>(wf.data() + i * st, st));
        const auto ri = hermitian_power(HermitianPD(mi, 0.0), 1.0 / p).matrix();
        std::copy(ri.data().begin(), ri.data().end(), root.begin() + i * st);
      }
      op.matrix = average(root, idx, d);
      break;
    }
    case ReducingMode::john: {
      bool conv = true;
      op.matrix = john_matrix(body, opt, op.rounds, conv);
      op.converged = conv;
      break;
    }
  }
  (void)pseudo;
  finish(op, body, opt);
  return op;
}

double max_ratio(const Matrix& a, const Matrix& b, std::span<const double> dirs) {
  const int d = a.cols();
  double best = 0.0;
  for (std::size_t k = 0; k < dirs.size() / d; ++k) {
    const std::span<const double> e(&dirs[k * d], d);
    best = std::max(best, euclidean_norm(a * e) / euclidean_norm(b * e));
  }
  return best;
}

InversePrimeReport compare_inverse_prime(const WeightField& w, std::span<const std::uint32_t> region, double p,
                                         ReducingMode mode, const JohnOptions& opt) {
  const double pp = p / (p - 1.0);
  const auto wd = dual_weight(w, p);
  JohnOptions o = opt;
  o.measure = false;
  const auto wr = reducing(w, region, p, mode, o);
  const auto wpr = reducing(wd, region, pp, mode == ReducingMode::exact_p2 ? ReducingMode::exact_p2 : mode, o);
  const Matrix winv = hermitian_power(HermitianPD(wr.matrix, 0.0), -1.0).matrix();

  InversePrimeReport rep;
  const auto pw = field_power(w, 1.0 / p);
  const auto nw = field_power(w, -1.0 / p);
  PairSums sums;
  pair_sums({pw.data().data(), nw.data().data(), nullptr, nullptr, w.dim()}, region, pp, 0.0, sums);
  rep.c_e = outer_average(sums.row, p / pp, 1.0);

  const auto dirs = direction_net(w.dim(), w.dim() == 1 ? 1 : certification_net_size(w.dim()));
  rep.slack_left = max_ratio(winv, wpr.matrix, dirs);
  rep.slack_right = max_ratio(wpr.matrix, winv, dirs) / std::pow(rep.c_e, 1.0 / p);
  return rep;
}

}  // namespace bmolab
