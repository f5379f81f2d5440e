#include "bmolab/commutator.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

#include "bmolab/ap.hpp"
#include "bmolab/bmo.hpp"
#include "bmolab/error.hpp"
#include "bmolab/parallel.hpp"

namespace bmolab {

namespace {

// --- FFT plans and multiplier tables --------------------------------------

struct FftPlan {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  std::size_t cells = 0;     // real samples per component
  std::size_t spectrum = 0;  // complex samples per component (last axis halved)
};

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// One r2c/c2r plan pair per (axes, level, d); d components interleaved.
const FftPlan& plan_for(const GridSpec& g, int d) {
  static std::map<std::tuple<int, int, int>, FftPlan> cache;
  std::lock_guard<std::mutex> lock(fftw_mutex());
  const auto key = std::make_tuple(g.axes(), g.level, d);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const int axes = g.axes(), n = g.cells_per_axis();
  std::vector<int> dims(axes, n);
  FftPlan p;
  p.cells = g.cell_count();
  p.spectrum = p.cells / n * (n / 2 + 1);
  double* real = fftw_alloc_real(p.cells * d);
  fftw_complex* spec = fftw_alloc_complex(p.spectrum * d);
  p.forward = fftw_plan_many_dft_r2c(axes, dims.data(), d, real, nullptr, d, 1, spec, nullptr, d, 1, FFTW_ESTIMATE);
  p.inverse = fftw_plan_many_dft_c2r(axes, dims.data(), d, spec, nullptr, d, 1, real, nullptr, d, 1, FFTW_ESTIMATE);
  fftw_free(real);
  fftw_free(spec);
  return cache.emplace(key, p).first->second;
}

// Signed frequency of index k on an axis of n cells; the Nyquist index maps
// to -n/2.
int frequency(int k, int n) { return k < n / 2 ? k : k - n; }

// s(xi) = xi_j / |xi_F| over the half spectrum, for the Riesz multiplier
// -i s in factor F.
const std::vector<double>& riesz_table(const GridSpec& g, int factor, int j) {
  static std::map<std::tuple<int, int, int, int, int>, std::vector<double>> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  const auto key = std::make_tuple(g.n, g.m, g.level, factor, j);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const int axes = g.axes(), n = g.cells_per_axis(), half = n / 2 + 1;
  const int off = g.factor_offset(factor), cnt = g.factor_axes(factor);
  const std::size_t size = g.cell_count() / n * half;
  std::vector<double> s(size, 0.0);
  std::vector<int> idx(axes, 0);
  for (std::size_t pos = 0; pos < size; ++pos) {
    std::size_t r = pos;
    idx[axes - 1] = static_cast<int>(r % half);
    r /= half;
    for (int a = axes - 2; a >= 0; --a) {
      idx[a] = static_cast<int>(r % n);
      r /= n;
    }
    double norm2 = 0.0;
    for (int a = off; a < off + cnt; ++a) {
      const double f = frequency(idx[a], n);
      norm2 += f * f;
    }
    const int kj = idx[off + j];
    if (norm2 == 0.0 || kj == n / 2) continue;
    s[pos] = frequency(kj, n) / std::sqrt(norm2);
  }
  return cache.emplace(key, std::move(s)).first->second;
}

// Applies the multiplier c * t1 (* t2) with c in {-i, -1, 1, i}, encoded as
// c = (re, im).
VectorField apply_multiplier(const VectorField& f, const std::vector<const std::vector<double>*>& tables, double cre,
                             double cim) {
  const FftPlan& plan = plan_for(f.grid, f.d);
  const int d = f.d;
  double* real = fftw_alloc_real(plan.cells * d);
  fftw_complex* spec = fftw_alloc_complex(plan.spectrum * d);
  std::copy(f.data.begin(), f.data.end(), real);
  fftw_execute_dft_r2c(plan.forward, real, spec);
  const double scale = 1.0 / static_cast<double>(plan.cells);
  for (std::size_t pos = 0; pos < plan.spectrum; ++pos) {
    double s = scale;
    for (auto* t : tables) s *= (*t)[pos];
    const double mr = cre * s, mi = cim * s;
    for (int c = 0; c < d; ++c) {
      fftw_complex& z = spec[pos * d + c];
      const double a = z[0], b = z[1];
      z[0] = mr * a - mi * b;
      z[1] = mr * b + mi * a;
    }
  }
  fftw_execute_dft_c2r(plan.inverse, spec, real);
  VectorField out(f.grid, d);
  std::copy(real, real + plan.cells * d, out.data.begin());
  fftw_free(real);
  fftw_free(spec);
  return out;
}

void check_factor_axis(const GridSpec& g, int factor, int j) {
  if (factor != 1 && factor != 2) throw IndexOutOfRange("factor must be 1 or 2");
  if (j < 0 || j >= g.factor_axes(factor)) throw IndexOutOfRange("Riesz direction outside the factor");
}

// Cellwise y = A(x) f(x) for a matrix field stored as raw data.
VectorField cellwise(const std::vector<double>& a, const VectorField& f, bool transpose_a = false) {
  const int d = f.d;
  const std::size_t st = static_cast<std::size_t>(d) * d;
  VectorField out(f.grid, d);
  for (std::size_t c = 0; c < f.cells(); ++c) {
    const double* m = a.data() + c * st;
    const double* x = f.cell(c);
    double* y = out.cell(c);
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) s += (transpose_a ? m[k * d + i] : m[i * d + k]) * x[k];
      y[i] = s;
    }
  }
  return out;
}

void axpy(double a, const VectorField& x, VectorField& y) {
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += a * x.data[i];
}

void scale_in_place(VectorField& f, double s) {
  for (double& v : f.data) v *= s;
}

// J_q(y)(x) = |y(x)|^{q-2} y(x), the gradient of ||y||_q^q / q.
VectorField duality_map(const VectorField& y, double q) {
  VectorField out(y.grid, y.d);
  for (std::size_t c = 0; c < y.cells(); ++c) {
    double n2 = 0.0;
    for (int i = 0; i < y.d; ++i) n2 += y.cell(c)[i] * y.cell(c)[i];
    const double w = n2 > 0.0 ? std::pow(n2, 0.5 * (q - 2.0)) : 0.0;
    for (int i = 0; i < y.d; ++i) out.cell(c)[i] = w * y.cell(c)[i];
  }
  return out;
}

void check_field(const VectorField& f, const WeightField& w) {
  if (!(f.grid == w.grid()) || f.d != w.dim()) throw ShapeMismatch("vector field does not match the matrix field");
}

// --- Operators ------------------------------------------------------------

class IdentityOp final : public Operator {
 public:
  VectorField apply(const VectorField& f) const override { return f; }
  VectorField adjoint(const VectorField& g) const override { return g; }
  std::string name() const override { return "identity"; }
};

class RieszOp final : public Operator {
 public:
  RieszOp(int factor, int j) : factor_(factor), j_(j) {}
  VectorField apply(const VectorField& f) const override { return riesz_apply(f, factor_, j_); }
  VectorField adjoint(const VectorField& g) const override {
    auto out = riesz_apply(g, factor_, j_);
    scale_in_place(out, -1.0);
    return out;
  }
  std::string name() const override { return "R" + std::to_string(factor_) + "_" + std::to_string(j_); }

 private:
  int factor_, j_;
};

class TensorRieszOp final : public Operator {
 public:
  TensorRieszOp(int j, int k) : j_(j), k_(k) {}
  VectorField apply(const VectorField& f) const override { return tensor_riesz_apply(f, j_, k_); }
  // (-i s1)(-i s2) = -s1 s2 is real, so the operator is self-adjoint.
  VectorField adjoint(const VectorField& g) const override { return tensor_riesz_apply(g, j_, k_); }
  std::string name() const override { return "R1_" + std::to_string(j_) + " R2_" + std::to_string(k_); }

 private:
  int j_, k_;
};

class CommutatorOp final : public Operator {
 public:
  CommutatorOp(const WeightField& b, OperatorPtr t)
      : grid_(b.grid()), d_(b.dim()), b_(b.data().begin(), b.data().end()), t_(std::move(t)) {
    if (b.kind() != FieldKind::symbol) throw ShapeMismatch("commutators need a symbol field");
  }
  VectorField apply(const VectorField& f) const override {
    check(f);
    auto out = t_->apply(cellwise(b_, f));
    axpy(-1.0, cellwise(b_, t_->apply(f)), out);
    return out;
  }
  VectorField adjoint(const VectorField& g) const override {
    check(g);
    auto out = cellwise(b_, t_->adjoint(g), true);
    axpy(-1.0, t_->adjoint(cellwise(b_, g, true)), out);
    return out;
  }
  std::string name() const override { return "[" + t_->name() + ", B]"; }

 private:
  void check(const VectorField& f) const {
    if (!(f.grid == grid_) || f.d != d_) throw ShapeMismatch("vector field does not match the symbol");
  }
  GridSpec grid_;
  int d_;
  std::vector<double> b_;
  OperatorPtr t_;
};

class AveragingOp final : public Operator {
 public:
  explicit AveragingOp(const Rectangle& r) : r_(r) {}
  VectorField apply(const VectorField& f) const override {
    check_rectangle(r_, f.grid);
    const auto rc = cells(r_, f.grid);
    std::vector<double> mean(f.d, 0.0);
    for (auto c : rc)
      for (int i = 0; i < f.d; ++i) mean[i] += f.cell(c)[i];
    for (double& v : mean) v /= static_cast<double>(rc.size());
    VectorField out(f.grid, f.d);
    for (auto c : rc) std::copy(mean.begin(), mean.end(), out.cell(c));
    return out;
  }
  VectorField adjoint(const VectorField& g) const override { return apply(g); }
  std::string name() const override { return "A_" + describe(r_); }

 private:
  Rectangle r_;
};

std::vector<double> power_data(const WeightField& w, double s) {
  const auto f = field_power(w, s);
  return {f.data().begin(), f.data().end()};
}

}  // namespace

// --- Vector fields --------------------------------------------------------

VectorField::VectorField(const GridSpec& g, int dim) : grid(g), d(dim), data(g.cell_count() * dim, 0.0) {}

VectorField VectorField::random(const GridSpec& g, int dim, std::uint64_t seed) {
  VectorField f(g, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (double& v : f.data) v = nd(rng);
  return f;
}

void to_json(nlohmann::json& j, const VectorField& f) { j = {{"grid", f.grid}, {"d", f.d}, {"data", f.data}}; }

double inner(const VectorField& f, const VectorField& g) {
  if (f.data.size() != g.data.size()) throw ShapeMismatch("inner product of mismatched fields");
  double s = 0.0;
  for (std::size_t i = 0; i < f.data.size(); ++i) s += f.data[i] * g.data[i];
  return s / static_cast<double>(f.cells());
}

double lp_norm(const VectorField& f, double p) {
  double s = 0.0;
  for (std::size_t c = 0; c < f.cells(); ++c) {
    double n2 = 0.0;
    for (int i = 0; i < f.d; ++i) n2 += f.cell(c)[i] * f.cell(c)[i];
    s += std::pow(n2, 0.5 * p);
  }
  return std::pow(s / static_cast<double>(f.cells()), 1.0 / p);
}

// --- Multipliers ------------------------------------------------------------

VectorField riesz_apply(const VectorField& f, int factor, int j) {
  check_factor_axis(f.grid, factor, j);
  return apply_multiplier(f, {&riesz_table(f.grid, factor, j)}, 0.0, -1.0);
}

VectorField tensor_riesz_apply(const VectorField& f, int j, int k) {
  check_factor_axis(f.grid, 1, j);
  check_factor_axis(f.grid, 2, k);
  return apply_multiplier(f, {&riesz_table(f.grid, 1, j), &riesz_table(f.grid, 2, k)}, -1.0, 0.0);
}

VectorField commutator_apply(const WeightField& b, int j, int k, const VectorField& f) {
  check_field(f, b);
  return CommutatorOp(b, tensor_riesz_operator(j, k)).apply(f);
}

OperatorPtr identity_operator() { return std::make_shared<IdentityOp>(); }
OperatorPtr riesz_operator(int factor, int j) { return std::make_shared<RieszOp>(factor, j); }
OperatorPtr tensor_riesz_operator(int j, int k) { return std::make_shared<TensorRieszOp>(j, k); }
OperatorPtr commutator_operator(const WeightField& b, OperatorPtr t) {
  return std::make_shared<CommutatorOp>(b, std::move(t));
}
OperatorPtr averaging_operator(const Rectangle& r) { return std::make_shared<AveragingOp>(r); }

// --- Operator norms ---------------------------------------------------------

std::string to_string(OpNormMethod m) {
  return m == OpNormMethod::exact_p2_power_iter ? "exact_p2_power_iter" : "lower_search";
}

void to_json(nlohmann::json& j, const OpNormEstimate& e) {
  j = {{"value", e.value},         {"method", to_string(e.method)}, {"iterations", e.iterations},
       {"residual", e.residual},   {"p", e.p},                      {"converged", e.converged}};
  if (!e.witness.data.empty()) j["witness"] = e.witness;
}

OpNormEstimate weighted_opnorm(const Operator& t, const WeightField& u, const WeightField& v, double p,
                               const OpNormOptions& opt) {
  if (u.kind() != FieldKind::weight || v.kind() != FieldKind::weight)
    throw ShapeMismatch("operator norms need weight fields");
  if (!(u.grid() == v.grid()) || u.dim() != v.dim()) throw ShapeMismatch("U and V must share grid and size");
  if (!(p > 1.0) || !std::isfinite(p)) throw WrongExponent("need 1 < p < inf");
  const GridSpec& g = u.grid();
  const int d = u.dim();
  // M = V^{1/p} T U^{-1/p} acts on the unweighted variable h = U^{1/p} f.
  const auto u_neg = power_data(u, -1.0 / p);
  const auto v_pos = power_data(v, 1.0 / p);
  const auto m_apply = [&](const VectorField& h) { return cellwise(v_pos, t.apply(cellwise(u_neg, h))); };
  const auto m_adjoint = [&](const VectorField& y) { return cellwise(u_neg, t.adjoint(cellwise(v_pos, y))); };

  OpNormEstimate est;
  est.p = p;
  auto start = [&](int s) {
    if (s == 0 && opt.warm_start && opt.warm_start->grid == g && opt.warm_start->d == d)
      return cellwise(power_data(u, 1.0 / p), *opt.warm_start);
    return VectorField::random(g, d, opt.seed + static_cast<std::uint64_t>(s));
  };

  if (p == 2.0) {
    est.method = OpNormMethod::exact_p2_power_iter;
    auto h = start(0);
    scale_in_place(h, 1.0 / std::sqrt(inner(h, h)));
    double prev = 0.0;
    est.converged = false;
    for (int it = 1; it <= opt.max_iter; ++it) {
      auto z = m_adjoint(m_apply(h));
      const double lambda = std::max(inner(h, z), 0.0);
      const double value = std::sqrt(lambda);
      const double zn = std::sqrt(inner(z, z));
      est.iterations = it;
      est.residual = value > 0.0 ? std::abs(value - prev) / value : 0.0;
      est.value = value;
      if (zn == 0.0) {
        est.converged = true;
        break;
      }
      scale_in_place(z, 1.0 / zn);
      h = std::move(z);
      if (it > 1 && est.residual <= opt.tol) {
        est.converged = true;
        break;
      }
      prev = value;
    }
    // Report the ratio the final witness attains.
    const double hn = std::sqrt(inner(h, h));
    const auto mh = m_apply(h);
    est.value = std::sqrt(inner(mh, mh)) / hn;
    est.witness = cellwise(u_neg, h);
    return est;
  }

  // Nonlinear power method: h <- J_p'(M* J_p(M h)), normalized in L^p. Each
  // step does not decrease ||M h||_p / ||h||_p, and every reported value is
  // the ratio attained by the stored witness.
  est.method = OpNormMethod::lower_search;
  const double pp = dual_exponent(p);
  const int starts = std::max(1, opt.starts) + (opt.warm_start ? 1 : 0);
  est.value = -1.0;
  for (int s = 0; s < starts; ++s) {
    auto h = start(s);
    scale_in_place(h, 1.0 / lp_norm(h, p));
    double value = lp_norm(m_apply(h), p), residual = 0.0;
    bool conv = false;
    int it = 0;
    while (it < opt.search_iter) {
      ++it;
      auto z = m_adjoint(duality_map(m_apply(h), p));
      auto next = duality_map(z, pp);
      const double nn = lp_norm(next, p);
      if (nn == 0.0) {
        conv = true;
        break;
      }
      scale_in_place(next, 1.0 / nn);
      const double nv = lp_norm(m_apply(next), p);
      residual = nv > 0.0 ? std::abs(nv - value) / nv : 0.0;
      if (nv >= value) {
        h = std::move(next);
        value = nv;
      }
      if (residual <= opt.tol) {
        conv = true;
        break;
      }
    }
    est.iterations += it;
    if (value > est.value) {
      est.value = value;
      est.residual = residual;
      est.converged = conv;
      est.witness = cellwise(u_neg, h);
    }
  }
  return est;
}

// --- Averaging operator ------------------------------------------------------

void to_json(nlohmann::json& j, const AveragingReport& r) {
  j = {{"lhs", r.lhs}, {"rhs", r.rhs}, {"ratio", r.ratio}, {"estimate", r.estimate}};
}

AveragingReport averaging_opnorm(const Rectangle& r, const WeightField& w, double p, ReducingMode mode,
                                 const JohnOptions& ropt, const OpNormOptions& opt) {
  check_rectangle(r, w.grid());
  const auto rc = cells(r, w.grid());
  const auto red = Reducer(w, p, mode, ropt)(rc);
  const auto dual = Reducer(dual_weight(w, p), dual_exponent(p), mode, ropt)(rc);
  AveragingReport out;
  out.lhs = op_norm(dual.matrix * red.matrix);
  out.estimate = weighted_opnorm(AveragingOp(r), w, w, p, opt);
  out.rhs = out.estimate.value;
  out.ratio = out.lhs / out.rhs;
  return out;
}

// --- Tensorization ----------------------------------------------------------

WeightField tensorize_phi(const WeightField& b, const WeightField& u, const WeightField& v, double p) {
  if (b.kind() != FieldKind::symbol || u.kind() != FieldKind::weight || v.kind() != FieldKind::weight)
    throw ShapeMismatch("tensorize_phi needs a symbol and two weights");
  if (!(b.grid() == u.grid()) || !(b.grid() == v.grid()) || b.dim() != u.dim() || b.dim() != v.dim())
    throw ShapeMismatch("B, U, V must share grid and size");
  if (!(p > 1.0) || !std::isfinite(p)) throw WrongExponent("need 1 < p < inf");
  const int d = b.dim(), dd = 2 * d;
  const auto vp = power_data(v, 1.0 / p), up = power_data(u, 1.0 / p);
  const std::size_t st = static_cast<std::size_t>(d) * d, st2 = static_cast<std::size_t>(dd) * dd;
  std::vector<double> out(b.cell_count() * st2);
  parallel_for(b.cell_count(), [&](std::size_t c) {
    Matrix phi(dd, dd);
    const double* vc = vp.data() + c * st;
    const double* uc = up.data() + c * st;
    const double* bc = b.cell(c);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        phi(i, j) = vc[i * d + j];
        double s = 0.0;
        for (int k = 0; k < d; ++k) s += vc[i * d + k] * bc[k * d + j];
        phi(i, d + j) = s;
        phi(d + i, d + j) = uc[i * d + j];
      }
    Matrix gram = phi.transpose() * phi;
    for (int i = 0; i < dd; ++i)
      for (int j = 0; j < i; ++j) gram(i, j) = gram(j, i) = 0.5 * (gram(i, j) + gram(j, i));
    const auto w = hermitian_power(HermitianPD(gram, 0.0), 0.5 * p).matrix();
    std::copy(w.data().begin(), w.data().end(), out.begin() + c * st2);
  });
  return WeightField::weight(b.grid(), dd, std::move(out),
                             {{"type", "tensorized"}, {"p", p}, {"from", b.manifest().generator}});
}

void to_json(nlohmann::json& j, const TensorTable& t) {
  j = {{"min_ratio", t.min_ratio}, {"max_ratio", t.max_ratio}, {"rectangles", t.rectangles}};
  if (!t.rows.empty()) {
    auto rows = nlohmann::json::array();
    for (const auto& r : t.rows)
      rows.push_back({{"rect", r.rect},
                      {"ap_w", r.ap_w},
                      {"ap_u", r.ap_u},
                      {"ap_v", r.ap_v},
                      {"bmo1_p", r.bmo1_p},
                      {"ratio", r.ratio}});
    j["rows"] = rows;
  }
}

TensorTable tensorization_table(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                                const std::vector<Rectangle>& rects, bool keep_rows) {
  const ApEvaluator aw(tensorize_phi(b, u, v, p), p), au(u, p), av(v, p);
  const BmoLocal loc(b, u, v, p, ReducingMode::proxy);
  std::vector<TensorRow> rows(rects.size());
  parallel_for(rects.size(), [&](std::size_t i) {
    const auto rc = cells(rects[i], b.grid());
    TensorRow& r = rows[i];
    r.rect = rects[i];
    r.ap_w = aw.local(rc);
    r.ap_u = au.local(rc);
    r.ap_v = av.local(rc);
    r.bmo1_p = std::pow(loc.pointwise(rc).first, p);
    r.ratio = r.ap_w / (r.ap_u + r.ap_v + r.bmo1_p);
  });
  TensorTable t;
  t.rectangles = rects.size();
  if (!rows.empty()) {
    const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                              [](const TensorRow& a, const TensorRow& b) { return a.ratio < b.ratio; });
    t.min_ratio = lo->ratio;
    t.max_ratio = hi->ratio;
  }
  if (keep_rows) t.rows = std::move(rows);
  return t;
}

// --- Experiments ----------------------------------------------------------

CommutatorNorms commutator_norms(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                                 const OpNormOptions& opt) {
  const GridSpec& g = b.grid();
  if (g.n < 1 || g.m < 1) throw ShapeMismatch("tensor Riesz commutators need n, m >= 1");
  CommutatorNorms out;
  out.entries.resize(static_cast<std::size_t>(g.n) * g.m);
  parallel_for(out.entries.size(), [&](std::size_t i) {
    const int j = static_cast<int>(i) / g.m, k = static_cast<int>(i) % g.m;
    const CommutatorOp op(b, tensor_riesz_operator(j, k));
    out.entries[i] = weighted_opnorm(op, u, v, p, opt);
  });
  for (std::size_t i = 0; i < out.entries.size(); ++i)
    if (out.entries[i].value > out.max) {
      out.max = out.entries[i].value;
      out.argmax_j = static_cast<int>(i) / g.m;
      out.argmax_k = static_cast<int>(i) % g.m;
    }
  return out;
}

namespace {

nlohmann::json norms_json(const CommutatorNorms& n) {
  return {{"max", n.max}, {"argmax_j", n.argmax_j}, {"argmax_k", n.argmax_k}, {"entries", n.entries}};
}

}  // namespace

void to_json(nlohmann::json& j, const LowerBoundReport& r) {
  j = {{"bmo", r.bmo},
       {"commutator", r.commutator},
       {"degenerate", r.degenerate},
       {"lower_estimate", r.lower_estimate},
       {"bmo_argmax", r.bmo_argmax},
       {"norms", norms_json(r.norms)},
       {"tensor", r.tensor},
       {"p", r.p},
       {"family", r.family},
       {"mode", to_string(r.mode)}};
  j["ratio"] = r.degenerate ? nlohmann::json(nullptr) : nlohmann::json(r.ratio);
}

void to_json(nlohmann::json& j, const UpperBoundReport& r) {
  j = {{"commutator", r.commutator},
       {"bmo1", r.bmo1},
       {"degenerate", r.degenerate},
       {"lower_estimate", r.lower_estimate},
       {"bmo1_argmax", r.bmo1_argmax},
       {"norms", norms_json(r.norms)},
       {"p", r.p},
       {"family", r.family}};
  j["ratio"] = r.degenerate ? nlohmann::json(nullptr) : nlohmann::json(r.ratio);
}

LowerBoundReport lower_bound_experiment(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                                        const FamilySpec& fam, ReducingMode mode, const JohnOptions& ropt,
                                        const OpNormOptions& opt, TensorTableMode tensor) {
  LowerBoundReport r;
  r.p = p;
  r.family = fam.describe();
  r.mode = mode;
  const auto bmo = bmo_norm(b, u, v, p, fam, mode, ropt);
  r.bmo = bmo.value;
  r.bmo_argmax = bmo.argmax;
  r.norms = commutator_norms(b, u, v, p, opt);
  r.commutator = r.norms.max;
  r.lower_estimate = p != 2.0;
  r.degenerate = !(r.bmo > kDegenerateNorm && r.commutator > kDegenerateNorm);
  r.ratio = r.degenerate ? 0.0 : r.bmo / r.commutator;
  if (tensor != TensorTableMode::none)
    r.tensor = tensorization_table(b, u, v, p, rectangle_family(b.grid(), fam), tensor == TensorTableMode::rows);
  return r;
}

UpperBoundReport upper_bound_experiment(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                                        const FamilySpec& fam, const OpNormOptions& opt) {
  UpperBoundReport r;
  r.p = p;
  r.family = fam.describe();
  const auto b1 = bmo1_norm(b, u, v, p, fam);
  r.bmo1 = b1.value;
  r.bmo1_argmax = b1.argmax;
  r.norms = commutator_norms(b, u, v, p, opt);
  r.commutator = r.norms.max;
  r.lower_estimate = p != 2.0;
  r.degenerate = !(r.bmo1 > kDegenerateNorm && r.commutator > kDegenerateNorm);
  r.ratio = r.degenerate ? 0.0 : r.commutator / r.bmo1;
  return r;
}

}  // namespace bmolab
