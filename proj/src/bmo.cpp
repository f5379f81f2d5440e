#include "bmolab/bmo.hpp"

#include <algorithm>
#include <cmath>

#include "bmolab/ap.hpp"
#include "bmolab/error.hpp"
#include "bmolab/pairsum.hpp"
#include "bmolab/parallel.hpp"

namespace bmolab {

namespace {

void check_weights(const WeightField& u, const WeightField& v, double p, ReducingMode mode) {
  if (u.kind() != FieldKind::weight || v.kind() != FieldKind::weight)
    throw ShapeMismatch("bmo norms need weight fields U and V");
  if (!(u.grid() == v.grid()) || u.dim() != v.dim()) throw ShapeMismatch("U and V must share grid and size");
  if (!(p > 1.0) || !std::isfinite(p)) throw WrongExponent("need 1 < p < inf");
  if (mode == ReducingMode::exact_p2 && p != 2.0) throw ModeError("exact_p2 reducing operators need p = 2");
}

void check_inputs(const WeightField& b, const WeightField& u, const WeightField& v, double p, ReducingMode mode) {
  if (b.kind() != FieldKind::symbol) throw ShapeMismatch("bmo norms need a symbol field B");
  check_weights(u, v, p, mode);
  if (!(b.grid() == u.grid()) || b.dim() != u.dim()) throw ShapeMismatch("B, U, V must share grid and size");
}

std::vector<double> copy_data(const WeightField& w) { return {w.data().begin(), w.data().end()}; }

std::vector<double> cellwise_product(const std::vector<double>& a, const std::vector<double>& b, int d) {
  const std::size_t st = static_cast<std::size_t>(d) * d;
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); i += st) kernel::matmul(a.data() + i, b.data() + i, out.data() + i, d);
  return out;
}

Matrix inverse(const Matrix& m) { return hermitian_power(HermitianPD(m, 0.0), -1.0).matrix(); }

std::size_t first_max(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

NormValue norm_from(const std::vector<double>& vals, const std::vector<Rectangle>& rects) {
  NormValue out;
  out.rectangles = rects.size();
  if (rects.empty()) return out;
  const auto k = first_max(vals);
  out.value = vals[k];
  out.argmax = rects[k];
  return out;
}

// Per-rectangle values of the reducing-operator variants from tables.
struct LocalTable {
  std::vector<double> bmo, tilde;
};

LocalTable local_table(const BmoLocal& loc, const std::vector<Rectangle>& rects, const ReducingTable& ru,
                       const ReducingTable* rv) {
  LocalTable t;
  t.bmo.assign(rects.size(), 0.0);
  if (rv) t.tilde.assign(rects.size(), 0.0);
  parallel_for(rects.size(), [&](std::size_t i) {
    const auto rc = cells(rects[i], loc.grid());
    const auto mean = loc.mean(rc);
    t.bmo[i] = loc.bmo(rc, mean, ru.inverse[i]);
    if (rv) t.tilde[i] = loc.tilde(rc, mean, rv->matrix[i], ru.inverse[i]);
  });
  return t;
}

std::vector<double> ap_table(const WeightField& w, double p, const std::vector<Rectangle>& rects) {
  const ApEvaluator ev(w, p);
  std::vector<double> out(rects.size());
  parallel_for(rects.size(), [&](std::size_t i) { out[i] = ev.local(cells(rects[i], w.grid())); });
  return out;
}

std::pair<std::vector<double>, std::vector<double>> pointwise_table(const BmoLocal& loc,
                                                                   const std::vector<Rectangle>& rects) {
  std::vector<double> first(rects.size()), second(rects.size());
  parallel_for(rects.size(), [&](std::size_t i) {
    const auto [a, b] = loc.pointwise(cells(rects[i], loc.grid()));
    first[i] = a;
    second[i] = b;
  });
  return {first, second};
}

// Max over the rectangles with a single-cell factor `fixed`, i.e. over the
// one-parameter cubes of the slices through that factor.
std::pair<double, int> slice_max(const std::vector<double>& vals, const std::vector<Rectangle>& rects,
                                 const GridSpec& g, int fixed) {
  double best = 0.0;
  int arg = 0;
  bool any = false;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    if (!single_cell_factor(rects[i], g, fixed)) continue;
    if (!any || vals[i] > best) {
      best = vals[i];
      arg = factor_index(rects[i], g, fixed);
      any = true;
    }
  }
  return {best, arg};
}

RatioEntry ratio_entry(const std::string& a, double va, const std::string& wa, const std::string& b, double vb,
                       const std::string& wb) {
  RatioEntry r;
  r.a = a;
  r.b = b;
  r.value_a = va;
  r.value_b = vb;
  r.witness_a = wa;
  r.witness_b = wb;
  r.degenerate = !(va > kDegenerateNorm && vb > kDegenerateNorm);
  r.ratio = r.degenerate ? 0.0 : std::max(va / vb, vb / va);
  return r;
}

}  // namespace

void to_json(nlohmann::json& j, const NormValue& v) {
  j = {{"value", v.value}, {"argmax", v.argmax}, {"rectangles", v.rectangles}};
}

void to_json(nlohmann::json& j, const SliceNorms& s) {
  j = {{"first", s.first},
       {"second", s.second},
       {"argmax_first", s.argmax_first},
       {"argmax_second", s.argmax_second}};
}

void to_json(nlohmann::json& j, const RatioEntry& r) {
  j = {{"a", r.a},
       {"b", r.b},
       {"value_a", r.value_a},
       {"value_b", r.value_b},
       {"degenerate", r.degenerate},
       {"witness_a", r.witness_a},
       {"witness_b", r.witness_b}};
  j["ratio"] = r.degenerate ? nlohmann::json(nullptr) : nlohmann::json(r.ratio);
}

void to_json(nlohmann::json& j, const BmoReport& r) {
  j = {{"p", r.p},
       {"family", r.family},
       {"mode", to_string(r.mode)},
       {"bmo", r.bmo},
       {"bmo_tilde", r.tilde},
       {"bmo1", r.first},
       {"bmo2", r.second},
       {"dual_bmo", r.dual_bmo},
       {"dual_bmo_tilde", r.dual_tilde},
       {"slices", r.slices},
       {"ratios", r.ratios},
       {"max_ratio", r.max_ratio},
       {"dominance_constant", r.dominance_constant},
       {"holder_violations", r.holder_violations},
       {"nonconverged", r.nonconverged},
       {"rectangles", r.rectangles}};
}

BmoLocal::BmoLocal(const WeightField& b, const WeightField& u, const WeightField& v, double p, ReducingMode mode,
                   JohnOptions opt)
    : grid_(b.grid()),
      d_(b.dim()),
      p_(p),
      mode_(mode),
      ru_((check_inputs(b, u, v, p, mode), u), p, mode, opt),
      rv_(v, p, mode, opt) {
  b_ = copy_data(b);
  v_pos_ = copy_data(field_power(v, 1.0 / p));
  u_neg_ = copy_data(field_power(u, -1.0 / p));
  vb_ = cellwise_product(v_pos_, b_, d_);
  bu_ = cellwise_product(b_, u_neg_, d_);
}

Matrix BmoLocal::mean(std::span<const std::uint32_t> region) const {
  if (region.empty()) throw EmptyRegion("bmo over an empty region");
  // Averaging deviations from the first cell makes constant symbols exact.
  const std::size_t st = static_cast<std::size_t>(d_) * d_;
  const double* b0 = b_.data() + region[0] * st;
  std::vector<double> acc(st, 0.0);
  for (auto c : region) {
    const double* bc = b_.data() + c * st;
    for (std::size_t k = 0; k < st; ++k) acc[k] += bc[k] - b0[k];
  }
  Matrix m(d_, d_);
  for (std::size_t k = 0; k < st; ++k) m.data()[k] = b0[k] + acc[k] / static_cast<double>(region.size());
  return m;
}

double BmoLocal::bmo(std::span<const std::uint32_t> region, const Matrix& mean_b, const Matrix& u_inv) const {
  const std::size_t st = static_cast<std::size_t>(d_) * d_;
  double dev[kMaxDim * kMaxDim], t[kMaxDim * kMaxDim], m[kMaxDim * kMaxDim];
  double acc = 0.0;
  for (auto c : region) {
    const double* bc = b_.data() + c * st;
    for (std::size_t k = 0; k < st; ++k) dev[k] = bc[k] - mean_b.data()[k];
    kernel::matmul(dev, u_inv.data().data(), t, d_);
    kernel::matmul(v_pos_.data() + c * st, t, m, d_);
    acc += fast_pow(kernel::op_norm_sq(m, d_), 0.5 * p_);
  }
  return std::pow(acc / static_cast<double>(region.size()), 1.0 / p_);
}

double BmoLocal::tilde(std::span<const std::uint32_t> region, const Matrix& mean_b, const Matrix& v_r,
                       const Matrix& u_inv) const {
  const std::size_t st = static_cast<std::size_t>(d_) * d_;
  double dev[kMaxDim * kMaxDim], t[kMaxDim * kMaxDim], m[kMaxDim * kMaxDim];
  double acc = 0.0;
  for (auto c : region) {
    const double* bc = b_.data() + c * st;
    for (std::size_t k = 0; k < st; ++k) dev[k] = bc[k] - mean_b.data()[k];
    kernel::matmul(dev, u_inv.data().data(), t, d_);
    kernel::matmul(v_r.data().data(), t, m, d_);
    acc += std::sqrt(kernel::op_norm_sq(m, d_));
  }
  return acc / static_cast<double>(region.size());
}

std::pair<double, double> BmoLocal::pointwise(std::span<const std::uint32_t> region) const {
  if (region.empty()) throw EmptyRegion("bmo over an empty region");
  const double pp = dual_exponent(p_);
  // M(x, y) = V(x)^{1/p} (B(x) - B(y)) U(y)^{-1/p}
  //         = [V^{1/p} B](x) U^{-1/p}(y) - V^{1/p}(x) [B U^{-1/p}](y)
  PairSums sums;
  pair_sums(PairFields{vb_.data(), u_neg_.data(), v_pos_.data(), bu_.data(), d_}, region, pp, p_, sums);
  return {outer_average(sums.row, p_ / pp, 1.0 / p_), outer_average(sums.col, pp / p_, 1.0 / pp)};
}

double BmoLocal::bmo(std::span<const std::uint32_t> region) const {
  return bmo(region, mean(region), inverse(reduce_u(region).matrix));
}

double BmoLocal::tilde(std::span<const std::uint32_t> region) const {
  return tilde(region, mean(region), reduce_v(region).matrix, inverse(reduce_u(region).matrix));
}

NormValue bmo_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p, const FamilySpec& fam,
                   ReducingMode mode, const JohnOptions& opt) {
  const BmoLocal loc(b, u, v, p, mode, opt);
  const auto rects = rectangle_family(b.grid(), fam);
  return norm_from(local_table(loc, rects, reducing_table(u, p, mode, opt, rects), nullptr).bmo, rects);
}

NormValue bmo_tilde_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                         const FamilySpec& fam, ReducingMode mode, const JohnOptions& opt) {
  const BmoLocal loc(b, u, v, p, mode, opt);
  const auto rects = rectangle_family(b.grid(), fam);
  const auto rv = reducing_table(v, p, mode, opt, rects);
  return norm_from(local_table(loc, rects, reducing_table(u, p, mode, opt, rects), &rv).tilde, rects);
}

NormValue bmo1_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                    const FamilySpec& fam) {
  const BmoLocal loc(b, u, v, p, ReducingMode::proxy);
  const auto rects = rectangle_family(b.grid(), fam);
  return norm_from(pointwise_table(loc, rects).first, rects);
}

NormValue bmo2_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                    const FamilySpec& fam) {
  const BmoLocal loc(b, u, v, p, ReducingMode::proxy);
  const auto rects = rectangle_family(b.grid(), fam);
  return norm_from(pointwise_table(loc, rects).second, rects);
}

NormValue one_param_bmo_norm(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                             const FamilySpec& fam, ReducingMode mode, const JohnOptions& opt) {
  if (b.grid().m != 0) throw ShapeMismatch("one-parameter norms need fields on a factor grid (m = 0)");
  return bmo_norm(b, u, v, p, fam, mode, opt);
}

SliceNorms slice_sup_norms(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                           ReducingMode mode, const JohnOptions& opt, const FamilySpec& fam) {
  const GridSpec& g = b.grid();
  if (g.m == 0) throw ShapeMismatch("slice norms need biparameter fields");
  const BmoLocal loc(b, u, v, p, mode, opt);
  // The cubes of the slice B(., x2) are the rectangles Q x {x2}, so only
  // family members with a single-cell factor are evaluated.
  std::vector<Rectangle> rects;
  for (auto& r : rectangle_family(g, fam))
    if (single_cell_factor(r, g, 1) || single_cell_factor(r, g, 2)) rects.push_back(r);
  const auto t = local_table(loc, rects, reducing_table(u, p, mode, opt, rects), nullptr);
  SliceNorms out;
  std::tie(out.first, out.argmax_first) = slice_max(t.bmo, rects, g, 2);
  std::tie(out.second, out.argmax_second) = slice_max(t.bmo, rects, g, 1);
  return out;
}

ReducingTable reducing_table(const WeightField& w, double p, ReducingMode mode, const JohnOptions& opt,
                             const std::vector<Rectangle>& rects) {
  const Reducer red(w, p, mode, opt);
  ReducingTable t;
  t.matrix.resize(rects.size());
  t.inverse.resize(rects.size());
  t.converged.assign(rects.size(), 1);
  parallel_for(rects.size(), [&](std::size_t i) {
    auto op = red(cells(rects[i], w.grid()));
    t.inverse[i] = inverse(op.matrix);
    t.matrix[i] = std::move(op.matrix);
    t.converged[i] = op.converged ? 1 : 0;
  });
  for (char c : t.converged) t.nonconverged += 1 - c;
  return t;
}

BmoWeights::BmoWeights(const WeightField& u_, const WeightField& v_, double p_, const FamilySpec& fam,
                       ReducingMode mode_, const JohnOptions& opt_)
    : u(u_), v(v_), p(p_), family(fam), mode(mode_), opt(opt_) {
  check_weights(u, v, p, mode);
  const double pp = dual_exponent(p);
  u_dual = dual_weight(u, p);
  v_dual = dual_weight(v, p);
  rects = rectangle_family(u.grid(), fam);
  ru = reducing_table(u, p, mode, opt, rects);
  rv = reducing_table(v, p, mode, opt, rects);
  // Duality partner: B* with U-slot V' and V-slot U', exponent p'.
  ru_dual = reducing_table(v_dual, pp, mode, opt, rects);
  rv_dual = reducing_table(u_dual, pp, mode, opt, rects);
  ap_v = ap_table(v, p, rects);
  ap_v_dual = ap_table(v_dual, pp, rects);
}

BmoReport equivalence_report(const WeightField& b, const WeightField& u, const WeightField& v, double p,
                             const FamilySpec& fam, ReducingMode mode, const JohnOptions& opt) {
  return equivalence_report(b, BmoWeights(u, v, p, fam, mode, opt));
}

BmoReport equivalence_report(const WeightField& b, const BmoWeights& w) {
  const double p = w.p, pp = dual_exponent(p);
  const GridSpec& g = b.grid();
  const auto& rects = w.rects;
  const BmoLocal loc(b, w.u, w.v, p, w.mode, w.opt);
  const BmoLocal dual(transpose(b), w.v_dual, w.u_dual, pp, w.mode, w.opt);

  const auto prim = local_table(loc, rects, w.ru, &w.rv);
  const auto dl = local_table(dual, rects, w.ru_dual, &w.rv_dual);
  const auto [first, second] = pointwise_table(loc, rects);

  // Per-rectangle dominance and Hoelder check.
  const double root_d = std::sqrt(static_cast<double>(b.dim()));
  const double slack = 1.0 + 10.0 * w.opt.accept_tol + 1e-12;
  double dominance = 0.0;
  int violations = 0;
  for (std::size_t i = 0; i < rects.size(); ++i) {
    const double bm = prim.bmo[i], ti = prim.tilde[i];
    if (!(bm > kDegenerateNorm)) continue;
    dominance = std::max(dominance, ti / (bm * std::pow(w.ap_v[i], 1.0 / p)));
    if (ti > slack * root_d * std::pow(w.ap_v_dual[i], 1.0 / pp) * bm) ++violations;
  }

  BmoReport r;
  r.p = p;
  r.family = w.family.describe();
  r.mode = w.mode;
  r.rectangles = rects.size();
  r.bmo = norm_from(prim.bmo, rects);
  r.tilde = norm_from(prim.tilde, rects);
  r.first = norm_from(first, rects);
  r.second = norm_from(second, rects);
  r.dual_bmo = norm_from(dl.bmo, rects);
  r.dual_tilde = norm_from(dl.tilde, rects);
  if (g.m > 0) {
    std::tie(r.slices.first, r.slices.argmax_first) = slice_max(prim.bmo, rects, g, 2);
    std::tie(r.slices.second, r.slices.argmax_second) = slice_max(prim.bmo, rects, g, 1);
  }
  r.dominance_constant = dominance;
  r.holder_violations = violations;
  r.nonconverged = w.ru.nonconverged + w.rv.nonconverged + w.ru_dual.nonconverged + w.rv_dual.nonconverged;
  struct Named {
    std::string name;
    double value;
    std::string witness;
  };
  std::vector<Named> all = {
      {"bmo", r.bmo.value, describe(r.bmo.argmax)},
      {"bmo_tilde", r.tilde.value, describe(r.tilde.argmax)},
      {"bmo1", r.first.value, describe(r.first.argmax)},
      {"bmo2", r.second.value, describe(r.second.argmax)},
      {"dual_bmo", r.dual_bmo.value, describe(r.dual_bmo.argmax)},
      {"dual_bmo_tilde", r.dual_tilde.value, describe(r.dual_tilde.argmax)},
  };
  if (g.m > 0) {
    const bool one = r.slices.first >= r.slices.second;
    all.push_back({"slices", std::max(r.slices.first, r.slices.second),
                   one ? "x2 cell " + std::to_string(r.slices.argmax_first)
                       : "x1 cell " + std::to_string(r.slices.argmax_second)});
  }
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      r.ratios.push_back(ratio_entry(all[i].name, all[i].value, all[i].witness, all[j].name, all[j].value,
                                     all[j].witness));
      if (!r.ratios.back().degenerate) r.max_ratio = std::max(r.max_ratio, r.ratios.back().ratio);
    }
  return r;
}

}  // namespace bmolab
