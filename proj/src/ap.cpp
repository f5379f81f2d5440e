#include "bmolab/ap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bmolab/error.hpp"
#include "bmolab/pairsum.hpp"
#include "bmolab/parallel.hpp"

namespace bmolab {

namespace {

void check_exponent(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw WrongExponent("need 1 < p < inf");
}

std::vector<double> power_data(const WeightField& w, double s) {
  const auto f = field_power(w, s);
  return {f.data().begin(), f.data().end()};
}

// First maximizer in family order.
std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

void to_json(nlohmann::json& j, const ApReport& r) {
  j = {{"value", r.value}, {"p", r.p},          {"family", r.family},
       {"mode", r.mode},   {"argmax", r.argmax}, {"rectangles", r.rectangles}};
  if (!r.table.empty()) j["table"] = r.table;
}

void to_json(nlohmann::json& j, const DualCheck& r) {
  j = {{"r", r.r}, {"primal", r.primal}, {"dual", r.dual}};
}

void to_json(nlohmann::json& j, const SliceReport& r) {
  j = {{"over_first", r.over_first},       {"over_second", r.over_second},
       {"argmax_first", r.argmax_first},   {"argmax_second", r.argmax_second},
       {"biparameter", r.biparameter},     {"kappa", r.kappa},
       {"p", r.p}};
}

void to_json(nlohmann::json& j, const ReducingFormReport& r) {
  j = {{"value", r.value},
       {"ap", r.ap},
       {"ratio", r.ratio},
       {"max_local_ratio", r.max_local_ratio},
       {"min_local_ratio", r.min_local_ratio},
       {"argmax", r.argmax},
       {"family", r.family},
       {"mode", to_string(r.mode)},
       {"p", r.p}};
}

ApEvaluator::ApEvaluator(const WeightField& w, double p) : grid_(w.grid()), d_(w.dim()), p_(p) {
  if (w.kind() != FieldKind::weight) throw ShapeMismatch("A_p characteristics need a weight field");
  check_exponent(p);
  pos_ = power_data(w, 1.0 / p);
  neg_ = power_data(w, -1.0 / p);
}

double ApEvaluator::local(std::span<const std::uint32_t> region) const {
  if (region.empty()) throw EmptyRegion("A_p characteristic over an empty region");
  const double pp = dual_exponent(p_);
  PairSums sums;
  pair_sums(PairFields{pos_.data(), neg_.data(), nullptr, nullptr, d_}, region, pp, 0.0, sums);
  return outer_average(sums.row, p_ / pp, 1.0);
}

double ap_local(const WeightField& w, std::span<const std::uint32_t> region, double p) {
  return ApEvaluator(w, p).local(region);
}

double ap_local(const WeightField& w, const Rectangle& r, double p) {
  check_rectangle(r, w.grid());
  return ap_local(w, cells(r, w.grid()), p);
}

ApReport ap_family(const WeightField& w, const std::vector<Rectangle>& fam, double p, const std::string& family,
                   bool keep_table) {
  const ApEvaluator ev(w, p);
  std::vector<double> vals(fam.size());
  parallel_for(fam.size(), [&](std::size_t i) { vals[i] = ev.local(cells(fam[i], w.grid())); });
  ApReport rep;
  rep.p = p;
  rep.family = family;
  rep.rectangles = fam.size();
  if (!fam.empty()) {
    const auto k = argmax(vals);
    rep.value = vals[k];
    rep.argmax = fam[k];
  }
  if (keep_table) rep.table = std::move(vals);
  return rep;
}

ApReport ap_dyadic(const WeightField& w, double p, bool keep_table) {
  const FamilySpec spec;
  return ap_family(w, rectangle_family(w.grid(), spec), p, spec.describe(), keep_table);
}

ApReport ap_continuous(const WeightField& w, const FamilySpec& fam, double p, bool keep_table) {
  return ap_family(w, rectangle_family(w.grid(), fam), p, fam.describe(), keep_table);
}

DualCheck ap_dual_check(const WeightField& w, double p, const FamilySpec& fam) {
  check_exponent(p);
  const double pp = dual_exponent(p);
  const auto rects = rectangle_family(w.grid(), fam);
  DualCheck out;
  out.primal = ap_family(w, rects, p, fam.describe());
  out.dual = ap_family(dual_weight(w, p), rects, pp, fam.describe());
  out.r = std::pow(out.dual.value, 1.0 / pp) / std::pow(out.primal.value, 1.0 / p);
  return out;
}

SliceReport ap_slices(const WeightField& w, double p) {
  const GridSpec& g = w.grid();
  if (g.m == 0) throw ShapeMismatch("slice characteristics need a biparameter field");
  // A one-parameter dyadic cube Q of the slice W(., x2) is the rectangle
  // Q x {x2} of the product grid, so the slices are exactly the product
  // dyadic rectangles with one factor a single cell.
  std::vector<Rectangle> first, second;
  for (auto& r : rectangle_family(g, FamilySpec{})) {
    if (single_cell_factor(r, g, 2)) first.push_back(r);
    if (single_cell_factor(r, g, 1)) second.push_back(r);
  }
  const auto a = ap_family(w, first, p, "slices(first)");
  const auto b = ap_family(w, second, p, "slices(second)");
  SliceReport out;
  out.p = p;
  out.over_first = a.value;
  out.over_second = b.value;
  out.argmax_first = factor_index(a.argmax, g, 2);
  out.argmax_second = factor_index(b.argmax, g, 1);
  out.biparameter = ap_dyadic(w, p).value;
  out.kappa = std::max(out.over_first, out.over_second) / out.biparameter;
  return out;
}

ReducingFormReport ap_reducing_form(const WeightField& w, const FamilySpec& fam, double p, ReducingMode mode,
                                    const JohnOptions& opt) {
  check_exponent(p);
  const double pp = dual_exponent(p);
  const auto rects = rectangle_family(w.grid(), fam);
  const Reducer red(w, p, mode, opt);
  const Reducer dual(dual_weight(w, p), pp, mode, opt);
  const ApEvaluator ev(w, p);
  std::vector<double> form(rects.size()), ap(rects.size());
  parallel_for(rects.size(), [&](std::size_t i) {
    const auto rc = cells(rects[i], w.grid());
    form[i] = std::pow(op_norm(dual(rc).matrix * red(rc).matrix), p);
    ap[i] = ev.local(rc);
  });
  ReducingFormReport out;
  out.p = p;
  out.mode = mode;
  out.family = fam.describe();
  out.max_local_ratio = 0.0;
  out.min_local_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rects.size(); ++i) {
    out.max_local_ratio = std::max(out.max_local_ratio, form[i] / ap[i]);
    out.min_local_ratio = std::min(out.min_local_ratio, form[i] / ap[i]);
  }
  const auto k = argmax(form);
  out.value = form[k];
  out.argmax = rects[k];
  out.ap = ap[argmax(ap)];
  out.ratio = out.value / out.ap;
  return out;
}

}  // namespace bmolab
