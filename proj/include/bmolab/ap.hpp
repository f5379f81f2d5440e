#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bmolab/grid.hpp"
#include "bmolab/reducing.hpp"
#include "bmolab/weights.hpp"
#include "json.hpp"

namespace bmolab {

/// Characteristic over a rectangle family with its provenance.
struct ApReport {
  double value = 1.0;
  double p = 2.0;
  std::string family;
  std::string mode = "exact";
  Rectangle argmax;
  std::size_t rectangles = 0;
  std::vector<double> table;  // per-rectangle values in family order (optional)
};

void to_json(nlohmann::json& j, const ApReport& r);

/// Precomputes W^{1/p} and W^{-1/p} for repeated local characteristics
///   [W]_{A_p,R} = avg_R (avg_R |W(x)^{1/p} W(y)^{-1/p}|^{p'} dy)^{p/p'} dx.
class ApEvaluator {
 public:
  ApEvaluator(const WeightField& w, double p);
  double local(std::span<const std::uint32_t> region) const;
  double p() const { return p_; }
  const GridSpec& grid() const { return grid_; }

 private:
  GridSpec grid_;
  int d_;
  double p_;
  std::vector<double> pos_;  // W^{1/p}
  std::vector<double> neg_;  // W^{-1/p}
};

double ap_local(const WeightField& w, std::span<const std::uint32_t> region, double p);
double ap_local(const WeightField& w, const Rectangle& r, double p);

/// Max of the local characteristic over an explicit family; the argmax is
/// the first maximizer in family order.
ApReport ap_family(const WeightField& w, const std::vector<Rectangle>& fam, double p, const std::string& family,
                   bool keep_table = false);

/// Sup over all product dyadic rectangles of the base grid.
ApReport ap_dyadic(const WeightField& w, double p, bool keep_table = false);

/// Sup over a surrogate for all rectangles (shifted grids or sampled).
ApReport ap_continuous(const WeightField& w, const FamilySpec& fam, double p, bool keep_table = false);

/// r = [W']_{A_p'}^{1/p'} / [W]_{A_p}^{1/p} on one family; r = 1 for d = 1.
struct DualCheck {
  double r = 1.0;
  ApReport primal;
  ApReport dual;
};

void to_json(nlohmann::json& j, const DualCheck& r);

DualCheck ap_dual_check(const WeightField& w, double p, const FamilySpec& fam = {});

/// Slice characteristics of a biparameter weight: over_first is the max
/// over x2 of the one-parameter dyadic characteristic of W(., x2) in x1,
/// over_second the max over x1 of that of W(x1, .). kappa is the larger of
/// the two divided by the biparameter dyadic characteristic.
struct SliceReport {
  double over_first = 1.0;
  double over_second = 1.0;
  int argmax_first = 0;   // linear index of the fixed x2 cell
  int argmax_second = 0;  // linear index of the fixed x1 cell
  double biparameter = 1.0;
  double kappa = 1.0;
  double p = 2.0;
};

void to_json(nlohmann::json& j, const SliceReport& r);

SliceReport ap_slices(const WeightField& w, double p);

/// sup_R |W'_R W_R|^p with W_R the reducing operator of W (exponent p) and
/// W'_R that of W' = W^{-1/(p-1)} (exponent p'), next to the characteristic
/// on the same family.
struct ReducingFormReport {
  double value = 1.0;
  double ap = 1.0;
  double ratio = 1.0;  // value / ap
  double max_local_ratio = 1.0;
  double min_local_ratio = 1.0;
  Rectangle argmax;
  std::string family;
  ReducingMode mode = ReducingMode::john;
  double p = 2.0;
};

void to_json(nlohmann::json& j, const ReducingFormReport& r);

ReducingFormReport ap_reducing_form(const WeightField& w, const FamilySpec& fam, double p, ReducingMode mode,
                                    const JohnOptions& opt = JohnOptions::bulk());

/// Dual exponent p' = p / (p - 1).
inline double dual_exponent(double p) { return p / (p - 1.0); }

}  // namespace bmolab
