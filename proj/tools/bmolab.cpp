#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bmolab/ap.hpp"
#include "bmolab/bmo.hpp"
#include "bmolab/campaign.hpp"
#include "bmolab/commutator.hpp"
#include "bmolab/error.hpp"
#include "bmolab/grid.hpp"
#include "bmolab/reducing.hpp"
#include "bmolab/weights.hpp"

namespace {

using nlohmann::json;
using namespace bmolab;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void write_json(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw IoError("cannot write " + out);
  f << text;
  if (!f) throw IoError("write failed for " + out);
}

// "full", a JSON rectangle {"axes": [[a, b], ...], "split": n}, or
// "a:b,a:b,..." with the first n axes in the first factor.
Rectangle parse_region(const std::string& text, const GridSpec& g) {
  if (text.empty() || text == "full") return full_rectangle(g);
  Rectangle r;
  if (text.front() == '{') {
    try {
      r = json::parse(text).get<Rectangle>();
    } catch (const json::exception& e) {
      throw ConfigError("region", e.what());
    }
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw ConfigError("region", "expected a:b, got '" + item + "'");
      try {
        const int lo = std::stoi(item.substr(0, colon));
        const int hi = std::stoi(item.substr(colon + 1));
        if (hi <= lo) throw ConfigError("region", "need a < b in '" + item + "'");
        r.axes.push_back({lo, hi - lo});
      } catch (const std::logic_error&) {
        throw ConfigError("region", "bad interval '" + item + "'");
      }
    }
    r.split = g.n;
  }
  check_rectangle(r, g);
  return r;
}

void strip(CommutatorNorms& n) {
  for (auto& e : n.entries) e.witness = VectorField();
}

bool nonconverged(const CommutatorNorms& n) {
  for (const auto& e : n.entries)
    if (!e.converged) return true;
  return false;
}

struct GenArgs {
  std::string kind = "power", out, shape = "trig", descriptor;
  int n = 1, m = 1, level = 4, d = 2, modes = 3;
  std::vector<double> alpha, lambda, wave;
  std::vector<int> k;
  double p = 2.0, amplitude = 1.0, theta0 = 0.0;
  std::uint64_t seed = 0;
};

int run_gen(const GenArgs& a) {
  const GridSpec g{a.n, a.m, a.level};
  g.validate();
  json desc;
  if (!a.descriptor.empty()) {
    try {
      desc = json::parse(a.descriptor);
    } catch (const json::exception& e) {
      throw ConfigError("descriptor", e.what());
    }
  } else {
    desc = {{"type", a.kind}, {"seed", a.seed}};
    if (a.kind == "power") desc.update({{"alpha", a.alpha}, {"p", a.p}});
    if (a.kind == "rotating") {
      if (!a.lambda.empty()) desc["lambda"] = a.lambda;
      if (!a.wave.empty()) desc["wave"] = a.wave;
      if (!a.k.empty()) desc["k"] = a.k;
      desc["theta0"] = a.theta0;
    }
    if (a.kind == "expsym") desc.update({{"d", a.d}, {"amplitude", a.amplitude}, {"modes", a.modes}});
    if (a.kind == "identity") desc["d"] = a.d;
    if (a.kind == "symbol") desc.update({{"d", a.d}, {"shape", a.shape}, {"amplitude", a.amplitude}});
  }
  const WeightField w = generate(g, desc);
  if (a.out.empty()) throw ConfigError("out", "an output path is required");
  save(a.out, w);
  return kExitOk;
}

struct ReduceArgs {
  std::string field, region = "full", mode = "john", out;
  double p = 2.0;
  bool certify = false;
};

int run_reduce(const ReduceArgs& a) {
  const WeightField w = load(a.field);
  const Rectangle r = parse_region(a.region, w.grid());
  const auto region = cells(r, w.grid());
  const ReducingMode mode = parse_reducing_mode(a.mode);
  JohnOptions opt;
  opt.certify = a.certify;
  const ReducingOp op = reducing(w, region, a.p, mode, opt);
  const InversePrimeReport cmp = compare_inverse_prime(w, region, a.p, mode, opt);
  json j = op;
  j["region"] = r;
  j["C_E"] = cmp.c_e;
  j["inverse_prime"] = {{"slack_left", cmp.slack_left}, {"slack_right", cmp.slack_right}};
  write_json(j, a.out);
  return op.converged ? kExitOk : kExitNumerical;
}

struct ApArgs {
  std::string field, family = "dyadic", out;
  double p = 2.0;
  bool dual = false, table = false;
};

int run_ap(const ApArgs& a) {
  const WeightField w = load(a.field);
  const FamilySpec fam = parse_family(a.family);
  if (a.dual) {
    write_json(ap_dual_check(w, a.p, fam), a.out);
  } else {
    write_json(ap_continuous(w, fam, a.p, a.table), a.out);
  }
  return kExitOk;
}

struct PairArgs {
  std::string symbol, u, v, family = "dyadic", mode = "john", out, tensor = "summary";
  double p = 2.0, tol = 1e-8;
  int starts = 3, search_iter = 3000;
  bool no_witness = false;
};

int run_bmo(const PairArgs& a) {
  const auto r = equivalence_report(load(a.symbol), load(a.u), load(a.v), a.p, parse_family(a.family),
                                    parse_reducing_mode(a.mode));
  write_json(r, a.out);
  return r.nonconverged > 0 ? kExitNumerical : kExitOk;
}

OpNormOptions opnorm_options(const PairArgs& a) {
  OpNormOptions o;
  o.tol = a.tol;
  o.starts = a.starts;
  o.search_iter = a.search_iter;
  return o;
}

TensorTableMode parse_tensor(const std::string& s) {
  if (s == "none") return TensorTableMode::none;
  if (s == "summary") return TensorTableMode::summary;
  if (s == "rows") return TensorTableMode::rows;
  throw ConfigError("tensor", "expected none, summary or rows");
}

int run_lower(const PairArgs& a) {
  auto r = lower_bound_experiment(load(a.symbol), load(a.u), load(a.v), a.p, parse_family(a.family),
                                  parse_reducing_mode(a.mode), JohnOptions::bulk(), opnorm_options(a),
                                  parse_tensor(a.tensor));
  const bool flagged = nonconverged(r.norms);
  if (a.no_witness) strip(r.norms);
  write_json(r, a.out);
  return flagged ? kExitNumerical : kExitOk;
}

int run_upper(const PairArgs& a) {
  auto r = upper_bound_experiment(load(a.symbol), load(a.u), load(a.v), a.p, parse_family(a.family),
                                  opnorm_options(a));
  const bool flagged = nonconverged(r.norms);
  if (a.no_witness) strip(r.norms);
  write_json(r, a.out);
  return flagged ? kExitNumerical : kExitOk;
}

struct CampaignArgs {
  std::string config, report, csv;
};

int run_campaign_cmd(const CampaignArgs& a) {
  ExperimentConfig cfg = load_config(a.config);
  if (!a.report.empty()) cfg.report_path = a.report;
  if (!a.csv.empty()) cfg.csv_path = a.csv;
  const CampaignReport rep = run_campaign(cfg);
  write_json(rep, cfg.report_path);
  if (!cfg.csv_path.empty()) emit_csv(rep, cfg.csv_path);
  return rep.nonconverged > 0 ? kExitNumerical : kExitOk;
}

void add_pair_options(CLI::App* c, PairArgs& a) {
  c->add_option("--symbol", a.symbol, "symbol field B (WFLD)")->required();
  c->add_option("--u", a.u, "weight field U (WFLD)")->required();
  c->add_option("--v", a.v, "weight field V (WFLD)")->required();
  c->add_option("--p", a.p, "exponent, 1 < p < inf");
  c->add_option("--family", a.family, "rectangle family: dyadic, shifted, sampled(K), dyadic@I");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bmolab: matrix-weighted product BMO and commutator experiments"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "generate a weight or symbol field and save it as WFLD");
  c_gen->add_option("--kind", gen.kind, "power, rotating, expsym, identity or symbol");
  c_gen->add_option("--n", gen.n, "axes in the first factor");
  c_gen->add_option("--m", gen.m, "axes in the second factor");
  c_gen->add_option("--level", gen.level, "dyadic level L (2^L cells per axis)");
  c_gen->add_option("--alpha", gen.alpha, "power exponents, one per axis (power)");
  c_gen->add_option("--p", gen.p, "exponent the power weight is built for (power)");
  c_gen->add_option("--lambda", gen.lambda, "eigenvalue pair (rotating)");
  c_gen->add_option("--wave", gen.wave, "eigenvalue wave amplitudes (rotating)");
  c_gen->add_option("--k", gen.k, "rotation frequencies per axis (rotating)");
  c_gen->add_option("--theta0", gen.theta0, "rotation phase (rotating)");
  c_gen->add_option("--d", gen.d, "matrix size (expsym, identity, symbol)");
  c_gen->add_option("--amplitude", gen.amplitude, "amplitude (expsym, symbol)");
  c_gen->add_option("--modes", gen.modes, "trigonometric modes (expsym)");
  c_gen->add_option("--shape", gen.shape, "constant, checkerboard, trig, one_variable, separable (symbol)");
  c_gen->add_option("--seed", gen.seed, "64-bit generator seed");
  c_gen->add_option("--descriptor", gen.descriptor, "full JSON generator descriptor (overrides --kind options)");
  c_gen->add_option("--out", gen.out, "output WFLD path")->required();

  ReduceArgs red;
  auto* c_red = app.add_subcommand("reduce", "reducing operator of a weight over a region");
  c_red->add_option("--field", red.field, "weight field (WFLD)")->required();
  c_red->add_option("--region", red.region, "full, a:b,a:b,... or a JSON rectangle");
  c_red->add_option("--p", red.p, "exponent");
  c_red->add_option("--mode", red.mode, "john, proxy or exact_p2");
  c_red->add_flag("--certify", red.certify, "certify the residual on a separate direction net");
  c_red->add_option("--out", red.out, "output JSON path (default stdout)");

  ApArgs ap;
  auto* c_ap = app.add_subcommand("ap", "A_p characteristic over a rectangle family");
  c_ap->add_option("--field", ap.field, "weight field (WFLD)")->required();
  c_ap->add_option("--p", ap.p, "exponent");
  c_ap->add_option("--family", ap.family, "dyadic, shifted, sampled(K), dyadic@I");
  c_ap->add_flag("--dual", ap.dual, "also compute the dual-weight characteristic");
  c_ap->add_flag("--table", ap.table, "keep the per-rectangle table");
  c_ap->add_option("--out", ap.out, "output JSON path (default stdout)");

  PairArgs bmo;
  auto* c_bmo = app.add_subcommand("bmo", "all weighted bmo norms of a symbol and their ratios");
  add_pair_options(c_bmo, bmo);
  c_bmo->add_option("--mode", bmo.mode, "reducing mode: john, proxy or exact_p2");
  c_bmo->add_option("--report,--out", bmo.out, "output JSON path (default stdout)");

  PairArgs lower;
  auto* c_lower = app.add_subcommand("lower", "bmo norm against the largest commutator norm");
  add_pair_options(c_lower, lower);
  c_lower->add_option("--mode", lower.mode, "reducing mode: john, proxy or exact_p2");
  c_lower->add_option("--tensor", lower.tensor, "tensorized table: none, summary or rows");
  PairArgs upper;
  auto* c_upper = app.add_subcommand("upper", "largest commutator norm against the bmo1 norm");
  add_pair_options(c_upper, upper);
  for (auto [c, a] : {std::pair{c_lower, &lower}, std::pair{c_upper, &upper}}) {
    c->add_option("--tol", a->tol, "power-iteration tolerance");
    c->add_option("--starts", a->starts, "random starts of the p != 2 search");
    c->add_option("--search-iter", a->search_iter, "ascent steps per start");
    c->add_flag("--no-witness", a->no_witness, "omit witness functions from the report");
    c->add_option("--out", a->out, "output JSON path (default stdout)");
  }

  CampaignArgs camp;
  auto* c_camp = app.add_subcommand("campaign", "run a JSON experiment configuration");
  c_camp->add_option("--config", camp.config, "experiment configuration (JSON)")->required();
  c_camp->add_option("--report", camp.report, "override the report path");
  c_camp->add_option("--csv", camp.csv, "override the CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*c_gen) return run_gen(gen);
    if (*c_red) return run_reduce(red);
    if (*c_ap) return run_ap(ap);
    if (*c_bmo) return run_bmo(bmo);
    if (*c_lower) return run_lower(lower);
    if (*c_upper) return run_upper(upper);
    if (*c_camp) return run_campaign_cmd(camp);
  } catch (const NonFinite& e) {
    std::cerr << "bmolab: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "bmolab: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
