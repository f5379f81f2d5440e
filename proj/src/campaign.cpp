#include "bmolab/campaign.hpp"

#include <fftw3.h>

#include <charconv>
#include <cmath>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "bmolab/ap.hpp"
#include "bmolab/error.hpp"
#include "bmolab/parallel.hpp"

namespace bmolab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "$" : path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
}

template <typename T>
void read(const json& j, const std::string& key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path.empty() ? key : path + "." + key, e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json seeded(json desc, std::uint64_t seed) {
  if (!desc.contains("seed")) desc["seed"] = seed;
  return desc;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void strip_witnesses(CommutatorNorms& n) {
  for (auto& e : n.entries) e.witness = VectorField();
}

bool any_nonconverged(const CommutatorNorms& n) {
  for (const auto& e : n.entries)
    if (!e.converged) return true;
  return false;
}

std::string pair_name(const CommutatorNorms& n) {
  return "[R1_" + std::to_string(n.argmax_j) + " R2_" + std::to_string(n.argmax_k) + ", B]";
}

RatioEntry make_ratio(const std::string& a, double va, const std::string& wa, const std::string& b, double vb,
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

struct Element {
  std::string name;
  WeightField u, v, b;
};

CampaignEntry run_one(const std::string& kind, const Element& el, double p, const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const FamilySpec fam = parse_family(cfg.family);
  CampaignEntry e;
  e.experiment = kind + ":" + el.name;
  e.p = p;
  if (kind == "ap") {
    const auto du = ap_dual_check(el.u, p, fam);
    const auto dv = ap_dual_check(el.v, p, fam);
    e.result = {{"u", du}, {"v", dv}};
    const double pp = dual_exponent(p);
    e.ratios.push_back(make_ratio("U", std::pow(du.primal.value, 1.0 / p), describe(du.primal.argmax), "U_dual",
                                  std::pow(du.dual.value, 1.0 / pp), describe(du.dual.argmax)));
    e.ratios.push_back(make_ratio("V", std::pow(dv.primal.value, 1.0 / p), describe(dv.primal.argmax), "V_dual",
                                  std::pow(dv.dual.value, 1.0 / pp), describe(dv.dual.argmax)));
  } else if (kind == "bmo") {
    const auto r = equivalence_report(el.b, el.u, el.v, p, fam, cfg.mode, cfg.john);
    e.result = r;
    e.ratios = r.ratios;
    e.nonconverged = r.nonconverged > 0;
  } else if (kind == "lower") {
    auto r = lower_bound_experiment(el.b, el.u, el.v, p, fam, cfg.mode, cfg.john, cfg.opnorm);
    e.nonconverged = any_nonconverged(r.norms);
    strip_witnesses(r.norms);
    e.result = r;
    e.ratios.push_back(
        make_ratio("bmo", r.bmo, describe(r.bmo_argmax), "commutator", r.commutator, pair_name(r.norms)));
  } else if (kind == "upper") {
    auto r = upper_bound_experiment(el.b, el.u, el.v, p, fam, cfg.opnorm);
    e.nonconverged = any_nonconverged(r.norms);
    strip_witnesses(r.norms);
    e.result = r;
    e.ratios.push_back(
        make_ratio("commutator", r.commutator, pair_name(r.norms), "bmo1", r.bmo1, describe(r.bmo1_argmax)));
  } else {
    throw ConfigError("experiments", "unknown experiment '" + kind + "'");
  }
  e.seconds = seconds_since(t0);
  return e;
}

}  // namespace

// --- Config ------------------------------------------------------------------

void from_json(const json& j, ExperimentConfig& c) {
  check_keys(j, "", {"schema_version", "name", "grid", "seed", "p", "family", "mode", "tolerances", "corpus",
                     "experiments", "output"});
  read(j, "schema_version", "", c.schema_version);
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("schema_version", "unsupported schema version " + std::to_string(c.schema_version));
  read(j, "name", "", c.name);
  if (j.contains("grid")) {
    check_keys(j.at("grid"), "grid", {"dims", "L"});
    read(j, "grid", "", c.grid);
  }
  c.grid.validate();
  read(j, "seed", "", c.seed);
  read(j, "p", "", c.p);
  for (std::size_t i = 0; i < c.p.size(); ++i)
    if (!(c.p[i] > 1.0) || !std::isfinite(c.p[i]))
      throw ConfigError("p[" + std::to_string(i) + "]", "need 1 < p < inf");
  read(j, "family", "", c.family);
  try {
    parse_family(c.family);
  } catch (const Error& e) {
    throw ConfigError("family", e.what());
  }
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", "", m);
    try {
      c.mode = parse_reducing_mode(m);
    } catch (const Error& e) {
      throw ConfigError("mode", e.what());
    }
  }
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    check_keys(t, "tolerances", {"cut_tol", "accept_tol", "mvee_tol", "max_rounds", "opnorm_tol",
                                 "opnorm_max_iter", "search_starts", "search_iter"});
    read(t, "cut_tol", "tolerances", c.john.cut_tol);
    read(t, "accept_tol", "tolerances", c.john.accept_tol);
    read(t, "mvee_tol", "tolerances", c.john.mvee_tol);
    read(t, "max_rounds", "tolerances", c.john.max_rounds);
    read(t, "opnorm_tol", "tolerances", c.opnorm.tol);
    read(t, "opnorm_max_iter", "tolerances", c.opnorm.max_iter);
    read(t, "search_starts", "tolerances", c.opnorm.starts);
    read(t, "search_iter", "tolerances", c.opnorm.search_iter);
  }
  if (j.contains("corpus")) {
    const auto& arr = j.at("corpus");
    if (!arr.is_array()) throw ConfigError("corpus", "expected an array");
    c.corpus.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "corpus[" + std::to_string(i) + "]";
      check_keys(arr[i], path, {"name", "u", "v", "b"});
      CorpusElement el;
      el.name = "e" + std::to_string(i);
      read(arr[i], "name", path, el.name);
      for (const char* k : {"u", "v", "b"})
        if (!arr[i].contains(k) || !arr[i].at(k).is_object()) throw ConfigError(path + "." + k, "missing generator");
      el.u = arr[i].at("u");
      el.v = arr[i].at("v");
      el.b = arr[i].at("b");
      c.corpus.push_back(std::move(el));
    }
  }
  read(j, "experiments", "", c.experiments);
  for (std::size_t i = 0; i < c.experiments.size(); ++i) {
    const auto& k = c.experiments[i];
    if (k != "ap" && k != "bmo" && k != "lower" && k != "upper")
      throw ConfigError("experiments[" + std::to_string(i) + "]", "unknown experiment '" + k + "'");
  }
  if (j.contains("output")) {
    check_keys(j.at("output"), "output", {"report", "csv"});
    read(j.at("output"), "report", "output", c.report_path);
    read(j.at("output"), "csv", "output", c.csv_path);
  }
}

void to_json(json& j, const ExperimentConfig& c) {
  auto corpus = json::array();
  for (const auto& el : c.corpus) corpus.push_back({{"name", el.name}, {"u", el.u}, {"v", el.v}, {"b", el.b}});
  j = {{"schema_version", c.schema_version},
       {"name", c.name},
       {"grid", c.grid},
       {"seed", c.seed},
       {"p", c.p},
       {"family", c.family},
       {"mode", to_string(c.mode)},
       {"tolerances",
        {{"cut_tol", c.john.cut_tol},
         {"accept_tol", c.john.accept_tol},
         {"mvee_tol", c.john.mvee_tol},
         {"max_rounds", c.john.max_rounds},
         {"opnorm_tol", c.opnorm.tol},
         {"opnorm_max_iter", c.opnorm.max_iter},
         {"search_starts", c.opnorm.starts},
         {"search_iter", c.opnorm.search_iter}}},
       {"corpus", corpus},
       {"experiments", c.experiments}};
  json out = json::object();
  if (!c.report_path.empty()) out["report"] = c.report_path;
  if (!c.csv_path.empty()) out["csv"] = c.csv_path;
  if (!out.empty()) j["output"] = out;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  return j.get<ExperimentConfig>();
}

// --- Report ------------------------------------------------------------------

nlohmann::json environment_fingerprint() {
  return {{"schema_version", kSchemaVersion},
          {"compiler", std::string("gcc ") + __VERSION__},
          {"cxx_standard", static_cast<long>(__cplusplus)},
          {"fftw", std::string(fftw_version)},
          {"threads", thread_count()}};
}

void to_json(json& j, const CampaignReport& r) {
  auto entries = json::array();
  auto timings = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"experiment", e.experiment},
                       {"p", e.p},
                       {"result", e.result},
                       {"ratios", e.ratios},
                       {"nonconverged", e.nonconverged}});
    timings.push_back({{"experiment", e.experiment}, {"p", e.p}, {"seconds", e.seconds}});
  }
  j = {{"schema_version", r.schema_version},
       {"name", r.name},
       {"environment", r.environment},
       {"config", r.config},
       {"entries", entries},
       {"nonconverged", r.nonconverged},
       {"timings", {{"total_seconds", r.seconds}, {"entries", timings}}}};
}

json without_timings(const json& report) {
  json out = report;
  out.erase("timings");
  return out;
}

CampaignReport run_campaign(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  CampaignReport rep;
  rep.name = cfg.name;
  rep.environment = environment_fingerprint();
  rep.config = cfg;
  for (std::size_t i = 0; i < cfg.corpus.size(); ++i) {
    const auto& c = cfg.corpus[i];
    if (cfg.experiments.empty()) break;
    const std::uint64_t base = cfg.seed + 3 * i;
    Element el;
    el.name = c.name;
    try {
      el.u = generate(cfg.grid, seeded(c.u, base));
      el.v = generate(cfg.grid, seeded(c.v, base + 1));
      el.b = generate(cfg.grid, seeded(c.b, base + 2));
    } catch (const ConfigError& e) {
      throw ConfigError("corpus[" + std::to_string(i) + "]", e.what());
    }
    for (const auto& kind : cfg.experiments)
      for (double p : cfg.p) {
        auto e = run_one(kind, el, p, cfg);
        rep.nonconverged += e.nonconverged ? 1 : 0;
        rep.entries.push_back(std::move(e));
      }
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

// --- CSV -----------------------------------------------------------------------

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string csv_text(const CampaignReport& report) {
  std::ostringstream os;
  os << "experiment,p,variant_a,variant_b,value_a,value_b,ratio,witness\n";
  for (const auto& e : report.entries)
    for (const auto& r : e.ratios) {
      os << csv_field(e.experiment) << ',' << format_number(e.p) << ',' << csv_field(r.a) << ','
         << csv_field(r.b) << ',' << format_number(r.value_a) << ',' << format_number(r.value_b) << ','
         << (r.degenerate ? std::string() : format_number(r.ratio)) << ','
         << csv_field(r.witness_a + " ; " + r.witness_b) << '\n';
    }
  return os.str();
}

void emit_csv(const CampaignReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << csv_text(report);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace bmolab
