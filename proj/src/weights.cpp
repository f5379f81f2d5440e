#include "bmolab/weights.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "bmolab/error.hpp"

namespace bmolab {

namespace {

constexpr double kPi = std::numbers::pi;

// Cell-centre coordinate of every axis for a linear cell index.
std::vector<double> centre(const GridSpec& g, std::size_t index) {
  const auto multi = cell_multi_index(g, index);
  const double h = 1.0 / g.cells_per_axis();
  std::vector<double> x(multi.size());
  for (std::size_t a = 0; a < multi.size(); ++a) x[a] = (multi[a] + 0.5) * h;
  return x;
}

Matrix random_matrix(int d, std::mt19937_64& rng, bool symmetric) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = n01(rng);
  if (symmetric) m = 0.5 * (m + m.transpose());
  return m;
}

// Random nonzero integer frequency vector with entries in [-2, 2], restricted
// to the axes in [begin, end).
std::vector<int> random_frequency(int axes, int begin, int end, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(-2, 2);
  std::vector<int> k(axes, 0);
  bool nonzero = false;
  while (!nonzero) {
    for (int a = begin; a < end; ++a) {
      k[a] = pick(rng);
      nonzero = nonzero || k[a] != 0;
    }
  }
  return k;
}

struct TrigTerm {
  Matrix coeff;
  std::vector<int> freq;
  double phase = 0.0;
};

std::vector<TrigTerm> random_terms(int d, int axes, int begin, int end, int count, bool symmetric,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ph(0.0, 2.0 * kPi);
  std::vector<TrigTerm> terms;
  for (int j = 0; j < count; ++j) {
    TrigTerm t;
    t.coeff = random_matrix(d, rng, symmetric);
    const double n = op_norm(t.coeff);
    if (n > 0) t.coeff *= 1.0 / n;
    t.freq = random_frequency(axes, begin, end, rng);
    t.phase = ph(rng);
    terms.push_back(std::move(t));
  }
  return terms;
}

Matrix eval_terms(const std::vector<TrigTerm>& terms, const std::vector<double>& x, int d) {
  Matrix s(d, d);
  for (const auto& t : terms) {
    double arg = t.phase;
    for (std::size_t a = 0; a < x.size(); ++a) arg += 2.0 * kPi * t.freq[a] * x[a];
    s += std::cos(arg) * t.coeff;
  }
  return s;
}

void append(std::vector<double>& out, const Matrix& m) {
  out.insert(out.end(), m.data().begin(), m.data().end());
}

double get_or(const nlohmann::json& j, const char* key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

}  // namespace

std::string to_string(FieldKind k) { return k == FieldKind::weight ? "weight" : "symbol"; }

FieldKind parse_field_kind(const std::string& s) {
  if (s == "weight") return FieldKind::weight;
  if (s == "symbol") return FieldKind::symbol;
  throw ConfigError("kind", "expected weight or symbol, got '" + s + "'");
}

void to_json(nlohmann::json& j, const WeightManifest& m) {
  j = nlohmann::json{{"dims", {m.grid.n, m.grid.m}},
                     {"d", m.d},
                     {"L", m.grid.level},
                     {"kind", to_string(m.kind)},
                     {"generator", m.generator},
                     {"seed", m.seed},
                     {"endianness", m.endianness}};
}

void from_json(const nlohmann::json& j, WeightManifest& m) {
  m.grid.n = j.at("dims").at(0).get<int>();
  m.grid.m = j.at("dims").at(1).get<int>();
  m.grid.level = j.at("L").get<int>();
  m.grid.validate();
  m.d = j.at("d").get<int>();
  m.kind = parse_field_kind(j.at("kind").get<std::string>());
  m.generator = j.value("generator", nlohmann::json::object());
  m.seed = j.value("seed", std::uint64_t{0});
  m.endianness = j.value("endianness", std::string("little"));
}

WeightField WeightField::weight(const GridSpec& g, int d, std::vector<double> data, nlohmann::json generator,
                                std::uint64_t seed, double eig_floor) {
  g.validate();
  WeightField f;
  f.manifest_ = {g, d, FieldKind::weight, std::move(generator), seed, "little"};
  const std::size_t st = static_cast<std::size_t>(d) * d;
  if (d < 1 || d > kMaxDim || data.size() != g.cell_count() * st)
    throw ShapeMismatch("weight data does not match grid and dimension");
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const Matrix m = Matrix::from_data(d, d, std::span<const double>(data.data() + c * st, st));
    const HermitianPD pd(m, eig_floor);  // throws NotSymmetric / NonFinite
    if (pd.clamped()) ++f.clamped_;
    std::copy(pd.matrix().data().begin(), pd.matrix().data().end(), data.begin() + c * st);
  }
  f.data_ = std::move(data);
  return f;
}

WeightField WeightField::symbol(const GridSpec& g, int d, std::vector<double> data, nlohmann::json generator,
                                std::uint64_t seed) {
  g.validate();
  WeightField f;
  f.manifest_ = {g, d, FieldKind::symbol, std::move(generator), seed, "little"};
  if (d < 1 || d > kMaxDim || data.size() != g.cell_count() * static_cast<std::size_t>(d) * d)
    throw ShapeMismatch("symbol data does not match grid and dimension");
  for (double v : data)
    if (!std::isfinite(v)) throw NonFinite("non-finite symbol entry", v);
  f.data_ = std::move(data);
  return f;
}

Matrix WeightField::at(std::size_t i) const {
  if (i >= cell_count()) throw IndexOutOfRange("cell " + std::to_string(i) + " outside the grid");
  return Matrix::from_data(dim(), dim(), std::span<const double>(cell(i), stride()));
}

WeightField field_power(const WeightField& w, double s) {
  if (w.kind() != FieldKind::weight) throw ShapeMismatch("field_power needs a weight field");
  const int d = w.dim();
  std::vector<double> out(w.data().size());
  if (d == 1) {
    for (std::size_t c = 0; c < w.cell_count(); ++c) {
      const double v = std::pow(w.cell(c)[0], s);
      if (!std::isfinite(v) || v <= 0.0) throw NonFinite("scalar weight power is not finite", w.cell(c)[0]);
      out[c] = v;
    }
  } else {
    for (std::size_t c = 0; c < w.cell_count(); ++c) {
      const auto pw = hermitian_power(HermitianPD(w.at(c)), s);
      std::copy(pw.matrix().data().begin(), pw.matrix().data().end(), out.begin() + c * w.stride());
    }
  }
  nlohmann::json gen = {{"type", "power_of"}, {"exponent", s}, {"base", w.manifest().generator}};
  return WeightField::weight(w.grid(), d, std::move(out), std::move(gen), w.manifest().seed, 0.0);
}

WeightField transpose(const WeightField& b) {
  const int d = b.dim();
  std::vector<double> out(b.data().size());
  for (std::size_t c = 0; c < b.cell_count(); ++c)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out[c * b.stride() + i * d + j] = b.cell(c)[j * d + i];
  nlohmann::json gen = {{"type", "transpose"}, {"base", b.manifest().generator}};
  if (b.kind() == FieldKind::weight) return WeightField::weight(b.grid(), d, std::move(out), gen, b.manifest().seed);
  return WeightField::symbol(b.grid(), d, std::move(out), gen, b.manifest().seed);
}

WeightField scale(const WeightField& b, double t) {
  std::vector<double> out(b.data().begin(), b.data().end());
  for (double& v : out) v *= t;
  nlohmann::json gen = {{"type", "scaled"}, {"factor", t}, {"base", b.manifest().generator}};
  if (b.kind() == FieldKind::weight) return WeightField::weight(b.grid(), b.dim(), std::move(out), gen, b.manifest().seed);
  return WeightField::symbol(b.grid(), b.dim(), std::move(out), gen, b.manifest().seed);
}

double max_commutator(const WeightField& w) {
  const int d = w.dim();
  double best = 0.0;
  std::vector<double> ab(w.stride()), ba(w.stride());
  for (std::size_t x = 0; x < w.cell_count(); ++x)
    for (std::size_t y = x + 1; y < w.cell_count(); ++y) {
      kernel::matmul(w.cell(x), w.cell(y), ab.data(), d);
      kernel::matmul(w.cell(y), w.cell(x), ba.data(), d);
      for (std::size_t k = 0; k < ab.size(); ++k) ab[k] -= ba[k];
      best = std::max(best, std::sqrt(kernel::op_norm_sq(ab.data(), d)));
    }
  return best;
}

WeightField gen_power_weight(const GridSpec& g, const std::vector<double>& alpha, double p) {
  g.validate();
  if (static_cast<int>(alpha.size()) != g.axes())
    throw ConfigError("alpha", "need one exponent per axis (" + std::to_string(g.axes()) + ")");
  if (!(p > 1.0) || !std::isfinite(p)) throw WrongExponent("power weight needs 1 < p < inf");
  bool ap = true;
  for (double a : alpha) ap = ap && a > -1.0 && a < p - 1.0;
  std::vector<double> data(g.cell_count());
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto x = centre(g, c);
    double v = 1.0;
    for (std::size_t a = 0; a < x.size(); ++a) {
      const double dist = std::min(x[a], 1.0 - x[a]);
      v *= std::pow(dist, alpha[a]);
    }
    data[c] = std::max(v, kEigFloor);
  }
  nlohmann::json gen = {{"type", "power"}, {"alpha", alpha}, {"p", p}};
  auto f = WeightField::weight(g, 1, std::move(data), std::move(gen));
  f.flag_non_ap(!ap);
  return f;
}

WeightField gen_rotating_weight(const GridSpec& g, const RotatingSpec& spec) {
  g.validate();
  if (!(spec.lambda1 >= kEigFloor) || !(spec.lambda2 >= kEigFloor))
    throw ConfigError("lambda", "eigenvalue profile must be >= eig_floor");
  std::vector<int> k = spec.k;
  k.resize(g.axes(), 0);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> ph(0.0, 1.0);
  std::vector<double> phase1(g.axes()), phase2(g.axes());
  for (int a = 0; a < g.axes(); ++a) {
    phase1[a] = ph(rng);
    phase2[a] = ph(rng);
  }
  std::vector<double> data;
  data.reserve(g.cell_count() * 4);
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto x = centre(g, c);
    double theta = spec.theta0;
    double w1 = 0.0, w2 = 0.0;
    for (int a = 0; a < g.axes(); ++a) {
      theta += kPi * k[a] * x[a];
      w1 += std::cos(2.0 * kPi * (x[a] + phase1[a]));
      w2 += std::cos(2.0 * kPi * (x[a] + phase2[a]));
    }
    const double l1 = spec.lambda1 * std::exp(spec.wave1 * w1 / g.axes());
    const double l2 = spec.lambda2 * std::exp(spec.wave2 * w2 / g.axes());
    const double cs = std::cos(theta), sn = std::sin(theta);
    // Q diag(l1, l2) Q^T with Q = [[c, -s], [s, c]]
    const double a00 = cs * cs * l1 + sn * sn * l2;
    const double a01 = cs * sn * (l1 - l2);
    const double a11 = sn * sn * l1 + cs * cs * l2;
    data.insert(data.end(), {a00, a01, a01, a11});
  }
  nlohmann::json gen = {{"type", "rotating"},  {"lambda", {spec.lambda1, spec.lambda2}},
                        {"wave", {spec.wave1, spec.wave2}}, {"theta0", spec.theta0},
                        {"k", k},              {"seed", spec.seed}};
  return WeightField::weight(g, 2, std::move(data), std::move(gen), spec.seed);
}

WeightField gen_expsym_weight(const GridSpec& g, int d, double amplitude, int modes, std::uint64_t seed) {
  g.validate();
  if (d < 1 || d > 8) throw ConfigError("d", "expsym weights support 1 <= d <= 8");
  if (modes < 1) throw ConfigError("modes", "need at least one mode");
  std::mt19937_64 rng(seed);
  const auto terms = random_terms(d, g.axes(), 0, g.axes(), modes, true, rng);
  std::vector<double> data;
  data.reserve(g.cell_count() * static_cast<std::size_t>(d) * d);
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    Matrix h = eval_terms(terms, centre(g, c), d);
    h *= amplitude / modes;
    const auto e = eigen_symmetric(h);
    std::vector<double> ex(e.values.size());
    for (std::size_t i = 0; i < ex.size(); ++i) ex[i] = std::exp(e.values[i]);
    append(data, reconstruct(e, ex));
  }
  nlohmann::json gen = {{"type", "expsym"}, {"d", d}, {"amplitude", amplitude}, {"modes", modes}, {"seed", seed}};
  return WeightField::weight(g, d, std::move(data), std::move(gen), seed);
}

SymbolShape parse_symbol_shape(const std::string& s) {
  if (s == "constant") return SymbolShape::constant;
  if (s == "trig") return SymbolShape::trig;
  if (s == "checkerboard") return SymbolShape::checkerboard;
  if (s == "one_variable") return SymbolShape::one_variable;
  if (s == "separable") return SymbolShape::separable;
  throw ConfigError("shape", "unknown symbol shape '" + s + "'");
}

std::string to_string(SymbolShape s) {
  switch (s) {
    case SymbolShape::constant: return "constant";
    case SymbolShape::trig: return "trig";
    case SymbolShape::checkerboard: return "checkerboard";
    case SymbolShape::one_variable: return "one_variable";
    case SymbolShape::separable: return "separable";
  }
  return "?";
}

WeightField gen_symbol(const GridSpec& g, int d, SymbolShape shape, double amplitude, std::uint64_t seed) {
  g.validate();
  if (d < 1 || d > 8) throw ConfigError("d", "symbols support 1 <= d <= 8");
  std::mt19937_64 rng(seed);
  const int A = g.axes();
  const int split = g.n;
  std::vector<double> data;
  data.reserve(g.cell_count() * static_cast<std::size_t>(d) * d);

  // Coefficient used by constant and checkerboard; exactly `amplitude` for d = 1.
  Matrix base = d == 1 ? Matrix{{1.0}} : random_matrix(d, rng, false);
  base *= amplitude / op_norm(base);

  std::vector<TrigTerm> t1, t2;
  switch (shape) {
    case SymbolShape::trig: t1 = random_terms(d, A, 0, A, 3, false, rng); break;
    case SymbolShape::one_variable: t1 = random_terms(d, A, 0, split, 3, false, rng); break;
    case SymbolShape::separable:
      t1 = random_terms(d, A, 0, split, 2, false, rng);
      if (g.m > 0) t2 = random_terms(d, A, split, A, 2, false, rng);
      break;
    default: break;
  }
  const double norm1 = t1.empty() ? 1.0 : static_cast<double>(t1.size());
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    const auto x = centre(g, c);
    Matrix m(d, d);
    switch (shape) {
      case SymbolShape::constant: m = base; break;
      case SymbolShape::checkerboard: {
        int s = 0;
        for (double xa : x) s += static_cast<int>(std::floor(2.0 * xa));
        m = (s % 2 == 0 ? 1.0 : -1.0) * base;
        break;
      }
      case SymbolShape::trig:
      case SymbolShape::one_variable:
        m = (amplitude / norm1) * eval_terms(t1, x, d);
        break;
      case SymbolShape::separable:
        m = (amplitude / 4.0) * (eval_terms(t1, x, d) + (t2.empty() ? Matrix(d, d) : eval_terms(t2, x, d)));
        break;
    }
    append(data, m);
  }
  nlohmann::json gen = {{"type", "symbol"}, {"shape", to_string(shape)}, {"d", d}, {"amplitude", amplitude},
                        {"seed", seed}};
  return WeightField::symbol(g, d, std::move(data), std::move(gen), seed);
}

WeightField generate(const GridSpec& g, const nlohmann::json& desc) {
  const std::string type = desc.value("type", std::string());
  const std::uint64_t seed = desc.value("seed", std::uint64_t{0});
  try {
    if (type == "power") {
      return gen_power_weight(g, desc.at("alpha").get<std::vector<double>>(), get_or(desc, "p", 2.0));
    }
    if (type == "rotating") {
      RotatingSpec s;
      if (desc.contains("lambda")) {
        s.lambda1 = desc.at("lambda").at(0).get<double>();
        s.lambda2 = desc.at("lambda").at(1).get<double>();
      }
      if (desc.contains("wave")) {
        s.wave1 = desc.at("wave").at(0).get<double>();
        s.wave2 = desc.at("wave").at(1).get<double>();
      }
      s.theta0 = get_or(desc, "theta0", 0.0);
      if (desc.contains("k")) s.k = desc.at("k").get<std::vector<int>>();
      s.seed = seed;
      return gen_rotating_weight(g, s);
    }
    if (type == "expsym") {
      return gen_expsym_weight(g, desc.value("d", 2), get_or(desc, "amplitude", 1.0), desc.value("modes", 3), seed);
    }
    if (type == "identity") {
      const int d = desc.value("d", 1);
      std::vector<double> data;
      for (std::size_t c = 0; c < g.cell_count(); ++c) append(data, Matrix::identity(d));
      return WeightField::weight(g, d, std::move(data), desc, seed);
    }
    if (type == "symbol") {
      return gen_symbol(g, desc.value("d", 1), parse_symbol_shape(desc.value("shape", std::string("trig"))),
                        get_or(desc, "amplitude", 1.0), seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("generator", e.what());
  }
  throw ConfigError("generator.type", "unknown generator '" + type + "'");
}

WeightField dual_weight(const WeightField& w, double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw WrongExponent("dual weight needs 1 < p < inf");
  auto out = field_power(w, -1.0 / (p - 1.0));
  return out;
}

WeightField slice(const WeightField& f, int factor, int coord) {
  const GridSpec& g = f.grid();
  if (factor != 1 && factor != 2) throw IndexOutOfRange("factor must be 1 or 2");
  if (g.m == 0) throw IndexOutOfRange("slicing needs a biparameter field");
  const int fixed_axes = g.factor_axes(factor);
  const int N = g.cells_per_axis();
  std::size_t fixed_cells = 1;
  for (int a = 0; a < fixed_axes; ++a) fixed_cells *= static_cast<std::size_t>(N);
  if (coord < 0 || static_cast<std::size_t>(coord) >= fixed_cells)
    throw IndexOutOfRange("slice coordinate " + std::to_string(coord) + " outside the factor grid");

  GridSpec sg{g.factor_axes(factor == 1 ? 2 : 1), 0, g.level};
  // Multi-index of the fixed coordinate within its factor (row-major).
  std::vector<int> fixed(fixed_axes);
  {
    std::size_t c = static_cast<std::size_t>(coord);
    for (int a = fixed_axes - 1; a >= 0; --a) {
      fixed[a] = static_cast<int>(c % N);
      c /= N;
    }
  }
  std::vector<double> data;
  data.reserve(sg.cell_count() * f.stride());
  std::vector<int> full(g.axes());
  for (std::size_t c = 0; c < sg.cell_count(); ++c) {
    const auto free = cell_multi_index(sg, c);
    if (factor == 1) {
      for (int a = 0; a < g.n; ++a) full[a] = fixed[a];
      for (int a = 0; a < g.m; ++a) full[g.n + a] = free[a];
    } else {
      for (int a = 0; a < g.n; ++a) full[a] = free[a];
      for (int a = 0; a < g.m; ++a) full[g.n + a] = fixed[a];
    }
    const double* src = f.cell(cell_index(g, full));
    data.insert(data.end(), src, src + f.stride());
  }
  nlohmann::json gen = {{"type", "slice"}, {"factor", factor}, {"coord", coord}, {"base", f.manifest().generator}};
  if (f.kind() == FieldKind::weight) return WeightField::weight(sg, f.dim(), std::move(data), gen, f.manifest().seed, 0.0);
  return WeightField::symbol(sg, f.dim(), std::move(data), gen, f.manifest().seed);
}

std::string encode(const WeightField& f) {
  std::string out = nlohmann::json(f.manifest()).dump();
  out.push_back('\n');
  out.reserve(out.size() + f.data().size() * 8);
  for (double v : f.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
  return out;
}

WeightField decode(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError("missing manifest line terminator", bytes.size());
  WeightManifest m;
  try {
    m = nlohmann::json::parse(bytes.substr(0, nl)).get<WeightManifest>();
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("bad manifest: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what(), 0);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad manifest: ") + e.what(), 0);
  }
  if (m.endianness != "little") throw FormatError("unsupported endianness '" + m.endianness + "'", 0);
  if (m.d < 1 || m.d > kMaxDim) throw FormatError("matrix dimension out of range", 0);
  const std::size_t count = m.grid.cell_count() * static_cast<std::size_t>(m.d) * m.d;
  const std::size_t begin = nl + 1;
  const std::size_t have = bytes.size() - begin;
  if (have < count * 8) throw FormatError("payload truncated: expected " + std::to_string(count * 8) + " bytes", bytes.size());
  if (have > count * 8) throw FormatError("trailing bytes after payload", begin + count * 8);
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[begin + i * 8 + b])) << (8 * b);
    data[i] = std::bit_cast<double>(bits);
  }
  // The stored weight was already floored; do not clamp again so the round
  // trip stays bit-exact.
  if (m.kind == FieldKind::weight) return WeightField::weight(m.grid, m.d, std::move(data), m.generator, m.seed, 0.0);
  return WeightField::symbol(m.grid, m.d, std::move(data), m.generator, m.seed);
}

void save(const std::filesystem::path& path, const WeightField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const auto bytes = encode(f);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

WeightField load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return decode(ss.str());
}

}  // namespace bmolab
