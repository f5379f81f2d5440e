#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bmolab/bmo.hpp"
#include "bmolab/commutator.hpp"
#include "bmolab/grid.hpp"
#include "bmolab/reducing.hpp"
#include "json.hpp"

namespace bmolab {

inline constexpr int kSchemaVersion = 1;

/// One corpus element: generator descriptors (see generate()) for U, V, B.
/// Descriptors without a "seed" receive config.seed + index.
struct CorpusElement {
  std::string name;
  nlohmann::json u;
  nlohmann::json v;
  nlohmann::json b;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::string name = "campaign";
  GridSpec grid{1, 1, 4};
  std::uint64_t seed = 0;
  std::vector<double> p{2.0};
  std::string family = "dyadic";
  ReducingMode mode = ReducingMode::john;
  JohnOptions john = JohnOptions::bulk();
  OpNormOptions opnorm;
  std::vector<CorpusElement> corpus;
  /// Any of "ap", "bmo", "lower", "upper", run in this order per element.
  std::vector<std::string> experiments;
  std::string report_path;  // optional
  std::string csv_path;     // optional
};

/// Strict parsing: unknown keys and wrong types raise ConfigError with the
/// JSON path of the offending entry.
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// One experiment on one corpus element at one p.
struct CampaignEntry {
  std::string experiment;  // "<kind>:<element>"
  double p = 2.0;
  nlohmann::json result;
  std::vector<RatioEntry> ratios;  // flattened into the CSV
  bool nonconverged = false;
  double seconds = 0.0;
};

struct CampaignReport {
  int schema_version = kSchemaVersion;
  std::string name;
  nlohmann::json environment;
  nlohmann::json config;
  std::vector<CampaignEntry> entries;
  int nonconverged = 0;
  double seconds = 0.0;
};

/// Everything but wall-clock timings goes under stable keys; timings live
/// in "timings" so that reports can be compared byte for byte without them.
void to_json(nlohmann::json& j, const CampaignReport& r);
nlohmann::json without_timings(const nlohmann::json& report);

nlohmann::json environment_fingerprint();

CampaignReport run_campaign(const ExperimentConfig& cfg);

/// Header: experiment,p,variant_a,variant_b,value_a,value_b,ratio,witness.
/// Numbers use 17 significant digits; degenerate ratios are left empty.
void emit_csv(const CampaignReport& report, const std::filesystem::path& path);
std::string csv_text(const CampaignReport& report);

/// Shortest locale-independent text with 17 significant digits.
std::string format_number(double v);

}  // namespace bmolab
