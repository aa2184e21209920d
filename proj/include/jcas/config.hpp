#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jcas/mimo.hpp"
#include "jcas/trainer.hpp"

namespace jcas {

/// Parsed key-value config with [section] headers. Keys are "section.key".
struct ConfigFile {
  std::map<std::string, std::string> values;
  std::string raw;  // original bytes, hashed into output metadata

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key) const;                  // throws naming the field
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_num(const std::string& key) const;
  double get_num_or(const std::string& key, double fallback) const;
  std::vector<double> get_pair(const std::string& key) const;  // two numbers
};

ConfigFile parse_config(const std::string& path);
ConfigFile parse_config_text(const std::string& text);

/// Everything one experiment run needs.
struct ExperimentConfig {
  ScenarioConfig scenario;
  TrainPlan plan;
  ModMode mode = ModMode::qam;
  double apsk_r2 = 1.0;
  std::string out_dir;
  std::uint64_t seed = 1;
  std::optional<MimoScenario> mimo;  // present if [mimo] section given
  std::uint64_t config_hash = 0;
};

/// Builds the run description, validating invariants; missing required
/// fields raise errors naming the "section.key" path. The output directory
/// falls back to the JCAS_OUT_DIR environment variable.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from_text(const std::string& text);

}  // namespace jcas
