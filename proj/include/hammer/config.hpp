#pragma once

#include "hammer/env.hpp"
#include "hammer/eval.hpp"
#include "hammer/icem.hpp"
#include "hammer/ppo.hpp"

#include <json.hpp>

#include <filesystem>
#include <string_view>

namespace hammer {

/// Parses the TOML subset used by the config files: [section] headers (dotted
/// names nest), key = value with strings, booleans, integers, floats and
/// arrays of those, and # comments. Arrays may span lines.
nlohmann::json parse_toml(std::string_view text);

struct EvalSettings {
  int episodes = 100;
  std::uint64_t episode_seed = 2024;
  int lockstep = 100;
  Protocol protocol = Protocol::Fixed;
  int sequential_targets = 100;

  StudyConfig study() const { return {protocol, lockstep, sequential_targets}; }
};

struct DataSettings {
  std::vector<double> session_minutes{21.0, 23.0, 32.0};
  double holdout_minutes = 8.0;  // taken from the end of the last session
};

struct HammerConfig {
  std::uint64_t seed = 0;
  EnvConfig env;
  PlantParams plant;
  ExciteConfig excite;
  DataSettings data;
  DynModelSpec model;
  TrainConfig train;
  int search_budget = 20;
  PpoConfig ppo;
  IcemConfig icem;
  EvalSettings eval;

  /// Checks every module's invariants; throws ValidationError.
  void validate() const;
};

/// Starts from the built-in defaults and applies the document; unknown sections
/// or keys are rejected.
HammerConfig config_from_json(const nlohmann::json& doc);
HammerConfig load_config(const std::filesystem::path& path);
/// Full snapshot of every setting (round-trips through config_from_json).
nlohmann::json config_to_json(const HammerConfig& cfg);

}  // namespace hammer
