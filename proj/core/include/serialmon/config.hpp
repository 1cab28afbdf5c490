#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "serialmon/detect.hpp"
#include "serialmon/plant.hpp"
#include "serialmon/redteam.hpp"

namespace serialmon {

/// Everything needed to run one simulation.
struct Scenario {
  std::string name = "scenario";
  plant::PlantModel model;
  plant::Controller controller;
  Eigen::VectorXd initial_state;
  /// CUSUM threshold <= 0 or CUSIGN limit <= 0 means "calibrate before running".
  detect::DetectorConfig detector;
  std::vector<redteam::AttackPlan> attacks;
  /// Per-attack seed overrides; unset entries derive from the master seed.
  std::vector<std::optional<std::uint64_t>> attack_seeds;
  redteam::SamplingLaw sampling = redteam::SamplingLaw::kUniform;
  std::optional<double> z_cap;
  std::int64_t steps = 0;
  std::uint64_t seed = 1;
  /// Seeds used by sweeps; defaults to {seed}.
  std::vector<std::uint64_t> seeds;
  std::int64_t calibration_samples = 1'000'000;

  /// Throws ConfigError with the offending key in the message.
  void validate() const;
};

/// Parses JSON-syntax scenario text. Throws ConfigError.
Scenario parse_scenario(std::string_view text);

/// Reads and parses a scenario file. Throws ConfigError.
Scenario load_scenario(const std::filesystem::path& path);

/// Reads a whole text file. Throws ConfigError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

/// Returns `text` with the dotted key (e.g. "detector.ell") set to `value`.
/// Throws ConfigError when the text is not a JSON object or the key path
/// crosses a non-object.
std::string set_config_value(std::string_view text, std::string_view key, double value);

/// Keys accepted by set_config_value for sweeps.
bool is_sweepable_key(std::string_view key);

}  // namespace serialmon
