#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "serialmon/config.hpp"
#include "serialmon/detect.hpp"
#include "serialmon/plant.hpp"
#include "serialmon/redteam.hpp"

namespace serialmon::harness {

/// Monte Carlo alarm rate of CUSUM fed `samples` chi-square(s) test measures.
double cusum_alarm_rate(int sensors, const detect::CusumParams& params, std::int64_t samples,
                        std::uint64_t seed);

/// Monte Carlo alarm rate of CUSIGN fed residuals r ~ N(0, Sigma).
double cusign_alarm_rate(const Eigen::MatrixXd& sigma_sqrt, int limit, std::int64_t samples,
                         std::uint64_t seed);

struct CalibrationReport {
  std::string detector;
  double target = 0.0;
  double achieved = 0.0;
  double tolerance = 0.0;
  bool within_tolerance = false;
  std::int64_t samples = 0;
  int iterations = 0;
  double bias = 0.0;       ///< CUSUM b
  double threshold = 0.0;  ///< tau_z (bd), tau_c (cusum) or T (cusign)
  /// (T, rate) for every CUSIGN limit evaluated.
  std::vector<std::pair<int, double>> candidates;

  [[nodiscard]] std::string to_json() const;
};

/// Bisection on tau_c against a fixed set of chi-square samples. Throws
/// NumericError when the target is above the rate reachable as tau_c -> 0.
CalibrationReport calibrate_cusum(int sensors, double bias, double target, std::int64_t samples,
                                  std::uint64_t seed, double tolerance = 0.005);

/// Integer limit T whose Monte Carlo rate is closest to the target. Throws
/// NumericError when even T = 1 cannot reach the target.
CalibrationReport calibrate_cusign(const Eigen::MatrixXd& sigma_sqrt, double target,
                                   std::int64_t samples, std::uint64_t seed, double tolerance = 0.01,
                                   int max_limit = 64);

/// Closed-form Bad-Data threshold.
CalibrationReport calibrate_bad_data(int sensors, double alpha);

/// Returns the scenario with the CUSUM threshold and CUSIGN limit filled in
/// (calibrated from the scenario's calibration stream when unset), plus the
/// reports of any calibration performed.
struct CalibratedScenario {
  Scenario scenario;
  std::vector<CalibrationReport> reports;
};
CalibratedScenario calibrate_scenario(const Scenario& scenario);

/// Per-step view handed to observers.
struct StepView {
  const plant::SimStep& sim;
  const detect::BankOutput& bank;
  const redteam::Attacker::Output* attack;  ///< null when no attack is active
};

struct RunOptions {
  std::ostream* trace = nullptr;
  std::ostream* plot_data = nullptr;
  std::int64_t plot_stride = 50;
  std::function<void(const StepView&)> observer;
};

struct DetectorPhaseStats {
  double min_rate = 0.0;
  double max_rate = 0.0;
  double mean_rate = 0.0;
  double alarm_fraction = 0.0;   ///< alarms per updated step
  double in_bounds_fraction = 1.0;
  std::optional<std::int64_t> first_exit;
};

/// Maximal run of steps sharing one attack kind.
struct Phase {
  std::string label;
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t feasibility_violations = 0;
  std::array<DetectorPhaseStats, detect::kDetectorCount> detectors{};
};

struct DetectorSummary {
  detect::RateBounds bounds;
  double expected_rate = 0.0;
  std::optional<std::int64_t> detection_time;
  std::optional<double> attack_free_mean_rate;
};

struct RunSummary {
  std::string scenario;
  std::uint64_t seed = 0;
  std::int64_t steps = 0;
  double tau_z = 0.0;
  double tau_d = 0.0;
  detect::CusumParams cusum;
  int cusign_limit = 0;
  std::vector<CalibrationReport> calibration;
  std::array<DetectorSummary, detect::kDetectorCount> detectors{};
  std::vector<Phase> phases;
  std::int64_t feasibility_violations = 0;
  std::int64_t attacked_steps = 0;
  /// Lag-1 autocorrelation of each whitened residual component over attack-free steps.
  std::vector<double> residual_lag1_autocorrelation;
  bool residual_whiteness_warning = false;

  [[nodiscard]] const DetectorSummary& operator[](detect::DetectorId id) const {
    return detectors[static_cast<std::size_t>(id)];
  }
  [[nodiscard]] std::string to_json() const;
};

/// Runs plant, detectors and attacks step by step. Deterministic for a given
/// scenario. Calibrates detectors first when the scenario leaves them unset.
RunSummary run_scenario(const Scenario& scenario, const RunOptions& options = {});

/// Phases of a scenario: attack intervals and the attack-free gaps between them.
std::vector<Phase> scenario_phases(const Scenario& scenario);

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::optional<RunSummary> summary;
  std::string error;  ///< set when the run failed
};

/// Runs the base scenario once per (value, seed), in parallel. Rows come back
/// ordered by value then seed; a failing run yields a row with `error` set.
std::vector<SweepRow> sweep(std::string_view base_config, std::string_view axis,
                            std::span<const double> values, unsigned threads = 0);

/// One CSV row per sweep run: value, seed, status, then per detector
/// detected, detection_time and attack-free mean rate.
void write_sweep_csv(std::ostream& out, std::string_view axis, std::span<const SweepRow> rows);

}  // namespace serialmon::harness
