#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace serialmon::detect {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// z = r^T Sigma^-1 r.
double test_measure(const VectorXd& r, const MatrixXd& sigma_inv);

/// Bad-Data threshold tau_z = 2 P^-1(s/2, 1 - alpha), the chi-square(s)
/// upper-alpha point.
double chi_square_threshold(int sensors, double alpha);

/// Memoryless runtime estimator psi + (zeta - psi) / ell.
double mre_update(double psi_hat, bool alarm, double ell);

/// Z = |Phi^-1(beta / 2)|.
double z_score_from_beta(double beta);

struct RateBounds {
  double lower = 0.0;
  double upper = 1.0;
  [[nodiscard]] bool contains(double rate) const { return rate >= lower && rate <= upper; }
};

/// expected +/- Z sqrt(expected (1 - expected) / (2 ell - 1)), clamped to [0, 1].
RateBounds rate_bounds(double expected, double ell, double z_score);

/// Magnitude-alarm bounds [Omega-, Omega+] around psi_des.
inline RateBounds magnitude_bounds(double psi_des, double ell, double z_score) {
  return rate_bounds(psi_des, ell, z_score);
}

/// Sign-switch bounds 2/3 +/- Z sqrt(16 / (90 (2 ell - 1))).
RateBounds sign_bounds(double ell, double z_score);

/// Sign with |d| < 1e-300 treated as zero.
int sign_of(double d);

enum class DetectorId : std::size_t { kBadData = 0, kCusum, kCusign, kSerialMagnitude, kSerialSign };
inline constexpr std::size_t kDetectorCount = 5;
inline constexpr std::array<DetectorId, kDetectorCount> kAllDetectors = {
    DetectorId::kBadData, DetectorId::kCusum, DetectorId::kCusign, DetectorId::kSerialMagnitude,
    DetectorId::kSerialSign};

std::string_view detector_name(DetectorId id);

/// MRE alarm-rate estimate with detection bounds. `detected` latches at the
/// first update that leaves the bounds; the rate keeps updating afterwards.
class RateMonitor {
 public:
  RateMonitor() = default;
  RateMonitor(double expected_rate, double ell, RateBounds bounds);

  void update(bool alarm, std::int64_t k);

  [[nodiscard]] double rate() const { return rate_; }
  [[nodiscard]] double expected_rate() const { return expected_; }
  [[nodiscard]] double ell() const { return ell_; }
  [[nodiscard]] const RateBounds& bounds() const { return bounds_; }
  [[nodiscard]] bool in_bounds() const { return bounds_.contains(rate_); }
  [[nodiscard]] bool detected() const { return detection_time_.has_value(); }
  [[nodiscard]] std::optional<std::int64_t> detection_time() const { return detection_time_; }

  /// One-step look-ahead: an alarm now would push the rate above the upper bound.
  [[nodiscard]] bool alarm_would_exceed_upper() const;
  /// One-step look-ahead: no alarm now would push the rate below the lower bound.
  [[nodiscard]] bool silence_would_cross_lower() const;

 private:
  double expected_ = 0.0;
  double ell_ = 100.0;
  RateBounds bounds_;
  double rate_ = 0.0;
  std::optional<std::int64_t> detection_time_;
};

class BadDataDetector {
 public:
  BadDataDetector() = default;
  explicit BadDataDetector(double threshold);
  [[nodiscard]] bool step(double z) const { return z > threshold_; }
  [[nodiscard]] double threshold() const { return threshold_; }

 private:
  double threshold_ = 0.0;
};

struct CusumParams {
  double bias = 0.0;       ///< b, subtracted from each z
  double threshold = 0.0;  ///< tau_c
};

/// S <- max(0, S + z - b); alarm and reset to 0 when S > tau_c.
class CusumDetector {
 public:
  CusumDetector() = default;
  explicit CusumDetector(CusumParams params);

  bool step(double z);
  [[nodiscard]] double accumulator() const { return sum_; }
  [[nodiscard]] const CusumParams& params() const { return params_; }
  /// The next step alarms iff z exceeds this level.
  [[nodiscard]] double alarm_level() const { return params_.threshold + params_.bias - sum_; }

 private:
  CusumParams params_;
  double sum_ = 0.0;
};

/// Per-sensor saturating sign walk S_i <- S_i + sgn(r_i); a sensor alarms and
/// resets when |S_i| reaches the limit. The detector alarms if any sensor does.
class CusignDetector {
 public:
  CusignDetector() = default;
  CusignDetector(int sensors, int limit);

  bool step(const VectorXd& r);
  [[nodiscard]] bool would_alarm(const VectorXd& r) const;
  [[nodiscard]] int limit() const { return limit_; }
  [[nodiscard]] const std::vector<int>& accumulators() const { return sums_; }

 private:
  int limit_ = 0;
  std::vector<int> sums_;
};

/// Magnitude and sign-switch monitor of d_k = z_k - z_{k-1}.
class SerialDetector {
 public:
  struct Output {
    double d = 0.0;
    bool has_difference = false;  ///< a previous z existed
    bool active = false;          ///< past warm-up: alarms and MRE updates are live
    bool magnitude_alarm = false;
    bool sign_alarm = false;
  };

  SerialDetector() = default;
  SerialDetector(double tau_d, int warmup);

  Output step(double z);

  [[nodiscard]] double threshold() const { return tau_d_; }
  [[nodiscard]] std::optional<double> previous_z() const { return z_prev_; }
  /// Last nonzero sign of d, or 0 before any.
  [[nodiscard]] int stored_sign() const { return stored_sign_; }
  /// Whether the next step produces alarms.
  [[nodiscard]] bool next_step_active() const { return seen_ >= warmup_; }

 private:
  double tau_d_ = 0.0;
  int warmup_ = 2;
  std::int64_t seen_ = 0;
  std::optional<double> z_prev_;
  int stored_sign_ = 0;
};

/// Magnitude rule in isolation: d = z - z_prev, alarm iff |d| > tau_d.
struct MagnitudeOutcome {
  double d;
  bool alarm;
};
MagnitudeOutcome serial_magnitude_step(double z, double z_prev, double tau_d);

/// Sign-switch rule in isolation: alarm iff sgn(d) = -stored_sign != 0.
/// Updates `stored_sign` unless d is zero.
bool serial_sign_step(double d, int& stored_sign);

/// Runs count of a window of differences against N((2W-1)/3, (16W-29)/90).
struct RunsResult {
  int runs = 0;
  int length = 0;
  double expected = 0.0;
  double variance = 0.0;
  double zscore = 0.0;
};
/// Zeros are skipped; throws DomainError for fewer than 2 nonzero values.
RunsResult sir_runs_oracle(std::span<const double> differences);

struct DetectorConfig {
  int sensors = 2;
  double alpha = 0.2;            ///< Bad-Data alarm rate
  double psi_des = 0.2;          ///< serial magnitude alarm rate
  double ell = 100.0;            ///< MRE pseudo-window
  double z_score = 3.0;          ///< bound width in standard deviations
  CusumParams cusum;             ///< threshold must be calibrated (> 0)
  double cusum_rate = 0.2;       ///< expected CUSUM alarm rate
  int cusign_limit = 0;          ///< must be calibrated (>= 1)
  double cusign_rate = 0.0833;   ///< expected CUSIGN alarm rate
  int warmup = 2;
  /// Magnitude threshold; computed from the variance-gamma law when unset.
  std::optional<double> tau_d;

  void validate() const;
};

struct Verdict {
  bool alarm = false;
  bool updated = false;
  double rate = 0.0;
  bool in_bounds = true;
  bool detected = false;
  std::optional<std::int64_t> detection_time;
};

struct BankOutput {
  double z = 0.0;
  double d = 0.0;
  bool has_difference = false;
  std::array<Verdict, kDetectorCount> verdicts;

  [[nodiscard]] const Verdict& operator[](DetectorId id) const {
    return verdicts[static_cast<std::size_t>(id)];
  }
};

/// All five detectors over one residual stream, advanced in lockstep.
class DetectorBank {
 public:
  DetectorBank(const DetectorConfig& config, MatrixXd sigma_inv);

  BankOutput step(const VectorXd& r, std::int64_t k);

  [[nodiscard]] const DetectorConfig& config() const { return config_; }
  [[nodiscard]] const MatrixXd& sigma_inv() const { return sigma_inv_; }
  [[nodiscard]] const BadDataDetector& bad_data() const { return bad_data_; }
  [[nodiscard]] const CusumDetector& cusum() const { return cusum_; }
  [[nodiscard]] const CusignDetector& cusign() const { return cusign_; }
  [[nodiscard]] const SerialDetector& serial() const { return serial_; }
  [[nodiscard]] const RateMonitor& monitor(DetectorId id) const {
    return monitors_[static_cast<std::size_t>(id)];
  }

 private:
  DetectorConfig config_;
  MatrixXd sigma_inv_;
  BadDataDetector bad_data_;
  CusumDetector cusum_;
  CusignDetector cusign_;
  SerialDetector serial_;
  std::array<RateMonitor, kDetectorCount> monitors_;
};

}  // namespace serialmon::detect
