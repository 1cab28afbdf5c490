#include "serialmon/detect.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "serialmon/errors.hpp"
#include "serialmon/specfun.hpp"
#include "serialmon/vargamma.hpp"

namespace serialmon::detect {

double test_measure(const VectorXd& r, const MatrixXd& sigma_inv) {
  return std::max(0.0, r.dot(sigma_inv * r));
}

double chi_square_threshold(int sensors, double alpha) {
  if (sensors < 1) throw DomainError("chi_square_threshold: need at least one sensor");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("chi_square_threshold: alpha must lie in (0, 1)");
  return 2.0 * specfun::inv_reg_lower_gamma(0.5 * sensors, 1.0 - alpha);
}

double mre_update(double psi_hat, bool alarm, double ell) {
  return psi_hat + ((alarm ? 1.0 : 0.0) - psi_hat) / ell;
}

double z_score_from_beta(double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("z_score_from_beta: beta must lie in (0, 1)");
  return std::abs(specfun::std_normal_quantile(0.5 * beta));
}

RateBounds rate_bounds(double expected, double ell, double z_score) {
  if (!(expected > 0.0 && expected < 1.0)) throw DomainError("rate_bounds: expected rate must lie in (0, 1)");
  if (!(ell >= 1.0)) throw DomainError("rate_bounds: ell must be >= 1");
  if (!(z_score >= 0.0)) throw DomainError("rate_bounds: z-score must be nonnegative");
  const double half = z_score * std::sqrt(expected * (1.0 - expected) / (2.0 * ell - 1.0));
  return {std::max(0.0, expected - half), std::min(1.0, expected + half)};
}

RateBounds sign_bounds(double ell, double z_score) {
  if (!(ell >= 1.0)) throw DomainError("sign_bounds: ell must be >= 1");
  if (!(z_score >= 0.0)) throw DomainError("sign_bounds: z-score must be nonnegative");
  const double half = z_score * std::sqrt(16.0 / (90.0 * (2.0 * ell - 1.0)));
  return {std::max(0.0, 2.0 / 3.0 - half), std::min(1.0, 2.0 / 3.0 + half)};
}

int sign_of(double d) {
  if (std::abs(d) < 1e-300) return 0;
  return d > 0.0 ? 1 : -1;
}

std::string_view detector_name(DetectorId id) {
  switch (id) {
    case DetectorId::kBadData: return "bd";
    case DetectorId::kCusum: return "cusum";
    case DetectorId::kCusign: return "cusign";
    case DetectorId::kSerialMagnitude: return "serial_mag";
    case DetectorId::kSerialSign: return "serial_sign";
  }
  return "unknown";
}

RateMonitor::RateMonitor(double expected_rate, double ell, RateBounds bounds)
    : expected_(expected_rate), ell_(ell), bounds_(bounds), rate_(expected_rate) {}

void RateMonitor::update(bool alarm, std::int64_t k) {
  rate_ = mre_update(rate_, alarm, ell_);
  if (!detection_time_ && !bounds_.contains(rate_)) detection_time_ = k;
}

bool RateMonitor::alarm_would_exceed_upper() const {
  return bounds_.upper - rate_ - (1.0 - rate_) / ell_ < 0.0;
}

bool RateMonitor::silence_would_cross_lower() const {
  return bounds_.lower - rate_ + rate_ / ell_ > 0.0;
}

BadDataDetector::BadDataDetector(double threshold) : threshold_(threshold) {
  if (!(threshold > 0.0)) throw DomainError("BadDataDetector: threshold must be positive");
}

CusumDetector::CusumDetector(CusumParams params) : params_(params) {
  if (!(params.threshold > 0.0)) {
    throw ConfigError("CUSUM is uncalibrated: threshold tau_c must be positive");
  }
}

bool CusumDetector::step(double z) {
  sum_ = std::max(0.0, sum_ + z - params_.bias);
  if (sum_ > params_.threshold) {
    sum_ = 0.0;
    return true;
  }
  return false;
}

CusignDetector::CusignDetector(int sensors, int limit) : limit_(limit), sums_(sensors, 0) {
  if (limit < 1) throw ConfigError("CUSIGN is uncalibrated: saturation limit must be >= 1");
  if (sensors < 1) throw ConfigError("CUSIGN: need at least one sensor");
}

bool CusignDetector::step(const VectorXd& r) {
  bool alarm = false;
  for (std::size_t i = 0; i < sums_.size(); ++i) {
    sums_[i] += sign_of(r[static_cast<Eigen::Index>(i)]);
    if (std::abs(sums_[i]) >= limit_) {
      alarm = true;
      sums_[i] = 0;
    }
  }
  return alarm;
}

bool CusignDetector::would_alarm(const VectorXd& r) const {
  for (std::size_t i = 0; i < sums_.size(); ++i) {
    if (std::abs(sums_[i] + sign_of(r[static_cast<Eigen::Index>(i)])) >= limit_) return true;
  }
  return false;
}

MagnitudeOutcome serial_magnitude_step(double z, double z_prev, double tau_d) {
  const double d = z - z_prev;
  return {d, std::abs(d) > tau_d};
}

bool serial_sign_step(double d, int& stored_sign) {
  const int sign = sign_of(d);
  if (sign == 0) return false;
  const bool alarm = stored_sign != 0 && sign == -stored_sign;
  stored_sign = sign;
  return alarm;
}

SerialDetector::SerialDetector(double tau_d, int warmup) : tau_d_(tau_d), warmup_(warmup) {
  if (!(tau_d > 0.0)) throw DomainError("SerialDetector: tau_d must be positive");
  if (warmup < 2) throw ConfigError("SerialDetector: warmup must be >= 2");
}

SerialDetector::Output SerialDetector::step(double z) {
  Output out;
  out.active = seen_ >= warmup_;
  if (z_prev_) {
    const auto magnitude = serial_magnitude_step(z, *z_prev_, tau_d_);
    out.d = magnitude.d;
    out.has_difference = true;
    const bool switched = serial_sign_step(magnitude.d, stored_sign_);
    if (out.active) {
      out.magnitude_alarm = magnitude.alarm;
      out.sign_alarm = switched;
    }
  }
  z_prev_ = z;
  ++seen_;
  return out;
}

RunsResult sir_runs_oracle(std::span<const double> differences) {
  if (differences.size() < 2) throw DomainError("sir_runs_oracle: window needs W >= 2");
  RunsResult out;
  int previous = 0;
  for (double d : differences) {
    const int s = sign_of(d);
    if (s == 0) continue;
    ++out.length;
    if (s != previous) ++out.runs;
    previous = s;
  }
  if (out.length == 0) throw DomainError("sir_runs_oracle: all-zero window is degenerate");
  const double w = out.length;
  out.expected = (2.0 * w - 1.0) / 3.0;
  out.variance = (16.0 * w - 29.0) / 90.0;
  out.zscore = out.variance > 0.0 ? (out.runs - out.expected) / std::sqrt(out.variance) : 0.0;
  return out;
}

void DetectorConfig::validate() const {
  auto rate = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string("detector.") + name + " must lie in (0, 1)");
  };
  if (sensors < 2) throw ConfigError("detector: need at least two sensors");
  rate(alpha, "alpha");
  rate(psi_des, "psi_des_M");
  rate(cusum_rate, "cusum.rate");
  rate(cusign_rate, "cusign.rate");
  if (!(ell >= 10.0)) throw ConfigError("detector.ell must be >= 10");
  if (!(z_score >= 0.0) || !std::isfinite(z_score)) throw ConfigError("detector.z must be >= 0");
  if (!(cusum.bias > 0.0)) throw ConfigError("detector.cusum.b must be positive");
  if (!(cusum.threshold > 0.0)) throw ConfigError("detector.cusum.tau must be calibrated (> 0)");
  if (cusign_limit < 1) throw ConfigError("detector.cusign.T must be calibrated (>= 1)");
  if (warmup < 2) throw ConfigError("detector.warmup must be >= 2");
  if (tau_d && !(*tau_d > 0.0)) throw ConfigError("detector.tau_d must be positive");
}

DetectorBank::DetectorBank(const DetectorConfig& config, MatrixXd sigma_inv)
    : config_(config), sigma_inv_(std::move(sigma_inv)) {
  config_.validate();
  if (sigma_inv_.rows() != config_.sensors || sigma_inv_.cols() != config_.sensors) {
    throw ConfigError("detector: Sigma^-1 dimension does not match sensor count");
  }
  bad_data_ = BadDataDetector(chi_square_threshold(config_.sensors, config_.alpha));
  cusum_ = CusumDetector(config_.cusum);
  cusign_ = CusignDetector(config_.sensors, config_.cusign_limit);
  const double tau_d = config_.tau_d ? *config_.tau_d
                                     : vargamma::magnitude_threshold(config_.sensors, config_.psi_des);
  serial_ = SerialDetector(tau_d, config_.warmup);

  const double ell = config_.ell;
  const double z = config_.z_score;
  auto at = [&](DetectorId id) -> RateMonitor& { return monitors_[static_cast<std::size_t>(id)]; };
  at(DetectorId::kBadData) = RateMonitor(config_.alpha, ell, rate_bounds(config_.alpha, ell, z));
  at(DetectorId::kCusum) = RateMonitor(config_.cusum_rate, ell, rate_bounds(config_.cusum_rate, ell, z));
  at(DetectorId::kCusign) =
      RateMonitor(config_.cusign_rate, ell, rate_bounds(config_.cusign_rate, ell, z));
  at(DetectorId::kSerialMagnitude) =
      RateMonitor(config_.psi_des, ell, magnitude_bounds(config_.psi_des, ell, z));
  at(DetectorId::kSerialSign) = RateMonitor(2.0 / 3.0, ell, sign_bounds(ell, z));
}

BankOutput DetectorBank::step(const VectorXd& r, std::int64_t k) {
  BankOutput out;
  out.z = test_measure(r, sigma_inv_);
  auto record = [&](DetectorId id, bool alarm, bool updated) {
    auto& monitor = monitors_[static_cast<std::size_t>(id)];
    if (updated) monitor.update(alarm, k);
    auto& v = out.verdicts[static_cast<std::size_t>(id)];
    v.alarm = updated && alarm;
    v.updated = updated;
    v.rate = monitor.rate();
    v.in_bounds = monitor.in_bounds();
    v.detected = monitor.detected();
    v.detection_time = monitor.detection_time();
  };
  record(DetectorId::kBadData, bad_data_.step(out.z), true);
  record(DetectorId::kCusum, cusum_.step(out.z), true);
  record(DetectorId::kCusign, cusign_.step(r), true);
  const auto serial = serial_.step(out.z);
  out.d = serial.d;
  out.has_difference = serial.has_difference;
  record(DetectorId::kSerialMagnitude, serial.magnitude_alarm, serial.active);
  record(DetectorId::kSerialSign, serial.sign_alarm, serial.active);
  return out;
}

}  // namespace serialmon::detect
