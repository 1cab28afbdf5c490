#include "serialmon/redteam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "serialmon/errors.hpp"
#include "serialmon/specfun.hpp"

namespace serialmon::redteam {
namespace {

using detect::DetectorBank;
using detect::DetectorId;
using detect::RateMonitor;

constexpr double kForceCost = 1e6;
constexpr double kGoalCost = 1e4;
constexpr double kPreferCost = 1e2;
constexpr double kOutsidePreferredCost = 1.0;

double margin(double v) { return 1e-9 * std::max(1.0, std::abs(v)); }

double stance_cost(Decision::Stance stance) {
  switch (stance) {
    case Decision::Stance::kForce: return kForceCost;
    case Decision::Stance::kGoal: return kGoalCost;
    case Decision::Stance::kPrefer: return kPreferCost;
  }
  return kPreferCost;
}

// Decision the look-ahead imposes on the next alarm, if any.
std::optional<bool> forced_alarm(const RateMonitor& monitor) {
  if (monitor.alarm_would_exceed_upper()) return false;
  if (monitor.silence_would_cross_lower()) return true;
  return std::nullopt;
}

// Steps of identical decisions within which a bound crossing makes a guard
// lean away from that bound.
constexpr int kGuardHorizon = 5;

// Decision a guard leans toward when `kGuardHorizon` identical steps would
// leave the bounds.
std::optional<bool> leaning(const RateMonitor& monitor) {
  const double keep = std::pow(1.0 - 1.0 / monitor.ell(), kGuardHorizon);
  const double after_alarms = 1.0 - (1.0 - monitor.rate()) * keep;
  const double after_silence = monitor.rate() * keep;
  const bool high = after_alarms > monitor.bounds().upper;
  const bool low = after_silence < monitor.bounds().lower;
  if (high == low) return std::nullopt;
  return low;
}

// Emulated decisions of one step, booked against the carry once z is known.
class CarryBook {
 public:
  explicit CarryBook(EmulationCarry& carry) : carry_(carry) {}

  // Wish for this step: a nominal-rate draw net of alarms still owed.
  bool wish(DetectorId id, const FeasibleSet& alarm_set, double nominal_rate, NoiseSource& rng) {
    const bool drawn = rng.bernoulli(nominal_rate);
    entries_.push_back({id, drawn, alarm_set});
    return owed(id) + (drawn ? 1 : 0) > 0;
  }

  void settle(double z) {
    constexpr int kMaxOwed = 10;
    for (const auto& e : entries_) {
      int& o = carry_.owed[static_cast<std::size_t>(e.id)];
      o = std::clamp(o + (e.drawn ? 1 : 0) - (e.alarm_set.contains(z) ? 1 : 0), -kMaxOwed, kMaxOwed);
    }
  }

 private:
  struct Entry {
    DetectorId id;
    bool drawn;
    FeasibleSet alarm_set;
  };
  [[nodiscard]] int owed(DetectorId id) const { return carry_.owed[static_cast<std::size_t>(id)]; }

  EmulationCarry& carry_;
  std::vector<Entry> entries_;
};

// Adds the decision `policy` implies for one detector: the look-ahead when it
// forces, a lean near a bound, otherwise an emulated wish at the nominal rate
// (carried over through `book` when given).
void add_decision(std::vector<Decision>& out, Policy policy, DetectorId id, const RateMonitor& monitor,
                  FeasibleSet when_true, FeasibleSet when_false, double nominal_rate,
                  NoiseSource& rng, CarryBook* book) {
  if (policy == Policy::kIgnore) return;
  if (auto forced = forced_alarm(monitor)) {
    out.push_back({std::move(when_true), std::move(when_false), Decision::Stance::kForce, *forced});
  } else if (auto lean = leaning(monitor)) {
    out.push_back({std::move(when_true), std::move(when_false), Decision::Stance::kPrefer, *lean});
  } else if (policy == Policy::kEmulate) {
    const bool wish = book ? book->wish(id, when_true, nominal_rate, rng) : rng.bernoulli(nominal_rate);
    out.push_back({std::move(when_true), std::move(when_false), Decision::Stance::kPrefer, wish});
  }
}

struct Policies {
  Policy bad_data = Policy::kIgnore;
  Policy cusum = Policy::kIgnore;
  Policy cusign = Policy::kIgnore;
  Policy magnitude = Policy::kIgnore;
  Policy sign = Policy::kIgnore;
};

// Collects the z-level decisions implied by `policies` for the next step.
std::vector<Decision> detector_decisions(const DetectorBank& bank, const Policies& policies,
                                         double cap, NoiseSource& rng, CarryBook* book = nullptr) {
  std::vector<Decision> out;
  const auto& cfg = bank.config();

  const double tau_z = bank.bad_data().threshold();
  add_decision(out, policies.bad_data, DetectorId::kBadData, bank.monitor(DetectorId::kBadData),
               FeasibleSet::range(tau_z + margin(tau_z), cap), FeasibleSet::range(0.0, tau_z),
               cfg.alpha, rng, book);

  const double level = bank.cusum().alarm_level();
  add_decision(out, policies.cusum, DetectorId::kCusum, bank.monitor(DetectorId::kCusum),
               FeasibleSet::range(level + margin(level), cap), FeasibleSet::range(0.0, level),
               cfg.cusum_rate, rng, book);

  const auto& serial = bank.serial();
  const auto z_prev = serial.previous_z();
  if (serial.next_step_active() && z_prev) {
    const double zp = *z_prev;
    const double tau_d = serial.threshold();
    const FeasibleSet magnitude_alarm =
        FeasibleSet::range(0.0, zp - tau_d - margin(zp + tau_d))
            .unite(FeasibleSet::range(zp + tau_d + margin(zp + tau_d), cap));
    const FeasibleSet magnitude_quiet = FeasibleSet::range(std::max(0.0, zp - tau_d), std::min(cap, zp + tau_d));
    add_decision(out, policies.magnitude, DetectorId::kSerialMagnitude, bank.monitor(DetectorId::kSerialMagnitude),
                 magnitude_alarm, magnitude_quiet, cfg.psi_des, rng, book);

    const int stored = serial.stored_sign();
    if (stored != 0) {
      const FeasibleSet down = FeasibleSet::range(0.0, zp - margin(zp));
      const FeasibleSet up = FeasibleSet::range(zp + margin(zp), cap);
      const FeasibleSet switch_set = stored > 0 ? down : up;
      const FeasibleSet keep_set =
          stored > 0 ? FeasibleSet::range(zp, cap) : FeasibleSet::range(0.0, zp);
      add_decision(out, policies.sign, DetectorId::kSerialSign, bank.monitor(DetectorId::kSerialSign), switch_set, keep_set,
                   2.0 / 3.0, rng, book);
    }
  }
  return out;
}

// Largest |S_i| the CUSIGN walks would reach after residual r.
int outward_reach(const detect::CusignDetector& cusign, const VectorXd& r) {
  int reach = 0;
  const auto& sums = cusign.accumulators();
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    reach = std::max(reach, std::abs(sums[static_cast<std::size_t>(i)] + detect::sign_of(r(i))));
  }
  return reach;
}

// Direction of delta. CUSIGN only sees residual signs, so it is steered
// through the direction alone. Uniform directions already give the nominal
// alarm rate; the look-ahead is honoured and, under emulation, the walks are
// pushed outward once the rate heads for its lower bound (an alarm needs
// `limit` steps to build).
VectorXd choose_direction(NoiseSource& rng, const DetectorBank& bank, Policy policy,
                          const MatrixXd& sigma_sqrt, double z, bool& violation) {
  const Eigen::Index s = sigma_sqrt.rows();
  if (policy == Policy::kIgnore) return rng.unit_vector(s);
  const auto& monitor = bank.monitor(DetectorId::kCusign);
  const auto& cusign = bank.cusign();
  std::optional<bool> want = forced_alarm(monitor);
  const bool hard = want.has_value();
  if (!want && policy == Policy::kEmulate) {
    const double horizon = std::pow(1.0 - 1.0 / monitor.ell(), cusign.limit());
    if (monitor.rate() * horizon < monitor.bounds().lower) want = true;
  }
  if (!want) return rng.unit_vector(s);
  if (z <= 0.0) {
    if (hard && *want) violation = true;
    return rng.unit_vector(s);
  }

  const double scale = std::sqrt(z);
  VectorXd fallback;
  int best_reach = -1;
  const int tries = hard ? 1000 : 64;
  for (int attempt = 0; attempt < tries; ++attempt) {
    VectorXd direction = rng.unit_vector(s);
    const VectorXd r = sigma_sqrt * (direction * scale);
    if (cusign.would_alarm(r) == *want) return direction;
    const int reach = *want ? outward_reach(cusign, r) : 0;
    if (reach > best_reach) {
      best_reach = reach;
      fallback = std::move(direction);
    }
  }
  if (hard) violation = true;
  return fallback;
}

// chi-square(s) CDF and quantile for restricted sampling.
double chi_square_cdf(int s, double x) { return specfun::reg_lower_gamma(0.5 * s, 0.5 * std::max(0.0, x)); }

double sample_chi_square_restricted(const FeasibleSet& set, int sensors, NoiseSource& rng) {
  std::vector<double> masses;
  double total = 0.0;
  for (const auto& iv : set.intervals()) {
    const double m = chi_square_cdf(sensors, iv.hi) - chi_square_cdf(sensors, iv.lo);
    masses.push_back(m);
    total += m;
  }
  if (!(total > 1e-300)) return set.sample(rng);
  double target = rng.uniform() * total;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    const auto& iv = set.intervals()[i];
    if (target <= masses[i] || i + 1 == masses.size()) {
      const double p = std::min(chi_square_cdf(sensors, iv.lo) + target, 1.0 - 1e-16);
      const double x = 2.0 * specfun::inv_reg_lower_gamma(0.5 * sensors, p);
      return std::clamp(x, iv.lo, iv.hi);
    }
    target -= masses[i];
  }
  return set.intervals().back().hi;
}

DeltaSample finish(NoiseSource& rng, const DetectorBank& bank, const Resolution& resolution,
                   Policy cusign_policy, const StealthSettings& settings) {
  DeltaSample out;
  out.feasibility_violation = resolution.violation;
  const VectorXd direction =
      choose_direction(rng, bank, cusign_policy, settings.sigma_sqrt, resolution.z, out.feasibility_violation);
  out.delta.delta = direction * std::sqrt(std::max(0.0, resolution.z));
  return out;
}

}  // namespace

std::string_view attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kNone: return "none";
    case AttackKind::kZeroAlarm: return "zero_alarm";
    case AttackKind::kHiddenBadData: return "hidden_bd";
    case AttackKind::kBias: return "bias";
    case AttackKind::kPattern: return "pattern";
    case AttackKind::kSerialEvading: return "serial_evading";
  }
  return "none";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (auto kind : {AttackKind::kNone, AttackKind::kZeroAlarm, AttackKind::kHiddenBadData,
                    AttackKind::kBias, AttackKind::kPattern, AttackKind::kSerialEvading}) {
    if (attack_kind_name(kind) == name) return kind;
  }
  throw ConfigError("attack.kind: unknown attack '" + std::string(name) +
                    "' (expected none, zero_alarm, hidden_bd, bias, pattern, serial_evading)");
}

SamplingLaw parse_sampling_law(std::string_view name) {
  if (name == "uniform") return SamplingLaw::kUniform;
  if (name == "chi_square") return SamplingLaw::kChiSquare;
  throw ConfigError("redteam.sampling: expected 'uniform' or 'chi_square', got '" + std::string(name) + "'");
}

void AttackPlan::validate() const {
  if (kind == AttackKind::kNone) return;
  if (start < 0 || !(start < end)) throw ConfigError("attack: need 0 <= start < end");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("attack.epsilon must lie in (0, 1)");
  if (pattern_period < 1) throw ConfigError("attack.pattern.period must be >= 1");
}

VectorXd attack_vector(const DeltaVector& delta, const VectorXd& e, const VectorXd& eta,
                       const MatrixXd& c, const MatrixXd& sigma_sqrt) {
  return -c * e - eta + sigma_sqrt * delta.delta;
}

DeltaVector delta_with_norm(NoiseSource& rng, Eigen::Index sensors, double squared_norm) {
  if (!(squared_norm >= 0.0)) throw DomainError("delta_with_norm: squared norm must be >= 0");
  return {rng.unit_vector(sensors) * std::sqrt(squared_norm)};
}

DeltaVector zero_alarm_delta(NoiseSource& rng, Eigen::Index sensors, double tau_z) {
  if (!(tau_z > 0.0)) throw DomainError("zero_alarm_delta: tau_z must be positive");
  const double norm = rng.uniform() * tau_z;
  return delta_with_norm(rng, sensors, norm);
}

DeltaVector hidden_bd_delta(NoiseSource& rng, Eigen::Index sensors, double tau_z, double alpha,
                            double epsilon) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("hidden_bd_delta: alpha must lie in (0, 1)");
  const double norm = rng.bernoulli(alpha) ? tau_z * (1.0 + epsilon) : tau_z * (1.0 - epsilon);
  return delta_with_norm(rng, sensors, norm);
}

Resolution resolve_decisions(std::span<const Decision> decisions, const FeasibleSet& preferred,
                             const FeasibleSet& full, NoiseSource& rng, SamplingLaw law,
                             int sensors) {
  const std::size_t n = decisions.size();
  if (n > 16) throw DomainError("resolve_decisions: too many decisions");

  struct Candidate {
    FeasibleSet set;
    bool violation;
  };
  double best = std::numeric_limits<double>::infinity();
  std::vector<Candidate> ties;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    FeasibleSet set = full;
    double cost = 0.0;
    bool violation = false;
    for (std::size_t i = 0; i < n && !set.empty(); ++i) {
      const bool choice = (mask >> i) & 1u;
      const auto& d = decisions[i];
      set = set.intersect(choice ? d.when_true : d.when_false);
      if (choice != d.value) {
        cost += stance_cost(d.stance);
        violation |= d.stance == Decision::Stance::kForce;
      }
    }
    if (set.empty()) continue;
    const FeasibleSet inside = set.intersect(preferred);
    if (!inside.empty()) {
      set = inside;
    } else {
      cost += kOutsidePreferredCost;
    }
    if (cost < best) {
      best = cost;
      ties.clear();
    }
    if (cost == best) ties.push_back({std::move(set), violation});
  }

  if (ties.empty()) return {full.sample(rng), true};
  const auto pick = std::min(ties.size() - 1,
                             static_cast<std::size_t>(rng.uniform() * static_cast<double>(ties.size())));
  const auto& chosen = ties[pick];
  const double z = law == SamplingLaw::kChiSquare
                       ? sample_chi_square_restricted(chosen.set, sensors, rng)
                       : chosen.set.sample(rng);
  return {z, chosen.violation};
}

DeltaSample bias_delta(NoiseSource& rng, const DetectorBank& bank, EmulationCarry& carry,
                       const StealthSettings& settings) {
  Policies policies;
  policies.bad_data = Policy::kEmulate;
  policies.cusum = Policy::kEmulate;
  policies.cusign = Policy::kEmulate;
  policies.sign = Policy::kGuard;
  const double cap = settings.z_cap;
  const double tau_z = bank.bad_data().threshold();
  CarryBook book(carry);
  const auto decisions = detector_decisions(bank, policies, cap, rng, &book);
  const FeasibleSet band = FeasibleSet::range(tau_z * (1.0 - settings.epsilon),
                                              std::min(cap, tau_z * (1.0 + settings.epsilon)));
  // The band is narrow; z is spread uniformly inside it whatever the law.
  const Resolution res = resolve_decisions(decisions, band, FeasibleSet::range(0.0, cap), rng,
                                           SamplingLaw::kUniform, bank.config().sensors);
  book.settle(res.z);
  return finish(rng, bank, res, policies.cusign, settings);
}

DeltaSample pattern_delta(NoiseSource& rng, const DetectorBank& bank, PatternState& state,
                          EmulationCarry& carry, const StealthSettings& settings) {
  Policies policies;
  policies.bad_data = Policy::kEmulate;
  policies.cusum = Policy::kEmulate;
  policies.cusign = Policy::kEmulate;
  policies.magnitude = Policy::kEmulate;
  const double cap = settings.z_cap;
  CarryBook book(carry);
  auto decisions = detector_decisions(bank, policies, cap, rng, &book);
  if (const auto z_prev = bank.serial().previous_z()) {
    const double zp = *z_prev;
    decisions.push_back({FeasibleSet::range(zp + margin(zp), cap),
                         FeasibleSet::range(0.0, zp - margin(zp)), Decision::Stance::kGoal,
                         state.desired_sign() > 0});
  }
  state.advance();
  const FeasibleSet full = FeasibleSet::range(0.0, cap);
  const Resolution res =
      resolve_decisions(decisions, full, full, rng, settings.law, bank.config().sensors);
  book.settle(res.z);
  return finish(rng, bank, res, policies.cusign, settings);
}

DeltaSample serial_evading_delta(NoiseSource& rng, const DetectorBank& bank,
                                 const StealthSettings& settings) {
  Policies policies;
  policies.bad_data = Policy::kGuard;
  policies.cusum = Policy::kGuard;
  policies.cusign = Policy::kEmulate;
  policies.magnitude = Policy::kEmulate;
  policies.sign = Policy::kEmulate;
  const double cap = settings.z_cap;
  const auto decisions = detector_decisions(bank, policies, cap, rng);
  const FeasibleSet full = FeasibleSet::range(0.0, cap);
  const Resolution res =
      resolve_decisions(decisions, full, full, rng, settings.law, bank.config().sensors);
  return finish(rng, bank, res, policies.cusign, settings);
}

double default_z_cap(int sensors) { return 2.0 * specfun::inv_reg_lower_gamma(0.5 * sensors, 1.0 - 1e-6); }

Attacker::Attacker(AttackPlan plan, std::uint64_t seed, MatrixXd c, StealthSettings settings)
    : plan_(plan), rng_(seed), c_(std::move(c)), settings_(std::move(settings)),
      pattern_(plan.pattern_period) {
  plan_.validate();
  settings_.epsilon = plan_.epsilon;
  settings_.pattern_period = plan_.pattern_period;
}

Attacker::Output Attacker::next(std::int64_t k, const VectorXd& e, const VectorXd& eta,
                                const DetectorBank& bank) {
  Output out;
  const Eigen::Index s = c_.rows();
  if (!plan_.active(k)) {
    out.xi = VectorXd::Zero(s);
    return out;
  }
  out.active = true;
  const double tau_z = bank.bad_data().threshold();
  switch (plan_.kind) {
    case AttackKind::kZeroAlarm:
      out.delta = zero_alarm_delta(rng_, s, tau_z);
      break;
    case AttackKind::kHiddenBadData:
      out.delta = hidden_bd_delta(rng_, s, tau_z, bank.config().alpha, plan_.epsilon);
      break;
    case AttackKind::kBias: {
      auto sample = bias_delta(rng_, bank, carry_, settings_);
      out.delta = std::move(sample.delta);
      out.feasibility_violation = sample.feasibility_violation;
      break;
    }
    case AttackKind::kPattern: {
      auto sample = pattern_delta(rng_, bank, pattern_, carry_, settings_);
      out.delta = std::move(sample.delta);
      out.feasibility_violation = sample.feasibility_violation;
      break;
    }
    case AttackKind::kSerialEvading: {
      auto sample = serial_evading_delta(rng_, bank, settings_);
      out.delta = std::move(sample.delta);
      out.feasibility_violation = sample.feasibility_violation;
      break;
    }
    case AttackKind::kNone:
      break;
  }
  out.xi = attack_vector(out.delta, e, eta, c_, settings_.sigma_sqrt);
  return out;
}

}  // namespace serialmon::redteam
