#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "serialmon/detect.hpp"
#include "serialmon/feasible_set.hpp"
#include "serialmon/rng.hpp"

namespace serialmon::redteam {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class AttackKind { kNone, kZeroAlarm, kHiddenBadData, kBias, kPattern, kSerialEvading };

/// Density used to draw z inside the feasible set.
enum class SamplingLaw {
  kUniform,    ///< uniform over the set
  kChiSquare,  ///< chi-square(s) restricted to the set
};


std::string_view attack_kind_name(AttackKind kind);
SamplingLaw parse_sampling_law(std::string_view name);
/// Throws ConfigError for unknown names.
AttackKind parse_attack_kind(std::string_view name);

/// Declarative attack over steps [start, end).
struct AttackPlan {
  AttackKind kind = AttackKind::kNone;
  std::int64_t start = 0;
  std::int64_t end = 0;
  double epsilon = 0.05;   ///< concentration half-width relative to tau_z
  int pattern_period = 3;  ///< run length of the up/down pattern

  void validate() const;
  [[nodiscard]] bool active(std::int64_t k) const {
    return kind != AttackKind::kNone && k >= start && k < end;
  }
};

/// The attacker's free vector; with full knowledge the residual becomes
/// Sigma^(1/2) delta and z = delta^T delta.
struct DeltaVector {
  VectorXd delta;
  [[nodiscard]] double squared_norm() const { return delta.squaredNorm(); }
};

/// xi = -C e - eta + Sigma^(1/2) delta.
VectorXd attack_vector(const DeltaVector& delta, const VectorXd& e, const VectorXd& eta,
                       const MatrixXd& c, const MatrixXd& sigma_sqrt);

/// Uniformly random direction scaled so that delta^T delta = squared_norm.
DeltaVector delta_with_norm(NoiseSource& rng, Eigen::Index sensors, double squared_norm);

/// delta^T delta uniform on [0, tau_z], uniform direction.
DeltaVector zero_alarm_delta(NoiseSource& rng, Eigen::Index sensors, double tau_z);

/// delta^T delta = tau_z (1 + epsilon) with probability alpha, else tau_z (1 - epsilon).
DeltaVector hidden_bd_delta(NoiseSource& rng, Eigen::Index sensors, double tau_z, double alpha,
                            double epsilon = 0.05);

/// How the attacker treats one detector when choosing z_k = delta^T delta.
enum class Policy {
  kIgnore,   ///< not modelled
  kGuard,    ///< only honour the one-step MRE look-ahead
  kEmulate,  ///< look-ahead plus a random alarm decision at the nominal rate
};

/// Binary choice about z_k: the sets of z that realize `true` and `false`.
struct Decision {
  enum class Stance { kPrefer, kGoal, kForce };
  FeasibleSet when_true;
  FeasibleSet when_false;
  Stance stance = Stance::kPrefer;
  bool value = false;
};

struct Resolution {
  double z = 0.0;
  bool violation = false;  ///< some forced decision could not be honoured
};

/// Picks the assignment of decisions with the cheapest violations (forced,
/// then goals, then preferences, then leaving `preferred`) whose realizing set
/// is nonempty, then draws z from it with the given law (`sensors` sets the
/// chi-square degrees of freedom).
Resolution resolve_decisions(std::span<const Decision> decisions, const FeasibleSet& preferred,
                             const FeasibleSet& full, NoiseSource& rng,
                             SamplingLaw law = SamplingLaw::kUniform, int sensors = 2);

/// Knobs shared by the detector-aware attacks.
struct StealthSettings {
  MatrixXd sigma_sqrt;
  double z_cap = 30.0;  ///< largest z the attacker will emit
  double epsilon = 0.05;
  int pattern_period = 3;
  SamplingLaw law = SamplingLaw::kUniform;
};

struct DeltaSample {
  DeltaVector delta;
  bool feasibility_violation = false;
};

/// Net alarms an emulated detector has been promised but not yet given, per
/// detector. Promises the other constraints could not honour are carried over
/// so that emulated alarm rates stay at their nominal values.
struct EmulationCarry {
  std::array<int, detect::kDetectorCount> owed{};
};

/// Concentrates z in [tau_z (1 - eps), tau_z (1 + eps)] whenever the Bad-Data,
/// CUSUM and CUSIGN alarm decisions (drawn at their nominal rates) allow it,
/// while guarding the sign monitor.
DeltaSample bias_delta(NoiseSource& rng, const detect::DetectorBank& bank, EmulationCarry& carry,
                       const StealthSettings& settings);

/// Up/down runs of d_k of length `pattern_period` with Bad-Data, CUSUM, CUSIGN
/// and magnitude alarms emulated at their nominal rates.
class PatternState {
 public:
  explicit PatternState(int period = 3) : period_(period) {}
  [[nodiscard]] int desired_sign() const { return (position_ / period_) % 2 == 0 ? 1 : -1; }
  void advance() { ++position_; }

 private:
  int period_;
  std::int64_t position_ = 0;
};

DeltaSample pattern_delta(NoiseSource& rng, const detect::DetectorBank& bank, PatternState& state,
                          EmulationCarry& carry, const StealthSettings& settings);

/// Worst case: every detector is emulated or guarded so all five alarm rates
/// stay inside their bounds.
DeltaSample serial_evading_delta(NoiseSource& rng, const detect::DetectorBank& bank,
                                 const StealthSettings& settings);

/// Per-step attack synthesis for one plan.
class Attacker {
 public:
  struct Output {
    VectorXd xi;
    DeltaVector delta;
    bool active = false;
    bool feasibility_violation = false;
  };

  Attacker(AttackPlan plan, std::uint64_t seed, MatrixXd c, StealthSettings settings);

  /// e and eta are the attacker's (omniscient) view of step k; `bank` is the
  /// detector state before step k.
  Output next(std::int64_t k, const VectorXd& e, const VectorXd& eta,
              const detect::DetectorBank& bank);

  [[nodiscard]] const AttackPlan& plan() const { return plan_; }

 private:
  AttackPlan plan_;
  NoiseSource rng_;
  MatrixXd c_;
  StealthSettings settings_;
  PatternState pattern_;
  EmulationCarry carry_;
};

/// Largest z used by the detector-aware attacks: the chi-square(s) 1 - 1e-6 quantile.
double default_z_cap(int sensors);

}  // namespace serialmon::redteam
